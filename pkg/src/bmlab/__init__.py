"""Two-mode BEC metrology lab.

Simulates the overlap signal of a two-mode condensate in a cigar trap by
integrating coupled Gross-Pitaevskii equations, evaluates the analytic
expected signals T1/T2/T3, quantifies model-data deviation versus atom
number and fits the inter-species scattering length from the signal.
"""

__version__ = "0.1.0"

from .config import (PhysConfig, DerivedCouplings, ScaledConfig,
                     coupling_from_scattering, derive_couplings,
                     to_internal, from_internal, parse_config)
from .grids import (Grid1D, Grid3D, ComplexField, norm_squared, eta_integral,
                    overlap, marginal_longitudinal, marginal_transverse_x)
from .solver import (GroundStateResult, Trajectory, ground_state_3d,
                     ground_state_reduced_1d, ground_state_reduced_1d_scf,
                     propagate_coupled, populations)
from .analytic import (TFProfile, PerturbedProfile, SignalModel,
                       eta_T_gaussian, thomas_fermi, eta_L_tf, signal_T1,
                       signal_T2, signal_T3, gamma_T_cigar, gamma_T_series,
                       chi01_series, perturbed_profile, corrected_etas,
                       build_model, evaluate_signal)
from .deviation import (DeviationRow, FitResult, period_tau, rms_deviation,
                        wavefunction_rms_deviation, sweep_deviations,
                        profile_deviations, fit_parameter)
