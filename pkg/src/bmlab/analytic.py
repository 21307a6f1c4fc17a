"""Closed-form model machinery in internal (transverse-oscillator) units.

Covers the transverse Gaussian quartic integral, the Thomas-Fermi
longitudinal profile, the expected signals T1/T2/T3 and the first-order
perturbative correction for the cigar trap.

Sign convention: all signals are oriented so that dT/dt at t = 0 equals
+Omega, matching the small-time slope of the simulated overlap
Im<psi_1|psi_2> for gamma1 > 0 (d/dt <psi_1|psi_2>|_0 = +i Omega).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_laguerre

from .config import ScaledConfig
from .errors import ContractError, InsufficientBoxError, PerturbationBreakdownError
from .grids import Grid1D

LN_4_3 = math.log(4.0 / 3.0)


def eta_T_gaussian(rho0: float) -> float:
    """Quartic integral of the transverse Gaussian ground state."""
    if not (rho0 > 0):
        raise ContractError("rho0 must be positive")
    return 1.0 / (4.0 * math.pi * rho0**2)


# --- Thomas-Fermi ----------------------------------------------------------

@dataclass(frozen=True)
class TFProfile:
    """Inverted-parabola longitudinal density, internal units."""

    grid: Grid1D
    z_N: float       # half-width
    mu_L: float      # longitudinal chemical potential = lam^2 z_N^2 / 2
    q0: np.ndarray   # density samples; integrates to 1


def thomas_fermi(s: ScaledConfig, eta_T: float, grid1: Grid1D) -> TFProfile:
    geff = (s.N - 1) * s.g11 * eta_T
    z_N = (1.5 * geff / s.lam**2) ** (1.0 / 3.0)
    if grid1.z_half < 1.2 * z_N:
        raise InsufficientBoxError(
            f"grid half-extent {grid1.z_half:.3g} < 1.2 * z_N = {1.2 * z_N:.3g}")
    mu_L = 0.5 * s.lam**2 * z_N**2
    q0 = np.maximum(0.0, mu_L - 0.5 * s.lam**2 * grid1.z**2) / geff
    return TFProfile(grid=grid1, z_N=z_N, mu_L=mu_L, q0=q0)


def eta_L_tf(profile: TFProfile) -> float:
    """Quartic integral of the TF profile: 3 / (5 z_N) in closed form."""
    return 3.0 / (5.0 * profile.z_N)


def eta_L_printed_form(s: ScaledConfig, rho0: float | None = None) -> float:
    """Alternative closed form with the literature coefficient
    (2/5) [9 pi lam^2 rho0^2 / (2 (N-1) g11)]^(1/3); differs from
    3/(5 z_N) by 2^(1/3).  Kept for diagnostics only."""
    r0 = s.rho0 if rho0 is None else rho0
    return 0.4 * (9.0 * math.pi * s.lam**2 * r0**2
                  / (2.0 * (s.N - 1) * s.g11)) ** (1.0 / 3.0)


# --- transverse basis and perturbation kernel ------------------------------

def xi_n0(n: int, rho: np.ndarray, lT: float = 1.0) -> np.ndarray:
    """Unit-normalized m = 0 radial eigenfunction of the 2D harmonic trap:
    xi_n0 = exp(-rho^2 / 2 lT^2) L_n(rho^2 / lT^2) / (sqrt(pi) lT)."""
    u = (rho / lT) ** 2
    return np.exp(-0.5 * u) * eval_laguerre(n, u) / (math.sqrt(math.pi) * lT)


def radial_grid(rho_max: float, n: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [0, rho_max] for 1D radial quadrature
    (the 2 pi rho measure is left to the caller)."""
    x, w = np.polynomial.legendre.leggauss(n)
    rho = 0.5 * rho_max * (x + 1.0)
    return rho, 0.5 * rho_max * w


def gamma_T_cigar(eta_T: float, omega_T: float = 1.0, hbar: float = 1.0) -> float:
    """Transverse perturbation kernel for the cigar trap:
    eta_T^2 / (2 hbar omega_T) * ln(4/3)."""
    if not (eta_T > 0 and omega_T > 0):
        raise ContractError("eta_T and omega_T must be positive")
    return eta_T**2 / (2.0 * hbar * omega_T) * LN_4_3


def gamma_T_series(eta_T: float, omega_T: float = 1.0, hbar: float = 1.0,
                   n_terms: int = 40) -> float:
    """Direct series sum_{n>=1} <xi_n|xi_0^3>^2 / (E_n - mu_0) with
    <xi_n|xi_0^3> = eta_T / 2^n and E_n - mu_0 = 2 n hbar omega_T."""
    n = np.arange(1, n_terms + 1)
    return float(np.sum((eta_T / 2.0**n) ** 2 / (2.0 * n * hbar * omega_T)))


def chi01_series(s: ScaledConfig, eta_L: float, rho: np.ndarray,
                 tail_tol: float = 1e-12) -> np.ndarray:
    """First-order transverse correction
    chi01(rho) = -a11 eta_L (N-1) sum_{n>=1} xi_n0(rho) / (2^n n),
    truncated when a term's coefficient drops below tail_tol of the
    accumulated coefficient sum."""
    if not (eta_L > 0):
        raise ContractError("eta_L must be positive")
    pref = -s.a11 * eta_L * (s.N - 1)
    out = np.zeros_like(rho, dtype=float)
    coeff_sum = 0.0
    n = 1
    while True:
        c = 1.0 / (2.0**n * n)
        out += c * xi_n0(n, rho)
        coeff_sum += c
        if c < tail_tol * coeff_sum or n > 200:
            break
        n += 1
    return pref * out


# --- perturbed longitudinal profile ----------------------------------------

@dataclass(frozen=True)
class PerturbedProfile:
    """First-order-corrected longitudinal density and transverse correction."""

    grid: Grid1D
    phi0_sq: np.ndarray      # |phi0|^2 samples
    mu_tilde: float          # corrected longitudinal chemical potential
    mu_L: float              # uncorrected TF value
    gamma_T: float
    rho: np.ndarray          # radial nodes for chi01
    rho_w: np.ndarray        # radial quadrature weights
    chi01: np.ndarray        # transverse correction on rho
    eta_T_corr: float
    eta_L_corr: float
    phi00: np.ndarray        # TF amplitude
    phi01: np.ndarray        # phi0 - phi00


def _phi0_sq(mu_t, z, s: ScaledConfig, eta_T, gamma_T):
    """Minus-branch solution of the quartic longitudinal equation,
    clamped to zero outside its support."""
    v = mu_t - 0.5 * s.lam**2 * z**2
    x = 12.0 * gamma_T * v / eta_T**2
    root = np.sqrt(np.maximum(1.0 - x, 0.0))
    # 1 - sqrt(1-x) written as x/(1+sqrt(1-x)): stable for small gamma_T,
    # where the direct difference loses most of its significant digits
    dens = np.where(
        v > 0.0,
        eta_T * x / ((1.0 + root) * 6.0 * s.g11 * (s.N - 1) * gamma_T),
        0.0,
    )
    return dens


def perturbed_profile(s: ScaledConfig, eta_T: float, gamma_T: float,
                      grid1: Grid1D, norm_tol: float = 1e-10,
                      rho_max: float = 8.0, rho_n: int = 256) -> PerturbedProfile:
    """Solve the corrected longitudinal profile; mu_tilde fixed by bisection
    on the normalization.  Raises PerturbationBreakdownError when even the
    maximum admissible chemical potential cannot normalize the density."""
    z = grid1.z
    dz = grid1.dz
    mu_max = eta_T**2 / (12.0 * gamma_T)  # discriminant zero at z = 0

    def norm_at(mu_t):
        return float(np.sum(_phi0_sq(mu_t, z, s, eta_T, gamma_T)) * dz)

    if norm_at(mu_max) < 1.0:
        raise PerturbationBreakdownError(
            f"perturbative profile cannot be normalized at N = {s.N}: "
            f"norm at discriminant limit is {norm_at(mu_max):.6f} < 1",
            N=s.N)

    lo, hi = 0.0, mu_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm_at(mid) < 1.0:
            lo = mid
        else:
            hi = mid
        # relative to the current bracket, not mu_max: the admissible
        # range is enormous when gamma_T is small
        if hi - lo < 1e-16 * hi:
            break
    mu_tilde = 0.5 * (lo + hi)
    phi0_sq = _phi0_sq(mu_tilde, z, s, eta_T, gamma_T)
    residual = abs(np.sum(phi0_sq) * dz - 1.0)
    if residual > norm_tol:
        raise ContractError(
            f"perturbed-profile normalization residual {residual:.3e} > {norm_tol}")

    tf = thomas_fermi(s, eta_T, grid1)
    phi00 = np.sqrt(tf.q0)
    phi01 = np.sqrt(phi0_sq) - phi00

    eta_L_tf_val = eta_L_tf(tf)
    rho, rho_w = radial_grid(rho_max, rho_n)
    chi01 = chi01_series(s, eta_L_tf_val, rho)
    chi00 = xi_n0(0, rho)
    eta_T_corr = float(np.sum((chi00 + chi01) ** 4 * 2.0 * math.pi * rho * rho_w))
    eta_L_corr = float(np.sum(phi0_sq**2) * dz)

    return PerturbedProfile(
        grid=grid1, phi0_sq=phi0_sq, mu_tilde=mu_tilde, mu_L=tf.mu_L,
        gamma_T=gamma_T, rho=rho, rho_w=rho_w, chi01=chi01,
        eta_T_corr=eta_T_corr, eta_L_corr=eta_L_corr,
        phi00=phi00, phi01=phi01)


def corrected_etas(p: PerturbedProfile) -> tuple[float, float]:
    return p.eta_T_corr, p.eta_L_corr


# --- expected signals ------------------------------------------------------

@dataclass(frozen=True)
class SignalModel:
    """Expected signal of a given fidelity level.

    Omega = (N-1) * eta_T * eta_L * gamma1 (internal angular frequency).
    T1 ignores the profile; T2/T3 evaluate the position-dependent-phase
    integral over `density` with quartic integral `eta_L`.
    """

    kind: str                 # "T1", "T2" or "T3"
    Omega: float
    eta_T: float
    eta_L: float
    grid: Grid1D | None = None
    density: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("T1", "T2", "T3"):
            raise ContractError(f"unknown signal kind {self.kind!r}")
        if self.kind != "T1":
            if self.grid is None or self.density is None:
                raise ContractError(f"{self.kind} requires a profile")
            quart = float(np.sum(self.density**2) * self.grid.dz)
            if abs(quart - self.eta_L) > 1e-8 * max(abs(self.eta_L), 1e-300):
                raise ContractError(
                    f"eta_L = {self.eta_L} inconsistent with profile "
                    f"quartic integral {quart}")


def signal_T1(Omega: float, t) -> np.ndarray:
    return np.sin(Omega * np.asarray(t, dtype=float))


def _phase_signal(grid: Grid1D, density: np.ndarray, eta_L: float,
                  Omega: float, t) -> np.ndarray:
    """Im[e^{i Omega t} Integral dz q e^{i Omega t (q - eta_L)/eta_L}],
    oriented for a +Omega small-time slope."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phase = (density - eta_L) / eta_L
    w = density * grid.dz
    out = np.empty(t.shape, dtype=float)
    # chunk over t to bound the (n_t, n_z) phase matrix
    for i in range(0, t.size, 512):
        tc = t[i:i + 512]
        ph = np.exp(1j * np.outer(Omega * tc, phase))
        out[i:i + 512] = np.imag(np.exp(1j * Omega * tc) * (ph @ w))
    return out


def evaluate_signal(model: SignalModel, t) -> np.ndarray:
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if model.kind == "T1":
        out = signal_T1(model.Omega, t_arr)
    else:
        out = _phase_signal(model.grid, model.density, model.eta_L,
                            model.Omega, t_arr)
    return out


def signal_T2(model: SignalModel, t) -> np.ndarray:
    if model.kind != "T2":
        raise ContractError("signal_T2 requires a T2 model")
    return evaluate_signal(model, t)


def signal_T3(model: SignalModel, t) -> np.ndarray:
    if model.kind != "T3":
        raise ContractError("signal_T3 requires a T3 model")
    return evaluate_signal(model, t)


def build_model(kind: str, s: ScaledConfig, grid1: Grid1D) -> SignalModel:
    """Assemble the expected-signal model of the requested fidelity from a
    scaled configuration (TF etas for T1/T2, corrected etas for T3)."""
    eta_T = eta_T_gaussian(s.rho0)
    tf = thomas_fermi(s, eta_T, grid1)
    # quadrature value so the model's eta_L is exactly consistent with its
    # sampled profile (agrees with 3/(5 z_N) to quadrature accuracy)
    eta_L = float(np.sum(tf.q0**2) * grid1.dz)
    if kind == "T1":
        Omega = (s.N - 1) * eta_T * eta_L * s.gamma1
        return SignalModel(kind="T1", Omega=Omega, eta_T=eta_T, eta_L=eta_L)
    if kind == "T2":
        Omega = (s.N - 1) * eta_T * eta_L * s.gamma1
        return SignalModel(kind="T2", Omega=Omega, eta_T=eta_T, eta_L=eta_L,
                           grid=grid1, density=tf.q0)
    if kind == "T3":
        gamma_T = gamma_T_cigar(eta_T)
        p = perturbed_profile(s, eta_T, gamma_T, grid1)
        Omega = (s.N - 1) * p.eta_T_corr * p.eta_L_corr * s.gamma1
        return SignalModel(kind="T3", Omega=Omega, eta_T=p.eta_T_corr,
                           eta_L=p.eta_L_corr, grid=grid1, density=p.phi0_sq)
    raise ContractError(f"unknown signal kind {kind!r}")
