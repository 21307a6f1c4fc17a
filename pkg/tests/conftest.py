import math

import pytest

from bmlab.config import config_from_dict, parse_key_values, to_internal
from bmlab.grids import Grid1D, default_box_1d
from bmlab import analytic


def scaled_config(**overrides):
    """Internal-unit config from keyword overrides of the documented keys."""
    lines = [f"{k} = {v}" for k, v in overrides.items()]
    phys, numeric = config_from_dict(parse_key_values(lines))
    return to_internal(phys)


def grid_for(s, n=1024):
    """1D box sized by the standard rule for this config."""
    eta_T = analytic.eta_T_gaussian(s.rho0)
    geff = (s.N - 1) * s.g11 * eta_T
    z_tf = (1.5 * geff / s.lam**2) ** (1.0 / 3.0)
    return default_box_1d(s.lam, z_tf, n)


@pytest.fixture(scope="session")
def fast_config():
    """Wide trap (lam = 0.1) with exaggerated ratios: short signal periods."""
    return scaled_config(omega_L_hz=35, ratio_a11=1.3, ratio_a22=0.7, N=200)


@pytest.fixture(scope="session")
def production_config():
    """Production trap (350 Hz / 3.5 Hz) with the nominal ratios."""
    return scaled_config(N=1000)
