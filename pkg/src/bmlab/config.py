"""Physical configuration, derived couplings and the internal unit system.

All numerics run in transverse-oscillator units: lengths in
lT = sqrt(hbar / (m * omega_T)), times in 1/omega_T, energies in
hbar * omega_T.  Conversion to/from SI happens only at I/O boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .constants import HBAR, A_BOHR, AMU, RB87_MASS_AMU
from .errors import ConfigError

# Default scattering ratios {a22 : a12 : a11} for the 87Rb hyperfine pair;
# chosen so that gamma2 = (g11 + g22)/2 - g12 vanishes identically.
DEFAULT_RATIO_A11 = 1.03
DEFAULT_RATIO_A22 = 0.97


@dataclass(frozen=True)
class PhysConfig:
    """Trap / species configuration in SI units."""

    mass: float      # kg
    omega_T: float   # transverse angular frequency, rad/s
    omega_L: float   # longitudinal angular frequency, rad/s
    a11: float       # m
    a22: float       # m
    a12: float       # m
    N: int           # atom count

    def __post_init__(self):
        if not (self.mass > 0):
            raise ConfigError("mass must be positive")
        if not (self.omega_T > self.omega_L > 0):
            raise ConfigError(
                "cigar anisotropy requires omega_T > omega_L > 0 "
                f"(got omega_T={self.omega_T}, omega_L={self.omega_L})")
        for name in ("a11", "a22", "a12"):
            if not (getattr(self, name) > 0):
                raise ConfigError(f"{name} must be positive")
        if self.N < 2:
            raise ConfigError("N must be at least 2")

    @property
    def aspect_ratio(self) -> float:
        return self.omega_T / self.omega_L


@dataclass(frozen=True)
class DerivedCouplings:
    """Interaction strengths and lengths derived from a PhysConfig (SI)."""

    g11: float     # J m^3
    g22: float
    g12: float
    gamma1: float  # (g11 - g22)/2
    gamma2: float  # (g11 + g22)/2 - g12
    rho0: float    # sqrt(hbar / (2 m omega_T)), m
    lT: float      # sqrt(hbar / (m omega_T)) = sqrt(2) * rho0, m


def coupling_from_scattering(a: float, m: float) -> float:
    """Interaction strength g = 4 pi hbar^2 a / m."""
    if not (m > 0):
        raise ConfigError("mass must be positive")
    return 4.0 * math.pi * HBAR**2 * a / m


def derive_couplings(cfg: PhysConfig) -> DerivedCouplings:
    g11 = coupling_from_scattering(cfg.a11, cfg.mass)
    g22 = coupling_from_scattering(cfg.a22, cfg.mass)
    g12 = coupling_from_scattering(cfg.a12, cfg.mass)
    rho0 = math.sqrt(HBAR / (2.0 * cfg.mass * cfg.omega_T))
    return DerivedCouplings(
        g11=g11, g22=g22, g12=g12,
        gamma1=0.5 * (g11 - g22),
        gamma2=0.5 * (g11 + g22) - g12,
        rho0=rho0,
        lT=math.sqrt(2.0) * rho0,
    )


@dataclass(frozen=True)
class ScaledConfig:
    """Configuration in internal (transverse-oscillator) units.

    Dimensionless couplings are g~ = g / (hbar omega_T lT^3) = 4 pi a / lT.
    omega_T and lT are kept in SI to anchor conversions back.
    """

    lam: float       # omega_L / omega_T
    g11: float
    g22: float
    g12: float
    gamma1: float    # (g11 - g22)/2, internal
    gamma2: float
    N: int
    lT: float        # m
    omega_T: float   # rad/s
    rho0: float = 1.0 / math.sqrt(2.0)  # transverse length in lT units

    @property
    def a11(self) -> float:
        """a11 in internal length units (lT)."""
        return self.g11 / (4.0 * math.pi)

    def time_to_si(self, t):
        return t / self.omega_T

    def length_to_si(self, z):
        return z * self.lT


def to_internal(cfg: PhysConfig) -> ScaledConfig:
    d = derive_couplings(cfg)
    g11 = 4.0 * math.pi * cfg.a11 / d.lT
    g22 = 4.0 * math.pi * cfg.a22 / d.lT
    g12 = 4.0 * math.pi * cfg.a12 / d.lT
    return ScaledConfig(
        lam=cfg.omega_L / cfg.omega_T,
        g11=g11, g22=g22, g12=g12,
        gamma1=0.5 * (g11 - g22),
        gamma2=0.5 * (g11 + g22) - g12,
        N=cfg.N,
        lT=d.lT,
        omega_T=cfg.omega_T,
    )


def from_internal(s: ScaledConfig) -> PhysConfig:
    """Invert to_internal; round-trips to ~1e-12 relative."""
    mass = HBAR / (s.omega_T * s.lT**2)
    return PhysConfig(
        mass=mass,
        omega_T=s.omega_T,
        omega_L=s.lam * s.omega_T,
        a11=s.g11 * s.lT / (4.0 * math.pi),
        a22=s.g22 * s.lT / (4.0 * math.pi),
        a12=s.g12 * s.lT / (4.0 * math.pi),
        N=s.N,
    )


def with_a22(s: ScaledConfig, a22_si: float) -> ScaledConfig:
    """Scaled config with a22 replaced (SI metres); used by the fitter."""
    if not (a22_si > 0):
        raise ConfigError("a22 must be positive")
    g22 = 4.0 * math.pi * a22_si / s.lT
    return replace(s, g22=g22,
                   gamma1=0.5 * (s.g11 - g22),
                   gamma2=0.5 * (s.g11 + g22) - s.g12)


def with_N(s: ScaledConfig, N: int) -> ScaledConfig:
    if N < 2:
        raise ConfigError("N must be at least 2")
    return replace(s, N=N)


# --- keyed text configuration file -----------------------------------------

#: key -> (default, parser). Frequencies are in Hz (converted to rad/s),
#: lengths in Bohr radii, mass in amu.
_PHYS_KEYS = {
    "mass_amu": (RB87_MASS_AMU, float),
    "omega_T_hz": (350.0, float),
    "omega_L_hz": (3.5, float),
    "a12_bohr": (100.0, float),
    "ratio_a11": (DEFAULT_RATIO_A11, float),
    "ratio_a22": (DEFAULT_RATIO_A22, float),
    "N": (1000, int),
}

_NUMERIC_KEYS = {
    "grid_nx": (32, int),
    "grid_ny": (32, int),
    "grid_nz": (512, int),
    "grid_n1d": (4096, int),
    "dt_real": (1e-3, float),
    "dt_imag": (1e-3, float),
    "tol": (1e-10, float),
    "t_end": (0.0, float),        # 0 -> one expected-signal period
    "sample_every": (20, int),
    "noise_amp": (0.0, float),
    "seed": (0, int),
}


def parse_key_values(lines, source="<config>"):
    """Parse 'key = value' lines; '#' starts a comment. Strict keys."""
    known = {**_PHYS_KEYS, **_NUMERIC_KEYS}
    out = {}
    for i, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{i}: expected 'key = value', got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in known:
            raise ConfigError(f"{source}:{i}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{i}: duplicate key {key!r}")
        _, cast = known[key]
        try:
            out[key] = cast(val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{i}: bad value for {key!r}: {val!r}") from exc
    return out


def config_from_dict(values: dict) -> tuple[PhysConfig, dict]:
    """Apply defaults and build (PhysConfig, numeric-settings dict)."""
    phys = {k: values.get(k, d) for k, (d, _) in _PHYS_KEYS.items()}
    numeric = {k: values.get(k, d) for k, (d, _) in _NUMERIC_KEYS.items()}
    a12 = phys["a12_bohr"] * A_BOHR
    two_pi = 2.0 * math.pi
    cfg = PhysConfig(
        mass=phys["mass_amu"] * AMU,
        omega_T=two_pi * phys["omega_T_hz"],
        omega_L=two_pi * phys["omega_L_hz"],
        a11=phys["ratio_a11"] * a12,
        a22=phys["ratio_a22"] * a12,
        a12=a12,
        N=phys["N"],
    )
    return cfg, numeric


def parse_config(path) -> tuple[PhysConfig, dict]:
    """Read a keyed text configuration file (strict: unknown keys rejected)."""
    with open(path, "r", encoding="utf-8") as fh:
        values = parse_key_values(fh, source=str(path))
    return config_from_dict(values)
