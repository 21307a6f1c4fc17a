"""Physical constants (CODATA 2018, truncated to 12 significant digits)."""

HBAR = 1.05457181765e-34  # J s
A_BOHR = 5.29177210903e-11  # m
AMU = 1.66053906660e-27  # kg

# 87Rb mass in amu
RB87_MASS_AMU = 86.9091805310
