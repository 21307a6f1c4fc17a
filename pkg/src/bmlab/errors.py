"""Exception hierarchy.

The CLI maps these onto exit codes: ConfigError -> 2,
ConvergenceError -> 3, PerturbationBreakdownError -> 4.
"""


class BmlabError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(BmlabError):
    """Invalid physical or numerical configuration."""


class ContractError(BmlabError):
    """A caller violated a documented precondition."""


class GridMismatchError(ContractError):
    """Two fields/densities do not live on the same grid."""


class InsufficientBoxError(ConfigError):
    """Grid extent too small to hold the requested profile."""


class ConvergenceError(BmlabError):
    """Iterative solver failed to converge within its iteration budget."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class PerturbationBreakdownError(BmlabError):
    """First-order transverse correction has no physical solution.

    Raised when the discriminant of the quartic longitudinal equation goes
    negative for every admissible chemical potential, i.e. the atom number
    is too large for the perturbative treatment.
    """

    def __init__(self, message, N=None):
        super().__init__(message)
        self.N = N


class WindowTooShortError(ContractError):
    """Scan window contained fewer than two same-direction zero crossings."""
