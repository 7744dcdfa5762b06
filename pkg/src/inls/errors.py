"""Exception hierarchy shared by the solver modules."""


class INLSError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(INLSError, ValueError):
    """Invalid grid, weight or run configuration."""


class ParameterError(INLSError, ValueError):
    """Model parameters outside the admissible range."""


class RegimeError(ParameterError):
    """Quantity only defined in the intercritical regime 0 < s_c < 1."""


class SolverError(INLSError, RuntimeError):
    """Ground-state shooting failed to bracket or converge."""


class HorizonError(INLSError, RuntimeError):
    """Mass reached the edge of the periodic box (wraparound)."""


class NumericalOverflowError(INLSError, FloatingPointError):
    """Non-finite values appeared during time stepping."""


class OracleStabilityError(INLSError, RuntimeError):
    """The explicit reference integrator went unstable."""
