"""Exception hierarchy."""


class BrinkmanError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BrinkmanError, ValueError):
    """Invalid grid, operator or run configuration."""


class ParameterError(ConfigurationError):
    """Model parameters violate the standing assumptions."""


class NonSymmetricPressure(ParameterError):
    pass


class NonPositiveDefinitePressure(ParameterError):
    def __init__(self, alpha):
        super().__init__(f"pressure matrix is not positive definite (smallest eigenvalue {alpha:.6g})")
        self.alpha = alpha


class NegativeRate(ParameterError):
    pass


class NonPositiveSigma(ParameterError):
    pass


class NonPositiveEps(ParameterError):
    pass


class SingularCompetitionMatrix(BrinkmanError, ArithmeticError):
    pass


class NonPositiveSteadyState(BrinkmanError, ValueError):
    pass


class DomainMismatch(ConfigurationError):
    """The Green's kernel is only available on (-1, 1)."""


class GridMismatch(ConfigurationError):
    pass


class SimulationError(BrinkmanError, RuntimeError):
    """Raised from inside a time loop.

    ``partial`` carries the trajectory computed before the failure, if any.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class PositivityLoss(SimulationError):
    pass


class NonFiniteState(SimulationError):
    pass


class LockstepViolation(SimulationError):
    pass


class HypothesisViolated(SimulationError):
    def __init__(self, condition, t, partial=None):
        super().__init__(f"hypothesis violated: {condition} at t={t:.6g}", partial)
        self.condition = condition
        self.t = t


class FitDegenerate(BrinkmanError, ValueError):
    pass


class ParseError(ConfigurationError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class UnknownKey(ParseError):
    pass


class MissingRequired(ParseError):
    pass
