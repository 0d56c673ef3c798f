"""Exception types raised across the package."""


class BondgaugeError(Exception):
    """Base class for all package errors."""


class DomainError(BondgaugeError, ValueError):
    """An argument lies outside the domain of the requested function."""


class NonFiniteResult(BondgaugeError, ArithmeticError):
    """The forward model produced a non-finite or degenerate value."""


class JacobianFailure(BondgaugeError, ArithmeticError):
    """A finite-difference quotient was not finite."""


class OptimizerFailure(BondgaugeError, RuntimeError):
    """Every multistart run of the nonlinear fit failed."""


class RankDeficient(BondgaugeError, ArithmeticError):
    """The linearized forward matrix does not have full column rank."""


class InfeasibleSet(BondgaugeError, ValueError):
    """The calibrated confidence set does not intersect the box."""


class SolverStall(BondgaugeError, RuntimeError):
    """The endpoint solver did not reach its tolerance within budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateDesign(BondgaugeError, ValueError):
    """The regression design has no spread in x."""


class BudgetError(BondgaugeError, ValueError):
    """The miscoverage budget cannot be split as requested."""


class ConfigError(BondgaugeError, ValueError):
    """A run configuration failed validation."""
