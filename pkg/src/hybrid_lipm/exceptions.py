"""Exception hierarchy shared by all modules."""


class HybridLipmError(Exception):
    """Base class for domain errors raised by this package."""


class InfeasibleGait(HybridLipmError, ValueError):
    pass


class NotInJumpSet(HybridLipmError, ValueError):
    pass


class TimerOutOfRange(HybridLipmError, ValueError):
    pass


class AlphaTooSmall(HybridLipmError, ValueError):
    """Decay rate does not exceed the pendulum frequency."""


class Infeasible(HybridLipmError):
    """The LMI program has no strictly feasible point."""

    def __init__(self, message, best_margin=None):
        super().__init__(message)
        self.best_margin = best_margin


class SolverFailure(HybridLipmError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ZenoGuardTripped(HybridLipmError):
    pass


class StepNeverCompletes(HybridLipmError):
    pass


class QpInfeasible(HybridLipmError):
    pass


class ConfigError(HybridLipmError, ValueError):
    """Malformed or incomplete run configuration."""
