"""Exception hierarchy shared by all modules."""


class DeltaShockError(Exception):
    """Base class for every error raised by the package."""


class InvalidProblem(DeltaShockError, ValueError):
    pass


class DegenerateStates(InvalidProblem):
    """f'(U1) == f'(U0): the characteristics never meet."""


class FluxDescriptorError(InvalidProblem):
    """A user-supplied derivative is inconsistent with its primitive."""


class RootNotBracketed(DeltaShockError, ValueError):
    pass


class QuadratureNotConverged(DeltaShockError, RuntimeError):
    pass


class StepNotConverged(DeltaShockError, RuntimeError):
    pass


class JacobianNonPositive(DeltaShockError, RuntimeError):
    pass


class OrderingViolation(DeltaShockError, RuntimeError):
    pass


class CrossCheckFailed(DeltaShockError, RuntimeError):
    pass


class WindowTooSmall(DeltaShockError, ValueError):
    pass


class OutOfValidity(DeltaShockError, ValueError):
    pass


class ConfigError(DeltaShockError, ValueError):
    pass
