"""Exception types raised across the package."""


class EapmError(Exception):
    """Base class for all package errors."""


class PreconditionError(EapmError, ValueError):
    """An input violates an operation's precondition."""


class DimensionError(PreconditionError):
    """Shapes or subsystem dimensions do not fit together."""


class NotHermitianError(PreconditionError):
    """A matrix expected to be Hermitian deviates beyond tolerance."""


class NotPrimeError(PreconditionError):
    """A dimension that must be prime is not (or exceeds the supported cap)."""


class SolverError(EapmError, RuntimeError):
    """A numerical solver failed to deliver a certified answer."""


class SdpInfeasibleError(SolverError):
    """The interior-point iterates diverge, signalling an infeasible program."""


class SdpConvergenceError(SolverError):
    """The iteration cap was reached before the duality gap closed."""
