"""Entanglement certification games with prepare-and-measure scenarios.

Submodules
----------
linalg     dense complex linear algebra helpers
qudit      Weyl operators, mutually unbiased bases, states, channels, POVMs
protocols  games, correlation simulation and scoring
bounds     unassisted bounds and critical visibilities
optimize   SDP solver and see-saw search
cli        command-line entry point
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DimensionError,
    EapmError,
    NotHermitianError,
    NotPrimeError,
    PreconditionError,
    SdpConvergenceError,
    SdpInfeasibleError,
    SolverError,
)

__all__ = [
    "DimensionError",
    "EapmError",
    "NotHermitianError",
    "NotPrimeError",
    "PreconditionError",
    "SdpConvergenceError",
    "SdpInfeasibleError",
    "SolverError",
    "__version__",
]
