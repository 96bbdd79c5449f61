"""Hot kernels of the SDP solver, compiled when available.

The Cython extension ``_ckernels`` is used if it was built; otherwise the
numpy implementation in ``_fallback`` is loaded.  Setting the environment
variable ``EAPMCERT_KERNELS`` to ``python`` or ``cython`` forces a backend
(``cython`` raises if the extension is missing).
"""

import os
from types import ModuleType

from . import _fallback

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _fallback}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str | None = None) -> ModuleType:
    if name is None:
        return ops
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ImportError(f"kernel backend {name!r} is not available (have {available_backends()})") from None


_requested = os.environ.get("EAPMCERT_KERNELS", "").strip().lower()
if _requested:
    ops = get_backend(_requested)
    BACKEND = _requested
else:
    BACKEND = "cython" if _ckernels is not None else "python"
    ops = _BACKENDS[BACKEND]

__all__ = ["BACKEND", "available_backends", "get_backend", "ops"]
