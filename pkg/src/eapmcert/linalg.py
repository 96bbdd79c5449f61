"""Dense complex linear algebra used by every other module.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The helpers
here add the validation and conventions the rest of the package relies on
(Hermiticity checks, subsystem ordering for partial traces, size guards).

Tolerances are module-level so callers and tests can refer to them by name.
"""

from __future__ import annotations

from typing import Literal, NamedTuple

import numpy as np

from .errors import DimensionError, NotHermitianError, SolverError

#: max |a - a^H| entry accepted (and symmetrised away) before eigensolving
HERMITIAN_TOL = 1e-10
#: orthonormality / reconstruction tolerance for eigendecompositions
EIG_TOL = 1e-10
#: trace preservation of partial traces and kron products
TRACE_TOL = 1e-12
#: smallest eigenvalue still counted as positive semidefinite
PSD_TOL = 1e-9
#: largest number of entries a kron product may produce
MAX_ENTRIES = 1 << 24

Subsystem = Literal["first", "second"]


class HermitianEig(NamedTuple):
    """Eigenvalues in non-decreasing order with matching orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a 2-d complex array, rejecting empty or ragged input."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-d matrix, got shape {m.shape}")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitian_deviation(a: np.ndarray) -> float:
    """Largest entrywise modulus of ``a - a^H``."""
    return float(np.max(np.abs(a - dagger(a)))) if a.size else 0.0


def hermitize(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``(a + a^H)/2`` after checking that ``a`` is Hermitian within ``tol``."""
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix is not square: {m.shape}")
    dev = hermitian_deviation(m)
    if dev > tol:
        raise NotHermitianError(f"matrix deviates from Hermitian by {dev:.3e} > {tol:.1e}")
    return 0.5 * (m + dagger(m))


def kron(a, b, max_entries: int = MAX_ENTRIES) -> np.ndarray:
    """Kronecker product with a guard against accidentally huge results."""
    a = as_matrix(a)
    b = as_matrix(b)
    n = a.shape[0] * b.shape[0] * a.shape[1] * b.shape[1]
    if n > max_entries:
        raise DimensionError(f"kron result would hold {n} entries (limit {max_entries})")
    return np.kron(a, b)


def eig_hermitian(a, tol: float = HERMITIAN_TOL) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix.

    The input is symmetrised first, so round-off left over from channel
    applications never reaches the eigensolver.  Deviations larger than
    ``tol`` are an error rather than silently discarded.
    """
    h = hermitize(a, tol)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # LAPACK iteration cap
        raise SolverError(f"Hermitian eigensolver did not converge: {exc}") from exc
    return HermitianEig(w, v)


def operator_norm(a) -> float:
    """Largest modulus eigenvalue of a Hermitian matrix."""
    w = eig_hermitian(a).eigenvalues
    return float(max(abs(w[0]), abs(w[-1])))


def min_eigenvalue(a) -> float:
    return float(eig_hermitian(a).eigenvalues[0])


def is_psd(a, tol: float = PSD_TOL) -> bool:
    try:
        return min_eigenvalue(a) >= -tol
    except NotHermitianError:
        return False


def partial_trace(m, dim_a: int, dim_b: int, keep: Subsystem = "first") -> np.ndarray:
    """Trace out one factor of a ``dim_a * dim_b`` square matrix.

    ``keep="first"`` returns the ``dim_a``-square reduced matrix (the second
    factor is traced out); ``keep="second"`` the ``dim_b``-square one.
    """
    m = as_matrix(m)
    n = dim_a * dim_b
    if m.shape != (n, n):
        raise DimensionError(f"expected a {n}x{n} matrix for dims ({dim_a}, {dim_b}), got {m.shape}")
    t = m.reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == "first":
        return np.einsum("ijkj->ik", t)
    if keep == "second":
        return np.einsum("ijil->jl", t)
    raise ValueError(f"keep must be 'first' or 'second', not {keep!r}")


def inner(u, v) -> complex:
    """``<u|v>`` for column vectors (conjugate-linear in ``u``)."""
    return complex(np.vdot(np.asarray(u).ravel(), np.asarray(v).ravel()))


def ket_to_dm(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    return np.outer(psi, psi.conj())


def fix_phase(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate ``v`` so its first non-negligible entry is real and positive."""
    v = np.asarray(v, dtype=np.complex128)
    idx = np.flatnonzero(np.abs(v) > tol)
    if idx.size == 0:
        return v
    z = v[idx[0]]
    return v * (abs(z) / z)


def haar_ket(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector from normalised complex Gaussians."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state ``G G^H / tr`` with a ``dim x rank`` Ginibre ``G``."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (g + dagger(g))
