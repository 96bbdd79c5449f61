"""Concrete qudit objects: clock and shift operators, mutually unbiased bases,
product measurements, reference states and channels.

Conventions
-----------
* Bipartite matrices are ordered ``first ⊗ second``; the first factor is the
  message (or Alice's share), the second the retained system (or Bob's share).
* Sender inputs ``x = (x0, x1)`` are flattened to ``x0 * d + x1``.
* Complex conjugation of basis vectors is entrywise in the computational basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import linalg
from .errors import DimensionError, NotPrimeError, PreconditionError
from .linalg import Subsystem

#: largest dimension accepted by constructors that require a prime
MAX_PRIME = 13
#: completeness / trace-preservation tolerance for POVMs and channels
COMPLETENESS_TOL = 1e-10
#: Hermiticity / trace tolerance for density matrices
STATE_TOL = 1e-10


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for k in range(2, math.isqrt(n) + 1):
        if n % k == 0:
            return False
    return True


def require_prime(d: int, odd: bool = False, cap: int | None = None) -> int:
    cap = MAX_PRIME if cap is None else cap
    if not isinstance(d, (int, np.integer)) or not is_prime(int(d)):
        raise NotPrimeError(f"dimension {d} is not prime")
    if odd and d == 2:
        raise NotPrimeError("an odd prime dimension is required")
    if d > cap:
        raise NotPrimeError(f"dimension {d} exceeds the supported cap {cap}")
    return int(d)


def mod_inverse(a: int, d: int) -> int:
    """Inverse of ``a`` modulo the prime ``d`` (Fermat)."""
    a %= d
    if a == 0:
        raise ZeroDivisionError(f"0 has no inverse modulo {d}")
    return pow(a, d - 2, d)


# --------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class WeylPair:
    d: int
    x_op: np.ndarray
    z_op: np.ndarray
    omega: complex

    def power(self, op: str, t: int) -> np.ndarray:
        """``X^t`` or ``Z^t`` for any integer ``t`` (negative powers allowed)."""
        base = self.x_op if op == "X" else self.z_op
        return np.linalg.matrix_power(base, int(t) % self.d)


@dataclass(frozen=True)
class MubFamily:
    """``bases[z][:, m]`` is the unit vector ``|e_{m,z}>``; ``z = d`` is computational."""

    d: int
    bases: np.ndarray  # (d + 1, d, d)

    def vector(self, m: int, z: int) -> np.ndarray:
        return self.bases[z][:, m % self.d]

    def projector(self, m: int, z: int) -> np.ndarray:
        return linalg.ket_to_dm(self.vector(m, z))


@dataclass(frozen=True)
class DensityMatrix:
    mat: np.ndarray
    dim_a: int
    dim_b: int = 1
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        m = linalg.as_matrix(self.mat)
        n = self.dim_a * self.dim_b
        if m.shape != (n, n):
            raise DimensionError(f"state of shape {m.shape} does not match dims ({self.dim_a}, {self.dim_b})")
        if self.check:
            m = linalg.hermitize(m, STATE_TOL)
            tr = np.trace(m).real
            if abs(tr - 1.0) > STATE_TOL:
                raise PreconditionError(f"state has trace {tr!r}")
            lo = linalg.min_eigenvalue(m)
            if lo < -linalg.PSD_TOL:
                raise PreconditionError(f"state has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "mat", m)

    @property
    def dim(self) -> int:
        return self.dim_a * self.dim_b

    def marginal(self, keep: Subsystem) -> np.ndarray:
        return linalg.partial_trace(self.mat, self.dim_a, self.dim_b, keep)


@dataclass(frozen=True)
class Povm:
    """Measurement with one effect per outcome; ``effects`` has shape (k, D, D)."""

    effects: np.ndarray
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        e = np.asarray(self.effects, dtype=np.complex128)
        if e.ndim != 3 or e.shape[1] != e.shape[2] or e.shape[0] < 1:
            raise DimensionError(f"effects must have shape (k, D, D), got {e.shape}")
        if self.check:
            e = np.array([linalg.hermitize(m, linalg.HERMITIAN_TOL) for m in e])
            for c, m in enumerate(e):
                lo = linalg.min_eigenvalue(m)
                if lo < -linalg.PSD_TOL:
                    raise PreconditionError(f"effect {c} has negative eigenvalue {lo:.3e}")
            dev = np.max(np.abs(e.sum(axis=0) - np.eye(e.shape[1])))
            if dev > COMPLETENESS_TOL:
                raise PreconditionError(f"effects sum to identity only within {dev:.3e}")
        object.__setattr__(self, "effects", e)

    @property
    def d_total(self) -> int:
        return self.effects.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[0]


@dataclass(frozen=True)
class KrausChannel:
    """CPTP map given by Kraus operators of shape (K, d_out, d_in)."""

    kraus_ops: np.ndarray
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        k = np.asarray(self.kraus_ops, dtype=np.complex128)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3:
            raise DimensionError(f"Kraus operators must have shape (K, d_out, d_in), got {k.shape}")
        if self.check:
            tp = np.einsum("kji,kjl->il", k.conj(), k)
            dev = np.max(np.abs(tp - np.eye(k.shape[2])))
            if dev > COMPLETENESS_TOL:
                raise PreconditionError(f"Kraus set is not trace preserving (deviation {dev:.3e})")
        object.__setattr__(self, "kraus_ops", k)

    @property
    def d_in(self) -> int:
        return self.kraus_ops.shape[2]

    @property
    def d_out(self) -> int:
        return self.kraus_ops.shape[1]

    @classmethod
    def identity(cls, d: int) -> "KrausChannel":
        return cls(np.eye(d, dtype=np.complex128)[None], check=False)

    @classmethod
    def unitary(cls, u) -> "KrausChannel":
        return cls(np.asarray(u, dtype=np.complex128)[None])

    @classmethod
    def depolarizing(cls, d: int) -> "KrausChannel":
        """Fully depolarising map ``rho -> tr(rho) I/d`` via the d^2 Weyl operators."""
        w = weyl_pair_any(d)
        ops = [w.power("X", a) @ w.power("Z", b) / d for a in range(d) for b in range(d)]
        return cls(np.array(ops))

    @classmethod
    def random(cls, d_in: int, d_out: int, rng: np.random.Generator, n_kraus: int = 2) -> "KrausChannel":
        """Random channel from a Haar-like isometry ``d_in -> d_out * n_kraus``."""
        n_kraus = max(n_kraus, -(-d_in // d_out))
        g = rng.standard_normal((d_out * n_kraus, d_in)) + 1j * rng.standard_normal((d_out * n_kraus, d_in))
        q, r = np.linalg.qr(g)
        q = q * (np.diag(r) / np.abs(np.diag(r)))
        return cls(q.reshape(n_kraus, d_out, d_in))

    def then(self, other: "KrausChannel") -> "KrausChannel":
        """Composite map: apply ``self`` first, then ``other``."""
        if other.d_in != self.d_out:
            raise DimensionError(f"cannot compose d_out={self.d_out} with d_in={other.d_in}")
        ops = np.einsum("jab,kbc->jkac", other.kraus_ops, self.kraus_ops)
        return KrausChannel(ops.reshape(-1, other.d_out, self.d_in), check=False)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        k = self.kraus_ops
        return np.einsum("kab,bc,kdc->ad", k, rho, k.conj())


# --------------------------------------------------------------------------
# constructors


@lru_cache(maxsize=None)
def weyl_pair_any(d: int) -> WeylPair:
    omega = np.exp(2j * np.pi / d)
    x = np.roll(np.eye(d, dtype=np.complex128), 1, axis=0)
    z = np.diag(omega ** np.arange(d))
    return WeylPair(d, x, z, complex(omega))


def weyl_pair(d: int) -> WeylPair:
    """Clock (``Z|k> = w^k |k>``) and shift (``X|k> = |k+1>``) operators."""
    return weyl_pair_any(require_prime(d))


def encoding_unitary(w: WeylPair, x0: int, x1: int) -> np.ndarray:
    """``X^{x0} Z^{x1}``."""
    if not (0 <= x0 < w.d and 0 <= x1 < w.d):
        raise PreconditionError(f"residues ({x0}, {x1}) outside 0..{w.d - 1}")
    return w.power("X", x0) @ w.power("Z", x1)


def weyl_encodings(d: int) -> list[KrausChannel]:
    """Unitary encodings for every flattened input ``x = x0 * d + x1``."""
    w = weyl_pair(d)
    return [KrausChannel(encoding_unitary(w, x0, x1)[None], check=False) for x0 in range(d) for x1 in range(d)]


@lru_cache(maxsize=None)
def _mub_bases(d: int) -> np.ndarray:
    if d == 2:
        # eigenbases of X, XZ (= -iY) and Z; the odd-prime phase formula fails at d=2
        s = 1 / np.sqrt(2)
        bx = np.array([[s, s], [s, -s]], dtype=np.complex128)
        by = np.array([[s, s], [1j * s, -1j * s]], dtype=np.complex128)
        return np.array([bx, by, np.eye(2, dtype=np.complex128)])
    omega = np.exp(2j * np.pi / d)
    l = np.arange(d)
    bases = []
    for z in range(d):
        cols = [omega ** ((l * (m + z * l)) % d) / np.sqrt(d) for m in range(d)]
        bases.append(np.column_stack([linalg.fix_phase(c) for c in cols]))
    bases.append(np.eye(d, dtype=np.complex128))
    out = np.array(bases)
    out.setflags(write=False)
    return out


def mub_family(d: int) -> MubFamily:
    """Complete set of ``d + 1`` mutually unbiased bases for prime ``d``."""
    return MubFamily(d, _mub_bases(require_prime(d)))


def shift_relation_check(w: WeylPair, mubs: MubFamily, t: int, z: int, m: int) -> tuple[float, float, float, float]:
    """Residual norms of the four Weyl actions on MUB vectors.

    Returns, in order, the residuals of ``X^t e_m = w^{zt^2 - tm} e_{m-2zt}``,
    ``Z^t e_m = e_{m+t}``, ``X^t e*_m = w^{-zt^2 + tm} e*_{m-2zt}`` and
    ``Z^t e*_m = e*_{m-t}``.
    """
    d = w.d
    if d == 2:
        raise PreconditionError("shift relations are stated for odd prime d")
    if not 0 <= z < d:
        raise PreconditionError(f"setting z={z} must satisfy 0 <= z < d (z = d excluded)")
    xt, zt = w.power("X", t), w.power("Z", t)
    e = lambda k: mubs.vector(k % d, z)  # noqa: E731
    es = lambda k: np.conj(e(k))  # noqa: E731
    ph = w.omega ** ((z * t * t - t * m) % d)
    return (
        float(np.linalg.norm(xt @ e(m) - ph * e(m - 2 * z * t))),
        float(np.linalg.norm(zt @ e(m) - e(m + t))),
        float(np.linalg.norm(xt @ es(m) - np.conj(ph) * es(m - 2 * z * t))),
        float(np.linalg.norm(zt @ es(m) - es(m - t))),
    )


@lru_cache(maxsize=None)
def _qubit_observables() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    w = weyl_pair_any(2)
    x, z = w.x_op, w.z_op
    xz = x @ z
    return np.kron(x, x), np.kron(z, z), np.kron(xz, xz)


@lru_cache(maxsize=None)
def _product_effects(d: int, z: int) -> np.ndarray:
    if d == 2:
        e = _qubit_observables()[z]
        eye = np.eye(4)
        return np.array([(eye + e) / 2, (eye - e) / 2])
    basis = _mub_bases(d)[z]
    proj = np.einsum("im,jm->mij", basis, basis.conj())
    effects = np.zeros((d, d * d, d * d), dtype=np.complex128)
    for c1 in range(d):
        for c2 in range(d):
            effects[(c1 - c2) % d] += np.kron(proj[c1], proj[c2].conj())
    effects.setflags(write=False)
    return effects


def product_measurement(d: int, z: int) -> Povm:
    """Product measurement for setting ``z`` on the ``d*d``-dimensional joint space.

    For odd prime ``d`` the first system is measured in basis ``z`` and the
    second in its complex conjugate; the outcome is ``c1 - c2 mod d``.  For
    ``d = 2`` the binary observables ``X⊗X``, ``Z⊗Z``, ``XZ⊗XZ`` (in this
    order of ``z``) are measured with ``M_c = (I + (-1)^c E_z) / 2``.
    """
    require_prime(d)
    if not 0 <= z <= d:
        raise PreconditionError(f"setting z={z} outside 0..{d}")
    return Povm(_product_effects(d, z), check=False)


def max_entangled(d: int) -> DensityMatrix:
    """``|phi+> = sum_i |ii> / sqrt(d)`` as a density matrix."""
    if d < 2:
        raise PreconditionError("dimension must be at least 2")
    psi = np.eye(d, dtype=np.complex128).ravel() / np.sqrt(d)
    return DensityMatrix(linalg.ket_to_dm(psi), d, d, check=False)


def isotropic(d: int, v: float) -> DensityMatrix:
    """``v * phi+ + (1 - v) I / d^2``."""
    if not 0.0 <= v <= 1.0:
        raise PreconditionError(f"visibility {v} outside [0, 1]")
    mat = v * max_entangled(d).mat + (1 - v) * np.eye(d * d) / (d * d)
    return DensityMatrix(mat, d, d, check=False)


def pure_schmidt(theta: float) -> DensityMatrix:
    """``cos(theta)|00> + sin(theta)|11>`` for ``theta`` in ``[0, pi/4]``."""
    if not 0.0 <= theta <= np.pi / 4 + 1e-15:
        raise PreconditionError(f"theta={theta} outside [0, pi/4]")
    psi = np.zeros(4, dtype=np.complex128)
    psi[0], psi[3] = np.cos(theta), np.sin(theta)
    return DensityMatrix(linalg.ket_to_dm(psi), 2, 2, check=False)


def apply_local(kraus: np.ndarray, rho: np.ndarray, dim_a: int, dim_b: int, side: Subsystem) -> np.ndarray:
    """Raw-array version of :func:`apply_channel`; returns the new matrix."""
    r = rho.reshape(dim_a, dim_b, dim_a, dim_b)
    if side == "first":
        out = np.einsum("kia,ajbl,kcb->ijcl", kraus, r, kraus.conj())
        n = kraus.shape[1] * dim_b
    elif side == "second":
        out = np.einsum("kja,iabl,kcl->ijbc", kraus, r, kraus.conj())
        n = dim_a * kraus.shape[1]
    else:
        raise ValueError(f"side must be 'first' or 'second', not {side!r}")
    return out.reshape(n, n)


def apply_channel(ch: KrausChannel, rho: DensityMatrix, side: Subsystem = "first") -> DensityMatrix:
    """Act with ``ch`` on one factor of a bipartite state (identity on the other)."""
    d_side = rho.dim_a if side == "first" else rho.dim_b
    if ch.d_in != d_side:
        raise DimensionError(f"channel input dimension {ch.d_in} does not match subsystem dimension {d_side}")
    mat = apply_local(ch.kraus_ops, rho.mat, rho.dim_a, rho.dim_b, side)
    if side == "first":
        return DensityMatrix(mat, ch.d_out, rho.dim_b)
    return DensityMatrix(mat, rho.dim_a, ch.d_out)


def apply_product_channel(ch_a: KrausChannel, ch_b: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    return apply_channel(ch_b, apply_channel(ch_a, rho, "first"), "second")


def fidelity_phi_plus(rho: DensityMatrix) -> float:
    """Overlap ``<phi+_d| rho |phi+_d>`` of a state on ``d ⊗ d``."""
    if rho.dim_a != rho.dim_b:
        raise DimensionError(f"fidelity with phi+ needs equal local dimensions, got ({rho.dim_a}, {rho.dim_b})")
    d = rho.dim_a
    diag_idx = np.arange(d) * (d + 1)
    return float(rho.mat[np.ix_(diag_idx, diag_idx)].sum().real / d)


def mub_completeness_operator(d: int) -> np.ndarray:
    """``sum_z sum_c E_{c|z} ⊗ E*_{c|z}`` over the full MUB family."""
    fam = mub_family(d)
    total = np.zeros((d * d, d * d), dtype=np.complex128)
    for z in range(d + 1):
        for c in range(d):
            p = fam.projector(c, z)
            total += np.kron(p, p.conj())
    return total


def haar_states(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` Haar-random pure states stacked as an ``(n, dim, dim)`` array."""
    return np.array([linalg.ket_to_dm(linalg.haar_ket(dim, rng)) for _ in range(n)])


def stack_effects(povms: Sequence[Povm]) -> np.ndarray:
    """Stack same-shape POVMs into a ``(n_settings, n_outcomes, D, D)`` array."""
    shapes = {p.effects.shape for p in povms}
    if len(shapes) != 1:
        raise DimensionError(f"POVMs have mismatched shapes {sorted(shapes)}")
    return np.array([p.effects for p in povms])
