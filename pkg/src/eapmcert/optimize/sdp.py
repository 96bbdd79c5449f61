"""Small dense semidefinite programs by a primal-dual interior-point method.

Programs are posed over block-diagonal Hermitian matrices::

    maximise    sum_b <C_b, X_b>
    subject to  sum_b <A_ib, X_b> = b_i      (i = 1..m)
                X_b >= 0

with dual ``minimise b.y  s.t.  S = sum_i y_i A_i - C >= 0``.  Real symmetric
programs are handled as Hermitian ones with real data; their optimum is
attained at a real matrix, so the returned blocks are real up to round-off.

Search directions use Nesterov-Todd scaling with a Mehrotra-type choice of the
centring parameter.  Constraint matrices are stored sparsely, which keeps the
Schur complement cheap for the entrywise constraints that POVM problems use.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .. import _kernels
from ..errors import DimensionError, NotHermitianError, SdpConvergenceError, SdpInfeasibleError
from ..linalg import HERMITIAN_TOL, dagger, eig_hermitian, fix_phase, hermitize, ket_to_dm
from ..qudit import DensityMatrix, Povm

log = logging.getLogger(__name__)

MAX_ITERS = 200
#: target relative gap and scaled residuals for normal termination
TARGET_TOL = 1e-9
#: what a returned solution must certify: duality gap per unit objective
#: (``1 + |value|``), constraint residual per unit right-hand side
GAP_TOL = 1e-7
RESIDUAL_TOL = 1e-8
PSD_TOL = 1e-9
#: iterate norm beyond which the program is declared infeasible
DIVERGENCE = 1e12
STEP_FRACTION = 0.98
#: stop once the best merit is below STALL_MERIT and has not improved for STALL_ITERS
STALL_MERIT = 1e-8
STALL_ITERS = 4
#: largest block size for which the shared-pattern Schur path forms n^2 x n^2 products
SHARED_MAX_SIZE = 32


@dataclass(frozen=True)
class SdpProblem:
    """Block-diagonal SDP in the standard primal form above.

    Constraints are sparse: entry ``e`` says that constraint ``con[e]`` has
    coefficient ``val[e]`` at position ``(row[e], col[e])`` of block ``blk[e]``.
    Each constraint matrix must be Hermitian, i.e. off-diagonal entries come in
    conjugate pairs.
    """

    block_sizes: tuple[int, ...]
    objective: tuple[np.ndarray, ...]
    con: np.ndarray
    blk: np.ndarray
    row: np.ndarray
    col: np.ndarray
    val: np.ndarray
    rhs: np.ndarray
    _compiled: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.block_sizes)
        if not sizes or min(sizes) < 1:
            raise DimensionError("need at least one block of positive size")
        obj = tuple(np.asarray(c, dtype=np.complex128) for c in self.objective)
        if len(obj) != len(sizes) or any(c.shape != (n, n) for c, n in zip(obj, sizes)):
            raise DimensionError("objective blocks do not match block sizes")
        for c in obj:
            if np.max(np.abs(c - dagger(c))) > HERMITIAN_TOL:
                raise NotHermitianError("objective block is not Hermitian")
        arrays = {k: np.ascontiguousarray(getattr(self, k), dtype=np.int64) for k in ("con", "blk", "row", "col")}
        val = np.ascontiguousarray(self.val, dtype=np.complex128)
        rhs = np.asarray(self.rhs, dtype=float).ravel()
        nnz = val.size
        if any(a.shape != (nnz,) for a in arrays.values()):
            raise DimensionError("sparse constraint arrays must share one length")
        m = rhs.size
        if nnz and (arrays["con"].min() < 0 or arrays["con"].max() >= m):
            raise DimensionError("constraint index out of range")
        if nnz and (arrays["blk"].min() < 0 or arrays["blk"].max() >= len(sizes)):
            raise DimensionError("block index out of range")
        bs = np.array(sizes)[arrays["blk"]] if nnz else np.zeros(0, dtype=np.int64)
        if nnz and (np.any(arrays["row"] >= bs) or np.any(arrays["col"] >= bs) or arrays["row"].min() < 0 or arrays["col"].min() < 0):
            raise DimensionError("constraint entry outside its block")
        dof = sum(n * n for n in sizes)
        if m > dof:
            raise DimensionError(f"{m} constraints exceed the {dof} real degrees of freedom")
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "objective", obj)
        for k, a in arrays.items():
            object.__setattr__(self, k, a)
        object.__setattr__(self, "val", val)
        object.__setattr__(self, "rhs", rhs)
        self._check_constraint_hermiticity()

    def _check_constraint_hermiticity(self):
        # each A_i must equal its conjugate transpose entry by entry
        n = max(self.block_sizes)
        nb = len(self.block_sizes)
        key = ((self.con * nb + self.blk) * n + self.row) * n + self.col
        mirror = ((self.con * nb + self.blk) * n + self.col) * n + self.row
        keys, inv = np.unique(np.concatenate([key, mirror]), return_inverse=True)
        nnz = key.size
        fwd = np.zeros(keys.size, dtype=np.complex128)
        np.add.at(fwd, inv[:nnz], self.val)
        bwd = np.zeros(keys.size, dtype=np.complex128)
        np.add.at(bwd, inv[nnz:], np.conj(self.val))
        bad = np.flatnonzero(np.abs(fwd - bwd) > HERMITIAN_TOL)
        if bad.size:
            k = int(keys[bad[0]])
            rest, c = divmod(k, n)
            rest, r = divmod(rest, n)
            i, b = divmod(rest, nb)
            raise NotHermitianError(f"constraint {i} is not Hermitian at block {b} entry ({r}, {c})")

    @property
    def n_constraints(self) -> int:
        return self.rhs.size

    @classmethod
    def from_dense(cls, block_sizes: Sequence[int], objective, constraints, rhs) -> "SdpProblem":
        """Build from dense data; ``constraints[i][b]`` is block ``b`` of ``A_i`` (or None)."""
        con, blk, row, col, val = [], [], [], [], []
        for i, blocks in enumerate(constraints):
            for b, a in enumerate(blocks):
                if a is None:
                    continue
                a = np.asarray(a, dtype=np.complex128)
                r, c = np.nonzero(a)
                con += [i] * r.size
                blk += [b] * r.size
                row += list(r)
                col += list(c)
                val += list(a[r, c])
        return cls(tuple(block_sizes), tuple(objective), np.array(con), np.array(blk), np.array(row), np.array(col),
                   np.array(val, dtype=np.complex128), np.asarray(rhs, dtype=float))

    def constraint_matrix(self, i: int) -> list[np.ndarray]:
        out = [np.zeros((n, n), dtype=np.complex128) for n in self.block_sizes]
        for e in np.flatnonzero(self.con == i):
            out[self.blk[e]][self.row[e], self.col[e]] += self.val[e]
        return out


@dataclass(frozen=True)
class SdpSolution:
    x: tuple[np.ndarray, ...]
    y: np.ndarray
    s: tuple[np.ndarray, ...]
    primal_value: float
    dual_value: float
    gap: float
    primal_residual: float
    dual_residual: float
    min_eigenvalue: float
    iterations: int

    @property
    def value(self) -> float:
        return 0.5 * (self.primal_value + self.dual_value)

    def certificate(self) -> dict:
        return {
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "duality_gap": self.gap,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "iterations": self.iterations,
        }


# --------------------------------------------------------------------------
# entrywise constraints ``sum_b X_b = target``


@lru_cache(maxsize=64)
def _entrywise_template(n: int) -> tuple[np.ndarray, ...]:
    """Sparse pattern of the n^2 real functionals Re X_ii, Re X_ij, Im X_ij (i < j)."""
    con, row, col, val = [], [], [], []
    k = 0
    for i in range(n):
        con.append(k), row.append(i), col.append(i), val.append(1.0)
        k += 1
    for i in range(n):
        for j in range(i + 1, n):
            # Re X_ij = <(E_ij + E_ji)/2, X>
            con += [k, k]
            row += [i, j]
            col += [j, i]
            val += [0.5, 0.5]
            k += 1
            # Im X_ij = <i(E_ij - E_ji)/2, X>
            con += [k, k]
            row += [i, j]
            col += [j, i]
            val += [0.5j, -0.5j]
            k += 1
    arrs = (np.array(con), np.array(row), np.array(col), np.array(val, dtype=np.complex128))
    for a in arrs:
        a.setflags(write=False)
    return arrs


def entrywise_rhs(target: np.ndarray) -> np.ndarray:
    n = target.shape[0]
    iu = np.triu_indices(n, 1)
    off = np.column_stack([target[iu].real, target[iu].imag]).ravel()
    return np.concatenate([np.diag(target).real, off])


def block_sum_problem(objective: Sequence[np.ndarray], target: np.ndarray | None = None) -> SdpProblem:
    """``max sum_c <O_c, X_c>  s.t.  sum_c X_c = target`` (identity by default), entrywise."""
    k = len(objective)
    n = objective[0].shape[0]
    target = np.eye(n) if target is None else np.asarray(target)
    con, row, col, val = _entrywise_template(n)
    nnz = con.size
    return SdpProblem(
        (n,) * k,
        tuple(objective),
        np.tile(con, k),
        np.repeat(np.arange(k), nnz),
        np.tile(row, k),
        np.tile(col, k),
        np.tile(val, k),
        entrywise_rhs(target),
    )


def direct_sum(problems: Sequence[SdpProblem]) -> tuple[SdpProblem, list[tuple[int, int]]]:
    """One SDP whose optimum is the sum of the optima of independent programs.

    Returns the combined problem and, per input, its ``(first block, first
    constraint)`` offsets for splitting the solution.
    """
    sizes, obj, parts, offsets = [], [], [], []
    nb = nc = 0
    for p in problems:
        offsets.append((nb, nc))
        sizes += p.block_sizes
        obj += p.objective
        parts.append((p.con + nc, p.blk + nb, p.row, p.col, p.val, p.rhs))
        nb += len(p.block_sizes)
        nc += p.n_constraints
    cat = [np.concatenate([q[k] for q in parts]) for k in range(6)]
    return SdpProblem(tuple(sizes), tuple(obj), *cat), offsets


def gram_problem(coeffs: np.ndarray) -> SdpProblem:
    """``max sum_{i<j} coeffs[i, j] G_ij  s.t.  G >= 0, G_ii = 1``."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[0]
    upper = np.triu(coeffs, 1)
    c = 0.5 * (upper + upper.T)
    idx = np.arange(n)
    return SdpProblem((n,), (c,), idx, np.zeros(n, dtype=np.int64), idx, idx, np.ones(n, dtype=np.complex128), np.ones(n))


# --------------------------------------------------------------------------
# solver


class _Layout:
    """Flat storage for block-diagonal matrices, grouped by block size."""

    def __init__(self, sizes: tuple[int, ...]):
        self.sizes = sizes
        self.offsets = np.cumsum([0] + [n * n for n in sizes])[:-1].astype(np.int64)
        self.total = int(sum(n * n for n in sizes))
        groups: dict[int, list[int]] = {}
        for b, n in enumerate(sizes):
            groups.setdefault(n, []).append(b)
        self.groups = [(n, np.array(bs)) for n, bs in groups.items()]
        # one size group stored contiguously: stacks are plain reshapes
        self.uniform = len(self.groups) == 1

    def stacks(self, flat: np.ndarray) -> list[np.ndarray]:
        """``(n_blocks, n, n)`` stacks, one per size group."""
        if self.uniform:
            n = self.sizes[0]
            return [flat.reshape(len(self.sizes), n, n)]
        out = []
        for n, bs in self.groups:
            out.append(np.array([flat[self.offsets[b]:self.offsets[b] + n * n].reshape(n, n) for b in bs]))
        return out

    def flatten(self, stacks: list[np.ndarray]) -> np.ndarray:
        if self.uniform:
            return np.ascontiguousarray(stacks[0], dtype=np.complex128).reshape(-1)
        flat = np.empty(self.total, dtype=np.complex128)
        for (n, bs), st in zip(self.groups, stacks):
            for j, b in enumerate(bs):
                flat[self.offsets[b]:self.offsets[b] + n * n] = st[j].ravel()
        return flat

    def blocks(self, flat: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(flat[o:o + n * n].reshape(n, n).copy() for o, n in zip(self.offsets, self.sizes))

    def identity(self, scale: np.ndarray | float = 1.0) -> np.ndarray:
        scale = np.broadcast_to(np.asarray(scale, dtype=float), (len(self.sizes),))
        return np.concatenate([(s * np.eye(n, dtype=np.complex128)).ravel() for s, n in zip(scale, self.sizes)])


class _Compiled:
    """Index arrays consumed by the kernels, entries sorted by block."""

    def __init__(self, p: SdpProblem):
        lay = _Layout(p.block_sizes)
        order = np.argsort(p.blk, kind="stable")
        blk, row, col = p.blk[order], p.row[order], p.col[order]
        n = np.array(p.block_sizes, dtype=np.int64)[blk]
        off = lay.offsets[blk]
        self.layout = lay
        self.m = p.n_constraints
        self.con = np.ascontiguousarray(p.con[order])
        self.row = np.ascontiguousarray(row)
        self.col = np.ascontiguousarray(col)
        self.val = np.ascontiguousarray(p.val[order])
        self.idx_rc = np.ascontiguousarray(off + row * n + col)
        self.idx_cr = np.ascontiguousarray(off + col * n + row)
        self.blk_ptr = np.searchsorted(blk, np.arange(len(p.block_sizes) + 1)).astype(np.int64)
        self.sizes = np.array(p.block_sizes, dtype=np.int64)
        self.c_flat = np.concatenate([c.ravel() for c in p.objective])
        self.shared = self._shared_pattern(p.block_sizes)

    def _shared_pattern(self, sizes):
        """Pattern of block 0 when every block carries identical constraints."""
        n = sizes[0]
        if len(sizes) < 2 or any(k != n for k in sizes) or n > SHARED_MAX_SIZE:
            return None
        ptr = self.blk_ptr
        first = slice(ptr[0], ptr[1])
        ref = (self.con[first], self.row[first], self.col[first], self.val[first])
        for b in range(1, len(sizes)):
            sl = slice(ptr[b], ptr[b + 1])
            cur = (self.con[sl], self.row[sl], self.col[sl], self.val[sl])
            if any(u.shape != v.shape or not np.array_equal(u, v) for u, v in zip(ref, cur)):
                return None
        # (row, col) order keeps the kernel's reads local in the n^2 x n^2 product
        order = np.lexsort((ref[2], ref[1]))
        return tuple(np.ascontiguousarray(a[order]) for a in ref)

    def schur(self, ops, w_st: list[np.ndarray], w_flat: np.ndarray) -> np.ndarray:
        if self.shared is not None:
            n = self.layout.sizes[0]
            wf = w_st[0].reshape(len(self.layout.sizes), n * n)
            kmat = np.ascontiguousarray(wf.T @ wf)
            con, row, col, val = self.shared
            return ops.schur_shared(kmat, n, con, row, col, val, self.m)
        lay = self.layout
        return ops.schur_complement(w_flat, self.blk_ptr, lay.offsets, self.sizes, self.con, self.row, self.col, self.val, self.m)


def _max_step(li: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha with ``X + alpha dX >= 0`` given ``L^{-1}`` for ``X = L L^H``."""
    m = li @ dx @ dagger(li)
    lam = np.linalg.eigvalsh(0.5 * (m + dagger(m))).min()
    return np.inf if lam >= 0 else -1.0 / lam


def sdp_solve(
    p: SdpProblem,
    *,
    max_iters: int = MAX_ITERS,
    tol: float = TARGET_TOL,
    backend: str | None = None,
) -> SdpSolution:
    """Solve ``p`` to high accuracy or raise.

    Raises
    ------
    SdpInfeasibleError
        If the iterates diverge.
    SdpConvergenceError
        If ``max_iters`` is reached and the gap / residual certificate
        (``GAP_TOL``, ``RESIDUAL_TOL``) is not met.
    """
    ops = _kernels.get_backend(backend)
    comp = p._compiled.get("c")
    if comp is None:
        comp = p._compiled["c"] = _Compiled(p)
    lay = comp.layout
    m, b = comp.m, p.rhs
    c_flat = comp.c_flat

    def A(flat):
        return ops.apply_constraints(flat, comp.con, comp.idx_cr, comp.val, m)

    def At(y):
        return ops.adjoint_constraints(np.ascontiguousarray(y, dtype=float), comp.con, comp.idx_rc, comp.val, lay.total)

    def inner(u, v):
        return float(np.vdot(u, v).real)

    # SDPT3-style starting point
    xi, eta = [], []
    for blk_i, n in enumerate(p.block_sizes):
        sel = comp.blk_ptr[blk_i], comp.blk_ptr[blk_i + 1]
        blk_norm = np.sqrt(np.bincount(comp.con[sel[0]:sel[1]], weights=np.abs(comp.val[sel[0]:sel[1]]) ** 2, minlength=m))
        ratio = (1 + np.abs(b)) / (1 + blk_norm) if m else np.zeros(1)
        xi.append(max(10.0, np.sqrt(n), n * float(np.max(ratio, initial=0.0))))
        eta.append(max(10.0, np.sqrt(n), float(np.max(blk_norm, initial=0.0)), float(np.linalg.norm(p.objective[blk_i]))))
    x = lay.identity(np.array(xi))
    s = lay.identity(np.array(eta))
    y = np.zeros(m)
    n_total = sum(p.block_sizes)
    b_norm = 1.0 + float(np.linalg.norm(b))
    c_norm = 1.0 + float(np.linalg.norm(c_flat))

    it = 0
    best, best_merit, since_best = None, np.inf, 0
    for it in range(1, max_iters + 1):
        rp = b - A(x)
        rd = c_flat + s - At(y)
        pobj, dobj = inner(c_flat, x), float(b @ y)
        mu = inner(x, s) / n_total
        pinf = float(np.linalg.norm(rp)) / b_norm
        dinf = float(np.linalg.norm(rd)) / c_norm
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        compl = inner(x, s) / (1.0 + abs(pobj) + abs(dobj))
        merit = max(relgap, compl, pinf, dinf)
        log.debug("it %d pobj %.10g dobj %.10g pinf %.1e dinf %.1e gap %.1e", it, pobj, dobj, pinf, dinf, relgap)
        if merit < best_merit:
            best_merit, best, since_best = merit, (x, y, s), 0
        else:
            since_best += 1
        if merit < tol:
            break
        if best_merit < STALL_MERIT and since_best >= STALL_ITERS:
            # near-degenerate optima: round-off in the Schur system now
            # outweighs progress, so stop and return the best iterate
            log.debug("no progress for %d iterations, stopping at %d", since_best, it)
            break
        if np.max(np.abs(x)) > DIVERGENCE or np.max(np.abs(y), initial=0.0) > DIVERGENCE:
            raise SdpInfeasibleError(f"iterates diverged after {it} iterations (primal or dual infeasible)")

        xs, ss = lay.stacks(x), lay.stacks(s)
        try:
            lx = [np.linalg.cholesky(g) for g in xs]
            ls = [np.linalg.cholesky(g) for g in ss]
        except np.linalg.LinAlgError:
            # round-off pushed an iterate off the cone; the previous one is the
            # best available and the final certificate decides whether it suffices
            log.debug("iterate left the cone at iteration %d", it)
            break
        # NT scaling W = G G^H, with G^{-1} X G^{-H} = G^H S G = diag(lam)
        g_st, gi_st, lam_st, w_st = [], [], [], []
        for lxg, lsg in zip(lx, ls):
            _, sv, vh = np.linalg.svd(dagger(lsg) @ lxg)
            root = np.sqrt(sv)
            g = lxg @ dagger(vh) / root[..., None, :]
            g_st.append(g)
            gi_st.append(root[..., :, None] * (vh @ np.linalg.inv(lxg)))
            lam_st.append(sv)
            w_st.append(g @ dagger(g))
        lxi = [np.linalg.inv(v) for v in lx]
        lsi = [np.linalg.inv(v) for v in ls]
        w_flat = lay.flatten(w_st)
        h = comp.schur(ops, w_st, w_flat)
        try:
            factor = cho_factor(h + 1e-14 * np.trace(h) / max(m, 1) * np.eye(m), lower=True, check_finite=False)
        except LinAlgError:
            log.debug("Schur complement lost definiteness at iteration %d", it)
            break

        rd_st = lay.stacks(rd)
        wrdw = lay.flatten([wg @ rg @ wg for wg, rg in zip(w_st, rd_st)])

        def direction(rc_flat):
            rhs = A(rc_flat + wrdw) - rp
            dy = cho_solve(factor, rhs, check_finite=False)
            ds = At(dy) - rd
            ds_st = lay.stacks(ds)
            dx_st = [rc - wg @ dg @ wg for rc, wg, dg in zip(lay.stacks(rc_flat), w_st, ds_st)]
            dx_st = [0.5 * (v + dagger(v)) for v in dx_st]
            ds_st = [0.5 * (v + dagger(v)) for v in ds_st]
            return lay.flatten(dx_st), dy, lay.flatten(ds_st), dx_st, ds_st

        def steps(dx_st, ds_st):
            ap = min(_max_step(li, d) for li, d in zip(lxi, dx_st))
            ad = min(_max_step(li, d) for li, d in zip(lsi, ds_st))
            return ap, ad

        # predictor: affine scaling direction
        dx, dy, ds, dx_st, ds_st = direction(-x)
        ap, ad = steps(dx_st, ds_st)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = inner(x + ap * dx, s + ad * ds) / n_total
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        # corrector: centring plus the second-order term, solved in the scaled
        # space where the complementarity equation is an elementwise Lyapunov one
        rc_st = []
        for g, gi, lam, dxa, dsa in zip(g_st, gi_st, lam_st, dx_st, ds_st):
            mm = (gi @ dxa @ dagger(gi)) @ (dagger(g) @ dsa @ g)
            rhs = -(mm + dagger(mm))
            diag = 2.0 * (sigma * mu - lam ** 2)
            idx = np.arange(lam.shape[-1])
            rhs[..., idx, idx] += diag
            rt = rhs / (lam[..., :, None] + lam[..., None, :])
            rc_st.append(g @ rt @ dagger(g))
        dx, dy, ds, dx_st, ds_st = direction(lay.flatten(rc_st))
        ap, ad = steps(dx_st, ds_st)
        ap, ad = min(1.0, STEP_FRACTION * ap), min(1.0, STEP_FRACTION * ad)
        x = x + ap * dx
        y = y + ad * dy
        s = s + ad * ds
    else:
        it = max_iters
    if best is None:
        raise SdpConvergenceError("starting point is not positive definite")
    x, y, s = best

    xb = tuple(0.5 * (v + dagger(v)) for v in lay.blocks(x))
    sb = tuple(0.5 * (v + dagger(v)) for v in lay.blocks(s))
    xflat = np.concatenate([v.ravel() for v in xb])
    pobj = inner(c_flat, xflat)
    dobj = float(b @ y)
    pres = float(np.max(np.abs(b - A(xflat)), initial=0.0))
    dres = float(np.max(np.abs(c_flat + np.concatenate([v.ravel() for v in sb]) - At(y)), initial=0.0))
    min_eig = min(float(np.linalg.eigvalsh(st).min()) for st in lay.stacks(xflat))
    gap = abs(pobj - dobj)
    sol = SdpSolution(xb, y, sb, pobj, dobj, gap, pres, dres, min_eig, it)
    # gap is judged relative to the objective scale, residuals relative to the data
    scale = 1.0 + max(abs(pobj), abs(dobj))
    if gap > GAP_TOL * scale or pres > RESIDUAL_TOL * (1.0 + float(np.max(np.abs(b), initial=0.0))) or min_eig < -PSD_TOL:
        raise SdpConvergenceError(
            f"no certified solution after {it} iterations: gap {gap:.2e}, residual {pres:.2e}, min eig {min_eig:.2e}"
        )
    return sol


# --------------------------------------------------------------------------
# see-saw sub-problems


def polish_povm(effects: np.ndarray) -> np.ndarray:
    """Map near-POVM effects (solver round-off) onto an exact POVM.

    Negative eigenvalues are clipped and the effects are renormalised by
    ``S^{-1/2} M_c S^{-1/2}`` with ``S = sum_c M_c``.
    """
    e = 0.5 * (effects + dagger(effects))
    w, v = np.linalg.eigh(e)
    e = (v * np.clip(w, 0.0, None)[:, None, :]) @ dagger(v)
    sw, sv = np.linalg.eigh(e.sum(axis=0))
    r = (sv / np.sqrt(sw)) @ dagger(sv)
    e = r @ e @ r
    return 0.5 * (e + dagger(e))


def _validated_ops(score_ops) -> list[np.ndarray]:
    ops = [hermitize(o) for o in score_ops]
    if len(ops) < 2:
        raise DimensionError("a POVM needs at least two outcomes")
    dim = ops[0].shape[0]
    if any(o.shape != (dim, dim) for o in ops):
        raise DimensionError("score operators differ in shape")
    return ops


def _binary_povm(ops: list[np.ndarray]) -> np.ndarray:
    w, v = np.linalg.eigh(ops[0] - ops[1])
    pos = v[:, w > 0]
    m0 = pos @ dagger(pos)
    return np.stack([m0, np.eye(ops[0].shape[0]) - m0])


def _achieved(ops, effects) -> float:
    return float(sum(np.vdot(o, m).real for o, m in zip(ops, effects)))


def povm_update(score_ops: Sequence[np.ndarray], *, backend: str | None = None) -> tuple[Povm, float]:
    """Best POVM ``{M_c}`` for ``max sum_c tr(O_c M_c)``.

    Two outcomes are solved exactly: ``M_0`` projects onto the positive part
    of ``O_0 - O_1``.  More outcomes go through :func:`sdp_solve`, and the
    solver output is polished onto an exact POVM.

    Returns
    -------
    povm : Povm
    value : float
        ``sum_c tr(O_c M_c)`` for the returned effects.
    """
    ops = _validated_ops(score_ops)
    if len(ops) == 2:
        effects = _binary_povm(ops)
    else:
        sol = sdp_solve(block_sum_problem(ops), backend=backend)
        effects = polish_povm(np.stack(sol.x))
    return Povm(effects), _achieved(ops, effects)


def povm_update_many(
    groups: Sequence[Sequence[np.ndarray]], *, backend: str | None = None, max_joint: int = 400
) -> list[tuple[Povm, float]]:
    """:func:`povm_update` for several independent measurements.

    Multi-outcome problems whose constraint counts add up to at most
    ``max_joint`` are solved as one direct-sum SDP, which saves per-iteration
    overhead when the blocks are small.
    """
    all_ops = [_validated_ops(g) for g in groups]
    effects: list[np.ndarray | None] = [None] * len(all_ops)
    pending = []
    for i, ops in enumerate(all_ops):
        if len(ops) == 2:
            effects[i] = _binary_povm(ops)
        else:
            pending.append(i)
    joint = sum(all_ops[i][0].shape[0] ** 2 for i in pending)
    if len(pending) > 1 and joint <= max_joint:
        probs = [block_sum_problem(all_ops[i]) for i in pending]
        big, offsets = direct_sum(probs)
        sol = sdp_solve(big, backend=backend)
        for i, p, (b0, _) in zip(pending, probs, offsets):
            effects[i] = polish_povm(np.stack(sol.x[b0:b0 + len(p.block_sizes)]))
    else:
        for i in pending:
            sol = sdp_solve(block_sum_problem(all_ops[i]), backend=backend)
            effects[i] = polish_povm(np.stack(sol.x))
    # polished and projective effects are POVMs by construction
    return [(Povm(e, check=False), _achieved(ops, e)) for ops, e in zip(all_ops, effects)]


def top_eigvec(op: np.ndarray) -> tuple[np.ndarray, float]:
    """Top eigenvector of a Hermitian matrix, phase fixed, and its eigenvalue."""
    w, v = eig_hermitian(op)
    return fix_phase(v[:, -1]), float(w[-1])


def state_update(op: np.ndarray) -> tuple[DensityMatrix, float]:
    """Pure state maximising ``tr(rho op)``: the top eigenvector, phase fixed.

    For a degenerate top eigenvalue the last eigenvector LAPACK returns is
    used, which is deterministic for identical input.
    """
    psi, top = top_eigvec(op)
    return DensityMatrix(ket_to_dm(psi), psi.size), top
