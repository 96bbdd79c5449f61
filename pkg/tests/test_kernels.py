"""Compiled and numpy kernels against dense linear algebra."""

import numpy as np
import pytest

from eapmcert import _kernels, linalg
from eapmcert.optimize.sdp import SdpProblem, _Compiled, block_sum_problem, gram_problem


def random_problem(rng, sizes, m):
    """Random Hermitian constraints, dense in each block."""
    cons = []
    for _ in range(m):
        cons.append([linalg.random_hermitian(n, rng) if rng.random() < 0.8 else None for n in sizes])
    obj = [linalg.random_hermitian(n, rng) for n in sizes]
    return SdpProblem.from_dense(sizes, obj, cons, rng.standard_normal(m))


def dense_apply(p, blocks):
    return np.array([sum(np.trace(a @ x).real for a, x in zip(p.constraint_matrix(i), blocks)) for i in range(p.n_constraints)])


def dense_schur(p, w):
    mats = [p.constraint_matrix(i) for i in range(p.n_constraints)]
    m = len(mats)
    h = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            h[i, j] = sum(np.trace(ai @ wb @ aj @ wb).real for ai, aj, wb in zip(mats[i], mats[j], w))
    return h


def random_pd(n, rng):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return g @ g.conj().T + np.eye(n)


PROBLEMS = {
    "mixed": lambda rng: random_problem(rng, (3, 2, 4), 7),
    "gram": lambda rng: gram_problem(rng.standard_normal((5, 5))),
    "block_sum": lambda rng: block_sum_problem([linalg.random_hermitian(3, rng) for _ in range(4)]),
}


@pytest.mark.parametrize("kind", sorted(PROBLEMS))
def test_constraint_maps_match_dense(kind, backend, rng):
    p = PROBLEMS[kind](rng)
    ops = _kernels.get_backend(backend)
    comp = _Compiled(p)
    lay = comp.layout
    x = [random_pd(n, rng) for n in p.block_sizes]
    flat = np.concatenate([b.ravel() for b in x])
    out = ops.apply_constraints(flat, comp.con, comp.idx_cr, comp.val, comp.m)
    assert np.allclose(out, dense_apply(p, x), atol=1e-12)
    # adjoint: <A^T y, X> = <y, A X>
    y = rng.standard_normal(comp.m)
    aty = lay.blocks(ops.adjoint_constraints(y, comp.con, comp.idx_rc, comp.val, lay.total))
    expect = [sum(y[i] * p.constraint_matrix(i)[b] for i in range(comp.m)) for b in range(len(p.block_sizes))]
    for got, want in zip(aty, expect):
        assert np.allclose(got, want, atol=1e-12)


@pytest.mark.parametrize("kind", sorted(PROBLEMS))
def test_schur_complement_matches_dense(kind, backend, rng):
    p = PROBLEMS[kind](rng)
    ops = _kernels.get_backend(backend)
    comp = _Compiled(p)
    w = [random_pd(n, rng) for n in p.block_sizes]
    flat = np.concatenate([b.ravel() for b in w])
    stacks = comp.layout.stacks(flat)
    h = comp.schur(ops, stacks, flat)
    want = dense_schur(p, w)
    assert np.allclose(h, want, rtol=1e-12, atol=1e-10 * np.abs(want).max())
    assert np.allclose(h, h.T, atol=1e-10 * np.abs(want).max())


def test_shared_path_is_taken_for_block_sum_problems(rng):
    assert _Compiled(PROBLEMS["block_sum"](rng)).shared is not None
    assert _Compiled(PROBLEMS["mixed"](rng)).shared is None


def test_generic_and_shared_schur_agree(backend, rng):
    p = PROBLEMS["block_sum"](rng)
    ops = _kernels.get_backend(backend)
    comp = _Compiled(p)
    w = [random_pd(3, rng) for _ in range(4)]
    flat = np.concatenate([b.ravel() for b in w])
    generic = ops.schur_complement(flat, comp.blk_ptr, comp.layout.offsets, comp.sizes, comp.con, comp.row,
                                   comp.col, comp.val, comp.m)
    assert np.allclose(comp.schur(ops, comp.layout.stacks(flat), flat), generic, atol=1e-10)


def test_backends_agree(rng):
    if len(_kernels.available_backends()) < 2:
        pytest.skip("compiled kernels not built")
    p = block_sum_problem([linalg.random_hermitian(6, rng) for _ in range(5)])
    comp = _Compiled(p)
    w = [random_pd(6, rng) for _ in range(5)]
    flat = np.concatenate([b.ravel() for b in w])
    st = comp.layout.stacks(flat)
    a = comp.schur(_kernels.get_backend("python"), st, flat)
    b = comp.schur(_kernels.get_backend("cython"), st, flat)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(a).max())


def test_unknown_backend():
    with pytest.raises(ImportError):
        _kernels.get_backend("fortran")
    assert "python" in _kernels.available_backends()
    assert _kernels.get_backend() is _kernels.ops


def test_benchmark_script_runs():
    import importlib.util
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    backends, rows = bench.run(1, {"tiny": (2, 3)})
    assert backends == _kernels.available_backends()
    assert {r["kernel"] for r in rows} == {"schur/shared", "schur/generic", "solve"}
    assert all(r[f"{b}_s"] > 0 for r in rows for b in backends)
