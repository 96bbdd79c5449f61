import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eapmcert import linalg
from eapmcert.errors import (
    DimensionError,
    NotHermitianError,
    SdpConvergenceError,
    SdpInfeasibleError,
)
from eapmcert.optimize import (
    SdpProblem,
    block_sum_problem,
    direct_sum,
    gram_problem,
    polish_povm,
    povm_update,
    povm_update_many,
    sdp_solve,
    state_update,
)
from eapmcert.optimize.sdp import GAP_TOL, PSD_TOL, RESIDUAL_TOL

seeds = st.integers(0, 2**32 - 1)


def unit(i, j, n=2):
    a = np.zeros((n, n))
    a[i, j] = 1
    return a


def trace_one(c):
    n = c.shape[0]
    return SdpProblem.from_dense([n], [c], [[np.eye(n)]], [1.0])


def check_certificate(sol, p):
    scale = 1 + max(abs(sol.primal_value), abs(sol.dual_value))
    assert sol.gap <= GAP_TOL * scale
    assert sol.primal_residual <= RESIDUAL_TOL * (1 + np.abs(p.rhs).max())
    assert sol.min_eigenvalue >= -PSD_TOL
    for x in sol.x:
        assert linalg.hermitian_deviation(x) <= 1e-12


def random_effect_ops(rng, k, n):
    return [linalg.random_hermitian(n, rng) for _ in range(k)]


# --------------------------------------------------------------------------
# generic solver


def test_eigenvalue_problem(backend):
    sol = sdp_solve(trace_one(np.diag([1.0, 0.0])), backend=backend)
    assert sol.value == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(sol.x[0], np.diag([1, 0]), atol=1e-6)


def test_off_diagonal_objective(backend):
    sol = sdp_solve(trace_one(np.array([[0.0, 1.0], [1.0, 0.0]])), backend=backend)
    assert sol.value == pytest.approx(1.0, abs=1e-8)


def test_r2_gram_problem(backend):
    c = 4 * np.eye(4) - np.ones((4, 4))
    p = gram_problem(c)
    sol = sdp_solve(p, backend=backend)
    assert sol.value == pytest.approx(2.0, abs=1e-6)
    check_certificate(sol, p)
    # optimum is the symmetric point u = -1/3
    g = sol.x[0].real
    assert np.allclose(g[~np.eye(4, dtype=bool)], -1 / 3, atol=1e-4)


@given(seeds, st.integers(1, 6))
def test_trace_one_problems_give_top_eigenvalue(seed, n):
    rng = np.random.default_rng(seed)
    c = linalg.random_hermitian(n, rng)
    p = trace_one(c)
    sol = sdp_solve(p)
    assert sol.value == pytest.approx(np.linalg.eigvalsh(c)[-1], abs=1e-7)
    check_certificate(sol, p)


def test_multi_block_problem_matches_cvxpy(rng):
    cp = pytest.importorskip("cvxpy")
    sizes = (3, 2)
    obj = [linalg.random_hermitian(n, rng) for n in sizes]
    a1 = [np.eye(3), np.eye(2)]
    a2 = [linalg.random_hermitian(3, rng), None]
    p = SdpProblem.from_dense(sizes, obj, [a1, a2], [2.0, 0.1])
    sol = sdp_solve(p)
    check_certificate(sol, p)
    x = [cp.Variable((n, n), hermitian=True) for n in sizes]
    cons = [x[0] >> 0, x[1] >> 0,
            cp.real(cp.trace(x[0]) + cp.trace(x[1])) == 2.0,
            cp.real(cp.trace(a2[0] @ x[0])) == 0.1]
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(obj[0] @ x[0]) + cp.trace(obj[1] @ x[1]))), cons)
    prob.solve(solver="CLARABEL")
    assert sol.value == pytest.approx(prob.value, abs=1e-6)


def test_divergence_is_reported_as_infeasible():
    unbounded = SdpProblem.from_dense([2], [np.eye(2)], [[unit(0, 0)]], [1.0])
    with pytest.raises(SdpInfeasibleError):
        sdp_solve(unbounded)
    infeasible = SdpProblem.from_dense([2], [np.eye(2)], [[unit(0, 0)]], [-1.0])
    with pytest.raises(SdpInfeasibleError):
        sdp_solve(infeasible)


def test_iteration_cap_raises():
    with pytest.raises(SdpConvergenceError):
        sdp_solve(trace_one(np.diag([1.0, 0.0])), max_iters=2)


def test_problem_validation():
    with pytest.raises(NotHermitianError):
        SdpProblem.from_dense([2], [np.eye(2)], [[unit(0, 1)]], [1.0])
    with pytest.raises(NotHermitianError):
        SdpProblem.from_dense([2], [unit(0, 1)], [[np.eye(2)]], [1.0])
    with pytest.raises(DimensionError):
        SdpProblem.from_dense([2], [np.eye(3)], [[np.eye(2)]], [1.0])
    with pytest.raises(DimensionError):
        SdpProblem((1,), (np.eye(1),), [0], [0], [0], [0], [1.0], [1.0, 2.0])
    with pytest.raises(DimensionError):
        SdpProblem((2,), (np.eye(2),), [0], [0], [2], [0], [1.0], [1.0])
    with pytest.raises(DimensionError):
        SdpProblem((2,), (np.eye(2),), [1], [0], [0], [0], [1.0], [1.0])


def test_constraint_matrix_roundtrip(rng):
    a = linalg.random_hermitian(3, rng)
    p = SdpProblem.from_dense([3], [np.eye(3)], [[a]], [1.0])
    assert np.allclose(p.constraint_matrix(0)[0], a)


def test_solution_certificate_keys():
    sol = sdp_solve(trace_one(np.diag([2.0, 1.0])))
    cert = sol.certificate()
    assert set(cert) == {"primal_value", "dual_value", "duality_gap", "primal_residual", "dual_residual", "iterations"}
    assert cert["primal_value"] == pytest.approx(2.0, abs=1e-8)


def test_backends_give_same_solution(rng):
    from eapmcert import _kernels

    if len(_kernels.available_backends()) < 2:
        pytest.skip("compiled kernels not built")
    p = block_sum_problem(random_effect_ops(rng, 3, 4))
    a = sdp_solve(p, backend="python")
    b = sdp_solve(p, backend="cython")
    assert a.value == pytest.approx(b.value, abs=1e-9)


# --------------------------------------------------------------------------
# direct sums


def test_direct_sum_equals_separate_solves(rng):
    probs = [block_sum_problem(random_effect_ops(rng, 3, n)) for n in (2, 3, 3)]
    big, offsets = direct_sum(probs)
    assert big.n_constraints == sum(p.n_constraints for p in probs)
    assert [o[0] for o in offsets] == [0, 3, 6]
    joint = sdp_solve(big)
    assert joint.value == pytest.approx(sum(sdp_solve(p).value for p in probs), abs=1e-7)


def test_block_sum_problem_with_target(rng):
    ops = random_effect_ops(rng, 2, 3)
    target = 2 * np.eye(3)
    sol = sdp_solve(block_sum_problem(ops, target))
    assert np.allclose(sum(sol.x), target, atol=1e-8)


# --------------------------------------------------------------------------
# POVM sub-problem


def test_povm_update_commuting_case():
    povm, value = povm_update([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    assert value == pytest.approx(2.0)
    assert np.allclose(povm.effects[0], np.diag([1, 0]))
    assert np.allclose(povm.effects[1], np.diag([0, 1]))


def test_povm_update_binary_projects_on_positive_part():
    povm, value = povm_update([np.diag([1.0, -1.0]), np.zeros((2, 2))])
    assert np.allclose(povm.effects[0], np.diag([1, 0]))
    assert value == pytest.approx(1.0)


def test_povm_update_rejects_bad_input():
    with pytest.raises(DimensionError):
        povm_update([np.eye(2)])
    with pytest.raises(DimensionError):
        povm_update([np.eye(2), np.eye(3)])
    with pytest.raises(NotHermitianError):
        povm_update([unit(0, 1), np.eye(2)])


def random_projective_value(ops, rng, samples):
    """Best value over random projective measurements with random outcome labels."""
    n, k = ops[0].shape[0], len(ops)
    best = -np.inf
    for _ in range(samples):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        q, _ = np.linalg.qr(g)
        labels = rng.integers(0, k, size=n)
        # given the basis, assign each vector to its best outcome
        vals = np.array([[np.vdot(q[:, j], o @ q[:, j]).real for j in range(n)] for o in ops])
        best = max(best, vals.max(axis=0).sum(), sum(vals[labels[j], j] for j in range(n)))
    return best


@pytest.mark.parametrize("k,n", [(3, 2), (3, 3), (4, 3)])
def test_povm_update_beats_random_projective_search(k, n, rng):
    ops = random_effect_ops(rng, k, n)
    povm, value = povm_update(ops)
    assert value >= random_projective_value(ops, rng, 1000) - 1e-9
    assert np.allclose(povm.effects.sum(axis=0), np.eye(n), atol=1e-10)
    assert all(linalg.is_psd(e) for e in povm.effects)


def test_povm_update_matches_cvxpy(rng):
    cp = pytest.importorskip("cvxpy")
    ops = random_effect_ops(rng, 3, 3)
    _, value = povm_update(ops)
    m = [cp.Variable((3, 3), hermitian=True) for _ in ops]
    cons = [x >> 0 for x in m] + [sum(m) == np.eye(3)]
    prob = cp.Problem(cp.Maximize(cp.real(sum(cp.trace(o @ x) for o, x in zip(ops, m)))), cons)
    prob.solve(solver="CLARABEL")
    assert value == pytest.approx(prob.value, abs=1e-6)


@given(seeds, st.integers(3, 4), st.integers(2, 4))
def test_povm_update_returns_valid_povm(seed, k, n):
    rng = np.random.default_rng(seed)
    ops = random_effect_ops(rng, k, n)
    povm, value = povm_update(ops)
    assert np.max(np.abs(povm.effects.sum(axis=0) - np.eye(n))) <= 1e-10
    assert min(linalg.min_eigenvalue(e) for e in povm.effects) >= -1e-12
    assert value == pytest.approx(sum(np.trace(o @ e).real for o, e in zip(ops, povm.effects)), abs=1e-12)
    # no outcome can beat the best single outcome assigned everywhere
    assert value >= max(np.trace(o).real for o in ops) - 1e-9


def test_povm_update_many_matches_individual_solves(rng):
    groups = [random_effect_ops(rng, 3, 3) for _ in range(3)] + [random_effect_ops(rng, 2, 3)]
    batched = povm_update_many(groups)
    single = [povm_update(g) for g in groups]
    for (_, a), (_, b) in zip(batched, single):
        assert a == pytest.approx(b, abs=1e-7)
    # forcing separate solves gives the same values
    separate = povm_update_many(groups, max_joint=0)
    for (_, a), (_, b) in zip(batched, separate):
        assert a == pytest.approx(b, abs=1e-7)


def test_polish_povm_repairs_round_off(rng):
    eff = np.array([np.diag([0.5, 0.5]), np.diag([0.5, 0.5])]) + 1e-9 * rng.standard_normal((2, 2, 2))
    eff[0, 0, 0] -= 0.5 + 1e-9  # slightly negative entry
    eff[1, 0, 0] += 0.5
    out = polish_povm(eff)
    assert np.allclose(out.sum(axis=0), np.eye(2), atol=1e-14)
    assert min(np.linalg.eigvalsh(e).min() for e in out) >= -1e-15


# --------------------------------------------------------------------------
# state sub-problem


def test_state_update_examples():
    rho, value = state_update(np.diag([0.2, 0.9]))
    assert value == pytest.approx(0.9)
    assert np.allclose(rho.mat, np.diag([0, 1]))
    rho, value = state_update(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert value == pytest.approx(1.0)
    assert np.allclose(rho.mat, 0.5 * np.ones((2, 2)))


def test_state_update_degenerate_top_is_deterministic():
    op = np.diag([1.0, 1.0, 0.0])
    (a, va), (b, vb) = state_update(op), state_update(op)
    assert np.array_equal(a.mat, b.mat)
    assert va == vb == pytest.approx(1.0)
    assert np.trace(a.mat @ op).real == pytest.approx(1.0)


@given(seeds, st.integers(1, 6))
def test_state_update_attains_top_eigenvalue(seed, n):
    op = linalg.random_hermitian(n, np.random.default_rng(seed))
    rho, value = state_update(op)
    assert value == pytest.approx(np.linalg.eigvalsh(op)[-1], abs=1e-12)
    assert np.trace(rho.mat @ op).real == pytest.approx(value, abs=1e-10)
