import importlib

import numpy as np
import pytest

from eapmcert import bounds, linalg
from eapmcert.errors import PreconditionError, SdpConvergenceError
from eapmcert.optimize import SeesawConfig, seesaw
from eapmcert.optimize.seesaw import ASCENT_SLACK, run_restart
from eapmcert.protocols import make_game, score, simulate_unassisted

seesaw_mod = importlib.import_module("eapmcert.optimize.seesaw")

VALIDITY_TOL = 1e-9
BOUND_SLACK = 1e-6


@pytest.fixture(scope="module")
def eapm2():
    return seesaw(make_game(2, "eapm"), SeesawConfig(restarts=4, seed=3))


@pytest.fixture(scope="module")
def sym2():
    return seesaw(make_game(2, "symmetric"), SeesawConfig(restarts=4, seed=3))


def test_config_validation():
    for bad in ({"restarts": 0}, {"tol": 0.0}, {"max_iters": 0}, {"workers": 0}, {"seed": -1}):
        with pytest.raises(PreconditionError):
            SeesawConfig(**bad)


def test_qubit_eapm_reaches_but_never_exceeds_l2(eapm2):
    l2 = bounds.l_d(2).value
    assert eapm2.best_score <= l2 + BOUND_SLACK
    assert eapm2.best_score == pytest.approx(l2, abs=1e-3)


def test_qubit_symmetric_reaches_but_never_exceeds_two_thirds(sym2):
    assert sym2.best_score <= 2 / 3 + BOUND_SLACK
    assert sym2.best_score == pytest.approx(2 / 3, abs=1e-3)


@pytest.mark.parametrize("fixture", ["eapm2", "sym2"])
def test_reported_strategy_is_valid(fixture, request):
    res = request.getfixturevalue(fixture)
    for s in res.states_a + (res.states_b or ()):
        assert np.trace(s.mat).real == pytest.approx(1.0, abs=1e-12)
        assert linalg.is_psd(s.mat)
    for p in res.povms:
        assert np.max(np.abs(p.effects.sum(axis=0) - np.eye(p.d_total))) <= VALIDITY_TOL
        assert all(linalg.min_eigenvalue(e) >= -VALIDITY_TOL for e in p.effects)
    # the claim agrees with the optimiser's own last score and with a fresh simulation
    best = res.traces[res.best_index]
    assert abs(best.score - res.best_score) <= VALIDITY_TOL
    game = make_game(2, "eapm" if fixture == "eapm2" else "symmetric")
    assert abs(score(game, simulate_unassisted(res.states_a, res.povms, res.states_b)) - res.best_score) <= VALIDITY_TOL
    assert abs(score(game, res.table()) - res.best_score) <= VALIDITY_TOL


@pytest.mark.parametrize("d,scenario", [(2, "eapm"), (2, "symmetric"), (3, "eapm")])
def test_scores_never_decrease(d, scenario):
    cfg = SeesawConfig(restarts=1, tol=1e-7, seed=11)
    for idx in range(2):
        trace, *_ = run_restart(make_game(d, scenario), cfg, idx)
        h = np.array(trace.history)
        assert np.all(np.diff(h) >= -ASCENT_SLACK)


def test_best_restart_is_the_maximum(eapm2):
    scores = [t.score for t in eapm2.traces]
    assert [t.index for t in eapm2.traces] == list(range(4))
    assert eapm2.best_index == int(np.argmax(scores))


def test_same_seed_same_result():
    game = make_game(3, "eapm")
    cfg = SeesawConfig(restarts=2, seed=5)
    a, b = seesaw(game, cfg), seesaw(game, cfg)
    assert a.best_score == b.best_score
    assert [t.history for t in a.traces] == [t.history for t in b.traces]
    for pa, pb in zip(a.povms, b.povms):
        assert np.array_equal(pa.effects, pb.effects)


def test_result_does_not_depend_on_worker_count():
    game = make_game(2, "symmetric")
    one = seesaw(game, SeesawConfig(restarts=3, seed=9, workers=1))
    two = seesaw(game, SeesawConfig(restarts=3, seed=9, workers=2))
    assert one.best_score == two.best_score
    assert [t.history for t in one.traces] == [t.history for t in two.traces]
    for sa, sb in zip(one.states_a, two.states_a):
        assert np.array_equal(sa.mat, sb.mat)


def test_different_seeds_start_differently():
    game = make_game(3, "eapm")
    a, *_ = run_restart(game, SeesawConfig(seed=1, max_iters=1), 0)
    b, *_ = run_restart(game, SeesawConfig(seed=2, max_iters=1), 0)
    assert a.history != b.history


def test_iteration_cap_marks_restart_unconverged():
    trace, *_ = run_restart(make_game(3, "eapm"), SeesawConfig(max_iters=1, tol=1e-12), 0)
    assert trace.iterations == 1 and not trace.converged


def test_solver_failure_names_the_restart(monkeypatch):
    def boom(*args, **kwargs):
        raise SdpConvergenceError("no progress")

    monkeypatch.setattr(seesaw_mod, "povm_update_many", boom)
    with pytest.raises(SdpConvergenceError, match="restart 0"):
        run_restart(make_game(3, "eapm"), SeesawConfig(), 0)
