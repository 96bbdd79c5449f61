"""See-saw search over strategies that use no shared entanglement.

Each restart alternates exact block updates: the receiver's measurements
(one POVM per setting, :func:`povm_update`), then the first sender's pure
states, then (symmetric games) the second sender's.  Every block update is
optimal given the others, so the score never decreases; the best restart gives
a lower bound on the unassisted value of the game.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import PreconditionError, SolverError
from ..linalg import haar_ket, ket_to_dm
from ..protocols import GameSpec, score, simulate_unassisted
from ..qudit import DensityMatrix, Povm
from .sdp import povm_update_many, top_eigvec

log = logging.getLogger(__name__)

#: absolute slack allowed on per-round score decreases (round-off only)
ASCENT_SLACK = 1e-10
STRICT_TOL = 1e-7


@dataclass(frozen=True)
class SeesawConfig:
    restarts: int = 300
    tol: float = 1e-4
    max_iters: int = 500
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if int(self.restarts) < 1:
            raise PreconditionError("restarts must be at least 1")
        if not self.tol > 0:
            raise PreconditionError("tol must be positive")
        if int(self.max_iters) < 1:
            raise PreconditionError("max_iters must be at least 1")
        if int(self.workers) < 1:
            raise PreconditionError("workers must be at least 1")
        if int(self.seed) < 0:
            raise PreconditionError("seed must be non-negative")


@dataclass(frozen=True)
class RestartTrace:
    index: int
    score: float
    iterations: int
    converged: bool
    history: tuple[float, ...]


@dataclass(frozen=True)
class SeesawResult:
    best_score: float
    states_a: tuple[DensityMatrix, ...]
    states_b: tuple[DensityMatrix, ...] | None
    povms: tuple[Povm, ...]
    traces: tuple[RestartTrace, ...]
    best_index: int
    converged: bool

    def table(self):
        return simulate_unassisted(self.states_a, self.povms, self.states_b)


class _Scorer:
    """Contractions between strategy blocks and the win table of a game."""

    def __init__(self, game: GameSpec):
        self.game = game
        self.d = game.d
        self.k = game.n_outcomes
        self.nz = game.n_settings
        win = game.win
        # indicator[z, c, x(, y)] = 1 when outcome c wins
        outcomes = np.arange(self.k).reshape((1, self.k) + (1,) * (win.ndim - 1))
        self.indicator = (win[:, None] == outcomes).astype(float)
        n_inputs = np.prod(win.shape)
        self.norm = 1.0 / n_inputs

    def measurement_ops(self, a: np.ndarray, b: np.ndarray | None) -> np.ndarray:
        """``O[z, c] = sum over inputs winning with c of the prepared states``."""
        if b is None:
            return np.einsum("zcx,xij->zcij", self.indicator, a)
        d = self.d
        o = np.einsum("zcxy,xij,ykl->zcikjl", self.indicator, a, b, optimize=True)
        return o.reshape(self.nz, self.k, d * d, d * d)

    def alice_ops(self, effects: np.ndarray, b: np.ndarray | None) -> np.ndarray:
        """``E[x] = sum_{z,(y)} tr_B[(I ⊗ beta_y) M_{w|z}]``."""
        if b is None:
            return np.einsum("zcx,zcij->xij", self.indicator, effects)
        d = self.d
        m = effects.reshape(self.nz, self.k, d, d, d, d)
        q = np.einsum("ylk,zcikjl->zcyij", b, m, optimize=True)
        return np.einsum("zcxy,zcyij->xij", self.indicator, q, optimize=True)

    def bob_ops(self, effects: np.ndarray, a: np.ndarray) -> np.ndarray:
        d = self.d
        m = effects.reshape(self.nz, self.k, d, d, d, d)
        q = np.einsum("xji,zcikjl->zcxkl", a, m, optimize=True)
        return np.einsum("zcxy,zcxkl->ykl", self.indicator, q, optimize=True)

    def value(self, a: np.ndarray, b: np.ndarray | None, effects: np.ndarray) -> float:
        e = self.alice_ops(effects, b)
        return self.norm * float(np.einsum("xij,xji->", a, e).real)


def _update_states(ops: np.ndarray, old: np.ndarray) -> np.ndarray:
    new = np.empty_like(old)
    for x, op in enumerate(ops):
        psi, top = top_eigvec(op)
        # the top eigenvector never scores lower; keep the old state on exact ties
        if top > np.vdot(old[x], op).real:
            new[x] = ket_to_dm(psi)
        else:
            new[x] = old[x]
    return new


def _update_measurements(sc: _Scorer, a, b, effects: np.ndarray | None) -> np.ndarray:
    ops = sc.measurement_ops(a, b)
    out = []
    for z, (povm, val) in enumerate(povm_update_many([list(o) for o in ops])):
        if effects is not None:
            # guard against solver round-off making a round go downhill
            old = float(sum(np.vdot(o, m).real for o, m in zip(ops[z], effects[z])))
            if val < old:
                out.append(effects[z])
                continue
        out.append(povm.effects)
    return np.stack(out)


def _initial_states(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return np.stack([ket_to_dm(haar_ket(dim, rng)) for _ in range(n)])


def run_restart(game: GameSpec, cfg: SeesawConfig, index: int):
    """One restart from Haar-random pure states; returns (trace, a, b, effects)."""
    rng = np.random.default_rng([int(cfg.seed), int(index)])
    sc = _Scorer(game)
    d = game.d
    a = _initial_states(rng, game.n_x, d)
    b = _initial_states(rng, game.n_y, d) if game.scenario == "symmetric" else None
    effects = None
    history = []
    prev = -np.inf
    converged = False
    it = 0
    for it in range(1, int(cfg.max_iters) + 1):
        try:
            effects = _update_measurements(sc, a, b, effects)
        except SolverError as exc:
            raise type(exc)(f"restart {index}, round {it}: {exc}") from exc
        a = _update_states(sc.alice_ops(effects, b), a)
        if b is not None:
            b = _update_states(sc.bob_ops(effects, a), b)
        val = sc.value(a, b, effects)
        history.append(val)
        if val < prev - ASCENT_SLACK:
            log.warning("restart %d: score decreased by %.3e in round %d", index, prev - val, it)
        if abs(val - prev) < cfg.tol:
            converged = True
            break
        prev = val
    trace = RestartTrace(index, history[-1], it, converged, tuple(history))
    return trace, a, b, effects


def _run_chunk(args):
    game, cfg, indices = args
    return [run_restart(game, cfg, i) for i in indices]


def seesaw(game: GameSpec, cfg: SeesawConfig = SeesawConfig()) -> SeesawResult:
    """Best unassisted strategy found over ``cfg.restarts`` seeded restarts.

    Restart ``i`` draws from ``default_rng([seed, i])`` only, so the result does
    not depend on ``cfg.workers``.  Ties in score go to the lowest index.
    """
    indices = list(range(int(cfg.restarts)))
    if cfg.workers > 1:
        chunks = [indices[w::cfg.workers] for w in range(cfg.workers)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, [(game, cfg, c) for c in chunks]))
        runs = sorted((r for part in parts for r in part), key=lambda r: r[0].index)
    else:
        runs = [run_restart(game, cfg, i) for i in indices]

    best = max(runs, key=lambda r: (r[0].score, -r[0].index))
    trace, a, b, effects = best
    states_a = tuple(DensityMatrix(m, game.d) for m in a)
    states_b = tuple(DensityMatrix(m, game.d) for m in b) if b is not None else None
    povms = tuple(Povm(e) for e in effects)
    # report the independently recomputed score of the returned strategy
    value = score(game, simulate_unassisted(states_a, povms, states_b))
    log.info("seesaw d=%d %s: best %.8f at restart %d", game.d, game.scenario, value, trace.index)
    return SeesawResult(
        best_score=value,
        states_a=states_a,
        states_b=states_b,
        povms=povms,
        traces=tuple(r[0] for r in runs),
        best_index=trace.index,
        converged=trace.converged,
    )
