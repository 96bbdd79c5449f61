"""Games, correlation tables and the strategies that produce them.

Two scenarios are supported.  In ``"eapm"`` a single sender encodes
``x = (x0, x1)`` into one share of a bipartite state and the receiver measures
the message together with the share it kept.  In ``"symmetric"`` both shares
are encoded, by inputs ``x`` and ``y``, before the receiver measures the two
messages jointly.  Every game asks the receiver to output ``w_z`` for its
setting ``z in {0, ..., d}``.

Table layouts (``probs``):

* eapm:      ``probs[x, z, c]   = p(c | x, z)``
* symmetric: ``probs[x, y, z, c] = p(c | x, y, z)``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from . import linalg, qudit
from .errors import DimensionError, EapmError, PreconditionError
from .qudit import DensityMatrix, KrausChannel, Povm

Scenario = Literal["eapm", "symmetric"]

#: tolerance for negative probabilities
NONNEG_TOL = 1e-10
#: tolerance for per-input normalisation
NORM_TOL = 1e-9
#: tolerance for the x-independence of the retained marginal
MARGINAL_TOL = 1e-10

_ALIASES = {"eapm": "eapm", "symmetric": "symmetric", "sym": "symmetric"}


def normalize_scenario(scenario: str) -> Scenario:
    try:
        return _ALIASES[scenario]  # type: ignore[return-value]
    except KeyError:
        raise PreconditionError(f"unknown scenario {scenario!r}") from None


@dataclass(frozen=True)
class GameSpec:
    """A prime-dimensional game with its win table materialised.

    ``win[z, x]`` (eapm) or ``win[z, x, y]`` (symmetric) holds the outcome the
    receiver must produce.  Inputs are flattened as ``x0 * d + x1``.
    """

    d: int
    scenario: Scenario
    win: np.ndarray = field(repr=False)

    @property
    def n_settings(self) -> int:
        return self.win.shape[0]

    @property
    def n_x(self) -> int:
        return self.win.shape[1]

    @property
    def n_y(self) -> int | None:
        return self.win.shape[2] if self.scenario == "symmetric" else None

    @property
    def n_outcomes(self) -> int:
        return self.d

    def w(self, z: int, x: tuple[int, int], y: tuple[int, int] | None = None) -> int:
        xi = x[0] * self.d + x[1]
        if self.scenario == "eapm":
            return int(self.win[z, xi])
        if y is None:
            raise PreconditionError("symmetric games need both x and y")
        return int(self.win[z, xi, y[0] * self.d + y[1]])

    def is_balanced(self) -> bool:
        """Every outcome is hit equally often by ``x`` for each ``z`` (and ``y``)."""
        k = self.n_outcomes
        if self.scenario == "eapm":
            counts = [np.bincount(self.win[z], minlength=k) for z in range(self.n_settings)]
        else:
            counts = [np.bincount(self.win[z, :, y], minlength=k) for z in range(self.n_settings) for y in range(self.n_y)]
        return all(np.all(c == c[0]) for c in counts)


def _eapm_win(d: int) -> np.ndarray:
    x0, x1 = np.divmod(np.arange(d * d), d)
    if d == 2:
        # X⊗X reveals x1, Z⊗Z reveals x0, XZ⊗XZ reveals their parity
        return np.array([x1, x0, (x0 + x1) % 2])
    rows = [(x1 - 2 * z * x0) % d for z in range(d)]
    rows.append(x0 % d)
    return np.array(rows)


def _symmetric_win(d: int) -> np.ndarray:
    x0, x1 = np.divmod(np.arange(d * d), d)
    X0, Y0 = np.meshgrid(x0, x0, indexing="ij")
    X1, Y1 = np.meshgrid(x1, x1, indexing="ij")
    if d == 2:
        return np.array([(X0 + Y0) % 2, (X1 + Y1) % 2, (X0 + X1 + Y0 + Y1) % 2])
    rows = [(X1 + Y1 - 2 * z * (X0 - Y0)) % d for z in range(d)]
    rows.append((X0 - Y0) % d)
    return np.array(rows)


def make_game(d: int, scenario: str = "eapm") -> GameSpec:
    qudit.require_prime(d)
    sc = normalize_scenario(scenario)
    win = _eapm_win(d) if sc == "eapm" else _symmetric_win(d)
    win = win.astype(np.int64)
    win.setflags(write=False)
    return GameSpec(d, sc, win)


@dataclass(frozen=True)
class CorrelationTable:
    scenario: Scenario
    probs: np.ndarray
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        want = 3 if self.scenario == "eapm" else 4
        if p.ndim != want:
            raise DimensionError(f"{self.scenario} table needs {want} axes, got shape {p.shape}")
        if self.check:
            if p.min() < -NONNEG_TOL:
                raise PreconditionError(f"negative probability {p.min():.3e}")
            dev = np.max(np.abs(p.sum(axis=-1) - 1.0))
            if dev > NORM_TOL:
                raise PreconditionError(f"table rows normalised only within {dev:.3e}")
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, game: GameSpec) -> "CorrelationTable":
        shape = game.win.shape[1:] + (game.n_settings, game.n_outcomes)
        return cls(game.scenario, np.full(shape, 1.0 / game.n_outcomes))


@dataclass(frozen=True)
class LhsModel:
    """Local-hidden-state model ``rho_{c2|z} = sum_l p(l) p(c2|z,l) tau_l``.

    ``responses[l, z, c2] = p(c2 | z, l)``.
    """

    weights: np.ndarray
    hidden_states: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if abs(w.sum() - 1.0) > 1e-12 or w.min() < 0:
            raise PreconditionError("hidden-variable weights must be a probability vector")
        r = np.asarray(self.responses, dtype=float)
        if r.ndim != 3 or r.shape[0] != w.size or np.max(np.abs(r.sum(axis=-1) - 1.0)) > NORM_TOL or r.min() < -NONNEG_TOL:
            raise PreconditionError("each response distribution p(c2|z,l) must be normalised")
        t = np.asarray(self.hidden_states, dtype=np.complex128)
        if t.ndim != 3 or t.shape[0] != w.size:
            raise DimensionError(f"hidden states must have shape (n_lambda, D, D), got {t.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "responses", r)
        object.__setattr__(self, "hidden_states", t)

    @classmethod
    def from_separable(cls, weights, taus, sigmas, retained_povms: Sequence[Povm]) -> "LhsModel":
        """Model of ``sum_l p(l) tau_l ⊗ sigma_l`` with responses ``tr(sigma_l N_{c2|z})``."""
        effects = qudit.stack_effects(retained_povms)
        resp = np.einsum("lab,zcba->lzc", np.asarray(sigmas), effects).real
        return cls(np.asarray(weights), np.asarray(taus), resp)


# --------------------------------------------------------------------------
# simulation


def _born(states: np.ndarray, effects: np.ndarray) -> np.ndarray:
    """``out[i, j] = Re tr(states[i] effects[j])`` for stacked square matrices."""
    n = states.shape[-1]
    s = states.reshape(-1, n * n)
    e = np.swapaxes(effects, -1, -2).reshape(-1, n * n)
    return (s @ e.T).real


def _effects(povms: Sequence[Povm]) -> np.ndarray:
    povms = [p if isinstance(p, Povm) else Povm(p) for p in povms]
    return qudit.stack_effects(povms)


def _table(scenario: Scenario, raw: np.ndarray) -> CorrelationTable:
    return CorrelationTable(scenario, raw)


def simulate_eapm(rho: DensityMatrix, encodings: Sequence[KrausChannel], povms: Sequence[Povm]) -> CorrelationTable:
    """``p(c|x,z) = tr(tau_x M_{c|z})`` with ``tau_x = (Lambda_x ⊗ 1)[rho]``."""
    effects = _effects(povms)
    n_z, n_c, dim, _ = effects.shape
    d_out = {ch.d_out for ch in encodings}
    if len(d_out) != 1 or d_out.pop() * rho.dim_b != dim:
        raise DimensionError("encoding outputs and measurement dimension do not fit together")
    taus = []
    for ch in encodings:
        if ch.d_in != rho.dim_a:
            raise DimensionError(f"encoding acts on dimension {ch.d_in}, source share has {rho.dim_a}")
        taus.append(qudit.apply_local(ch.kraus_ops, rho.mat, rho.dim_a, rho.dim_b, "first"))
    taus = np.array(taus)
    d_msg = dim // rho.dim_b
    marg = np.einsum("xijik->xjk", taus.reshape(len(taus), d_msg, rho.dim_b, d_msg, rho.dim_b))
    if np.max(np.abs(marg - rho.marginal("second"))) > MARGINAL_TOL:
        raise EapmError("retained marginal depends on the encoding; channels are not trace preserving")
    raw = _born(taus, effects.reshape(-1, dim, dim)).reshape(len(taus), n_z, n_c)
    return _table("eapm", raw)


def _stack_kraus(channels: Sequence[KrausChannel]) -> np.ndarray:
    """Kraus sets as one ``(n, k, out, in)`` array, zero-padded to a common ``k``."""
    k = max(ch.kraus_ops.shape[0] for ch in channels)
    ch0 = channels[0]
    out = np.zeros((len(channels), k, ch0.d_out, ch0.d_in), dtype=np.complex128)
    for i, ch in enumerate(channels):
        out[i, : ch.kraus_ops.shape[0]] = ch.kraus_ops
    return out


def _apply_second_batch(kraus: np.ndarray, rho: np.ndarray, dim_a: int, dim_b: int) -> np.ndarray:
    """Every channel in a stacked Kraus array applied to the second factor of ``rho``."""
    n, _, d_out, _ = kraus.shape
    r = rho.reshape(dim_a, dim_b, dim_a, dim_b)
    half = np.einsum("ykja,iabl->ykijbl", kraus, r, optimize=True)
    out = np.einsum("ykijbl,ykcl->yijbc", half, kraus.conj(), optimize=True)
    m = dim_a * d_out
    return out.reshape(n, m, m)


def simulate_symmetric(
    rho: DensityMatrix,
    enc_a: Sequence[KrausChannel],
    enc_b: Sequence[KrausChannel],
    povms: Sequence[Povm],
) -> CorrelationTable:
    """``p(c|x,y,z) = tr((Lambda_x ⊗ Gamma_y)[rho] M_{c|z})``."""
    effects = _effects(povms)
    n_z, n_c, dim, _ = effects.shape
    if any(ch.d_in != rho.dim_a for ch in enc_a) or any(ch.d_in != rho.dim_b for ch in enc_b):
        raise DimensionError("encoding input dimensions do not match the shared state")
    da, db = enc_a[0].d_out, enc_b[0].d_out
    if da * db != dim:
        raise DimensionError(f"messages of dimension {da}x{db} cannot feed a {dim}-dimensional measurement")
    half = [qudit.apply_local(ch.kraus_ops, rho.mat, rho.dim_a, rho.dim_b, "first") for ch in enc_a]
    kb = _stack_kraus(enc_b)
    states = np.array([_apply_second_batch(kb, h, da, rho.dim_b) for h in half])
    raw = _born(states.reshape(-1, dim, dim), effects.reshape(-1, dim, dim))
    return _table("symmetric", raw.reshape(len(enc_a), len(enc_b), n_z, n_c))


def _as_state_stack(states) -> np.ndarray:
    out = []
    for s in states:
        out.append(s.mat if isinstance(s, DensityMatrix) else np.asarray(s, dtype=np.complex128))
    return np.array(out)


def simulate_unassisted(states_a, povms: Sequence[Povm], states_b=None) -> CorrelationTable:
    """Prepare-and-measure tables without shared entanglement.

    With only ``states_a`` this is ``tr(alpha_x M_{c|z})``; with ``states_b``
    too, the receiver measures ``alpha_x ⊗ beta_y``.
    """
    effects = _effects(povms)
    n_z, n_c, dim, _ = effects.shape
    a = _as_state_stack(states_a)
    if states_b is None:
        if a.shape[-1] != dim:
            raise DimensionError(f"states of dimension {a.shape[-1]} vs measurement dimension {dim}")
        raw = _born(a, effects.reshape(-1, dim, dim)).reshape(len(a), n_z, n_c)
        return _table("eapm", raw)
    b = _as_state_stack(states_b)
    da, db = a.shape[-1], b.shape[-1]
    if da * db != dim:
        raise DimensionError(f"states of dimensions {da}, {db} vs measurement dimension {dim}")
    m = effects.reshape(n_z, n_c, da, db, da, db)
    raw = np.einsum("xac,ybd,zkcdab->xyzk", a, b, m, optimize=True).real
    return _table("symmetric", raw)


def lhs_simulation(
    model: LhsModel,
    encodings: Sequence[KrausChannel],
    msg_povms: Sequence[Sequence[Povm]],
    post: np.ndarray,
) -> CorrelationTable:
    """Classical simulation of an adaptive product measurement via an LHS model.

    ``msg_povms[z][c2]`` measures the message after ``c2`` has been drawn from
    ``p(c2|z,lambda)``; ``post[c, c1, c2] = p(c|c1,c2)``.  Returns
    ``p(c|x,z) = sum p(l) p(c|c1,c2) p(c2|z,l) tr(Lambda_x[tau_l] N_{c1|z,c2})``.
    """
    post = np.asarray(post, dtype=float)
    if np.max(np.abs(post.sum(axis=0) - 1.0)) > NORM_TOL:
        raise PreconditionError("post-processing p(c|c1,c2) is not normalised over c")
    n_z = len(msg_povms)
    if model.responses.shape[1] != n_z:
        raise DimensionError("model responses and measurement families disagree on the number of settings")
    n_c2 = model.responses.shape[2]
    if any(len(fam) != n_c2 for fam in msg_povms):
        raise DimensionError("need one message measurement per retained outcome c2")
    nr = np.array([[p.effects for p in fam] for fam in msg_povms])  # (z, c2, c1, d, d)
    sent = np.array([[ch(tau) for tau in model.hidden_states] for ch in encodings])  # (x, l, d, d)
    n_x, n_l, d, _ = sent.shape
    if nr.shape[-1] != d:
        raise DimensionError(f"message measurements act on {nr.shape[-1]} dims, messages have {d}")
    tr = _born(sent.reshape(-1, d, d), nr.reshape(-1, d, d)).reshape(n_x, n_l, n_z, n_c2, -1)
    raw = np.einsum("l,lzb,xlzba,cab->xzc", model.weights, model.responses, tr, post)
    return _table("eapm", raw)


def adaptive_product_povm(msg_family: Sequence[Povm], retained: Povm, post: np.ndarray) -> Povm:
    """``M_c = sum_{c1,c2} p(c|c1,c2) N^R_{c1|c2} ⊗ N^C_{c2}`` for one setting."""
    post = np.asarray(post, dtype=float)
    eff = [sum(post[c, c1, c2] * np.kron(msg_family[c2].effects[c1], retained.effects[c2])
               for c1 in range(post.shape[1]) for c2 in range(post.shape[2]))
           for c in range(post.shape[0])]
    return Povm(np.array(eff))


# --------------------------------------------------------------------------
# scoring and reference strategies


def score(game: GameSpec, table: CorrelationTable) -> float:
    """Uniform average of the winning probabilities ``p(c = w_z | ...)``."""
    p = table.probs
    if table.scenario != game.scenario:
        raise DimensionError(f"{table.scenario} table cannot be scored on a {game.scenario} game")
    if game.scenario == "eapm":
        if p.shape != (game.n_x, game.n_settings, game.n_outcomes):
            raise DimensionError(f"table shape {p.shape} does not match the game")
        x = np.arange(game.n_x)
        wins = np.stack([p[x, z, game.win[z]] for z in range(game.n_settings)])
    else:
        if p.shape != (game.n_x, game.n_y, game.n_settings, game.n_outcomes):
            raise DimensionError(f"table shape {p.shape} does not match the game")
        x, y = np.meshgrid(np.arange(game.n_x), np.arange(game.n_y), indexing="ij")
        wins = np.stack([p[x, y, z, game.win[z]] for z in range(game.n_settings)])
    return float(wins.mean())


def ideal_povms(d: int, scenario: str = "eapm") -> list[Povm]:
    """Receiver measurements that decode the ideal strategy deterministically."""
    sc = normalize_scenario(scenario)
    order = [1, 0, 2] if (d == 2 and sc == "symmetric") else range(d + 1)
    return [qudit.product_measurement(d, z) for z in order]


def ideal_table(d: int, scenario: str = "eapm", rho: DensityMatrix | None = None) -> CorrelationTable:
    """Table of the Weyl-encoding / product-measurement strategy on ``rho`` (default ``phi+``)."""
    sc = normalize_scenario(scenario)
    rho = qudit.max_entangled(d) if rho is None else rho
    enc = qudit.weyl_encodings(d)
    if sc == "eapm":
        return simulate_eapm(rho, enc, ideal_povms(d, sc))
    return simulate_symmetric(rho, enc, enc, ideal_povms(d, sc))


def ideal_score(d: int, scenario: str = "eapm", rho: DensityMatrix | None = None) -> float:
    sc = normalize_scenario(scenario)
    return score(make_game(d, sc), ideal_table(d, sc, rho))


def relay_strategy(d: int) -> tuple[np.ndarray, np.ndarray, list[Povm]]:
    """Unassisted symmetric strategy: send ``|x0>`` and ``|y0>``, decode ``x0 - y0``.

    Settings other than the computational one are answered uniformly at random.
    """
    basis = np.eye(d, dtype=np.complex128)
    states = np.array([np.outer(basis[x0], basis[x0]) for x0 in range(d) for _ in range(d)])
    game = make_game(d, "symmetric")
    z_comp = 0 if d == 2 else d  # the setting whose win function is x0 - y0
    eye = np.eye(d * d)
    povms = []
    for z in range(game.n_settings):
        if z == z_comp:
            eff = np.zeros((d, d * d, d * d))
            for a in range(d):
                for b in range(d):
                    eff[(a - b) % d][a * d + b, a * d + b] = 1.0
        else:
            eff = np.array([eye / d] * d)
        povms.append(Povm(eff))
    return states, states.copy(), povms


def ef_protocol_value(rho: DensityMatrix, ch_a: KrausChannel, ch_b: KrausChannel, d: int) -> float:
    """Symmetric-game score when each share is first pre-processed by a local channel."""
    qudit.require_prime(d)
    if ch_a.d_out != d or ch_b.d_out != d:
        raise DimensionError(f"pre-channels must output dimension {d}")
    enc = qudit.weyl_encodings(d)
    enc_a = [ch_a.then(u) for u in enc]
    enc_b = [ch_b.then(u) for u in enc]
    table = simulate_symmetric(rho, enc_a, enc_b, ideal_povms(d, "symmetric"))
    return score(make_game(d, "symmetric"), table)


def ef_affine_value(fidelity: float, d: int) -> float:
    """``1/(d+1) + d/(d+1) F``: the pre-channel score as a function of the phi+ overlap."""
    return 1.0 / (d + 1) + d / (d + 1) * fidelity


__all__ = [
    "CorrelationTable",
    "GameSpec",
    "LhsModel",
    "adaptive_product_povm",
    "ef_affine_value",
    "ef_protocol_value",
    "ideal_povms",
    "ideal_score",
    "ideal_table",
    "lhs_simulation",
    "make_game",
    "relay_strategy",
    "score",
    "simulate_eapm",
    "simulate_symmetric",
    "simulate_unassisted",
]
