"""Scores attainable without shared entanglement, and where entanglement beats them.

Three kinds of bound are exposed, each tagged in :class:`BoundResult`:

* ``analytic``: the operator-norm bound :func:`l_d` on the prepare-and-measure
  game, valid for every prime ``d``;
* ``sdp``: the Gram-matrix relaxation :func:`xor_qubit_bound` for qubit games
  whose settings are XORs of balanced functions of each sender's input;
* ``conjectured``: ``2/(d+1)`` for the symmetric game at odd prime ``d``.

An ideal protocol run on the isotropic state of visibility ``v`` scores
``v + (1 - v)/d`` in both scenarios, so each bound translates into a critical
visibility by :func:`critical_visibility`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Sequence

import numpy as np

from . import protocols, qudit
from .errors import PreconditionError
from .optimize.sdp import gram_problem, sdp_solve
from .protocols import GameSpec, normalize_scenario

BoundKind = Literal["analytic", "sdp", "conjectured", "seesaw-lower"]
_KINDS = ("analytic", "sdp", "conjectured", "seesaw-lower")


@dataclass(frozen=True)
class BoundResult:
    value: float
    kind: BoundKind
    certificate: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown bound kind {self.kind!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"bound {self.value} outside [0, 1]")

    def __float__(self) -> float:
        return float(self.value)


def l_d(d: int) -> BoundResult:
    """Unassisted bound on the prepare-and-measure game, ``(1 + (d-1)/sqrt(d+1)) / d``."""
    qudit.require_prime(d)
    return BoundResult((1.0 + (d - 1) / math.sqrt(d + 1)) / d, "analytic")


def conjectured_bound(d: int) -> BoundResult:
    """``2/(d+1)`` for the symmetric game at odd prime ``d`` (attained by relaying ``x0``)."""
    qudit.require_prime(d, odd=True)
    return BoundResult(2.0 / (d + 1), "conjectured")


# --------------------------------------------------------------------------
# qubit XOR games


@dataclass(frozen=True)
class XorGame:
    """Binary-outcome game won when ``c = g[z, x] XOR h[z, y]``.

    Every row of ``g`` and ``h`` must be balanced (as many zeros as ones).
    """

    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.int64) % 2
        h = np.asarray(self.h, dtype=np.int64) % 2
        if g.ndim != 2 or h.ndim != 2 or g.shape[0] != h.shape[0] or g.shape[0] < 1:
            raise PreconditionError("g and h must be (settings, inputs) arrays with matching setting counts")
        for name, f in (("g", g), ("h", h)):
            if f.shape[1] % 2 or np.any(2 * f.sum(axis=1) != f.shape[1]):
                raise PreconditionError(f"every row of {name} must be a balanced function")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)

    @property
    def n_x(self) -> int:
        return self.g.shape[1]

    @property
    def n_y(self) -> int:
        return self.h.shape[1]

    @property
    def n_z(self) -> int:
        return self.g.shape[0]

    def win(self) -> np.ndarray:
        """``win[z, x, y]``, the outcome that wins."""
        return (self.g[:, :, None] + self.h[:, None, :]) % 2

    @classmethod
    def from_game(cls, game: GameSpec) -> "XorGame":
        """Split a qubit symmetric game into its per-sender functions."""
        if game.d != 2 or game.scenario != "symmetric":
            raise PreconditionError("only qubit symmetric games are XOR games")
        win = game.win
        g = win[:, :, 0]
        h = (win[:, 0, :] + g[:, :1]) % 2
        out = cls(g, h)
        if not np.array_equal(out.win(), win):
            raise PreconditionError("win table does not split as g(x) XOR h(y)")
        return out


def gram_coefficients(f: np.ndarray) -> np.ndarray:
    """``C[x, x'] = sum_z (-1)^(f[z, x] + f[z, x'])``."""
    s = 1 - 2 * np.asarray(f)
    return s.T @ s


def gram_bound(f: np.ndarray) -> tuple[float, dict]:
    """Max of ``sum_{x<x'} C[x, x'] G[x, x']`` over unit-diagonal Gram matrices ``G``."""
    sol = sdp_solve(gram_problem(gram_coefficients(f).astype(float)))
    return sol.value, sol.certificate()


def xor_qubit_bound(game: XorGame | GameSpec) -> BoundResult:
    """Bound on XOR games with qubit messages and no shared entanglement.

    With ``eta``, ``xi`` the Gram-matrix optima for each sender,
    ``1/2 + sqrt(N_X N_Z + 2 eta) sqrt(N_Y N_Z + 2 xi) / (2 N_X N_Y N_Z)``.
    """
    if isinstance(game, GameSpec):
        game = XorGame.from_game(game)
    eta, cert_a = gram_bound(game.g)
    xi, cert_b = gram_bound(game.h)
    nx, ny, nz = game.n_x, game.n_y, game.n_z
    value = 0.5 + math.sqrt(nx * nz + 2 * eta) * math.sqrt(ny * nz + 2 * xi) / (2 * nx * ny * nz)
    cert = {"eta": eta, "xi": xi, "eta_sdp": cert_a, "xi_sdp": cert_b,
            "duality_gap": max(cert_a["duality_gap"], cert_b["duality_gap"])}
    return BoundResult(min(value, 1.0), "sdp", cert)


# --------------------------------------------------------------------------
# thresholds


def scenario_bound(d: int, scenario: str) -> BoundResult:
    """The bound an observed score must beat: ``L_d``, the proven qubit value 2/3, or ``2/(d+1)``."""
    sc = normalize_scenario(scenario)
    qudit.require_prime(d)
    if sc == "eapm":
        return l_d(d)
    if d == 2:
        # the Gram SDP reproduces 2/3; report the exact value with the SDP as witness
        sdp = xor_qubit_bound(protocols.make_game(2, "symmetric"))
        return BoundResult(2.0 / 3.0, "analytic", {"sdp_value": sdp.value, **sdp.certificate})
    return conjectured_bound(d)


def harmonic(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


def reference_thresholds(d: int) -> dict[str, float]:
    """Critical visibilities of the isotropic state for several notions of non-classicality."""
    qudit.require_prime(d)
    return {
        "eapm": 1.0 / math.sqrt(d + 1),
        "symmetric": 1.0 / (d + 1),
        "steering_general": (harmonic(d) - 1.0) / (d - 1),
        "entanglement": 1.0 / (d + 1),
    }


def critical_visibility(d: int, scenario: str, bound: BoundResult | float) -> float:
    """Visibility at which the ideal protocol's score ``v + (1-v)/d`` equals ``bound``."""
    qudit.require_prime(d)
    normalize_scenario(scenario)
    b = float(bound)
    if not 1.0 / d < b < 1.0:
        raise PreconditionError(f"bound {b} outside (1/d, 1): no crossing")
    return (d * b - 1.0) / (d - 1)


class ScanRow(NamedTuple):
    v: float
    score: float
    bound: float
    bound_kind: str
    certified: bool


def visibility_scan(d: int, scenario: str, grid: Sequence[float], bound: BoundResult | None = None) -> list[ScanRow]:
    """Ideal-protocol score on isotropic states over ``grid``, flagged against ``bound``."""
    sc = normalize_scenario(scenario)
    bound = scenario_bound(d, sc) if bound is None else bound
    rows = []
    for v in grid:
        s = protocols.ideal_score(d, sc, qudit.isotropic(d, float(v)))
        rows.append(ScanRow(float(v), s, bound.value, bound.kind, bool(s > bound.value)))
    return rows


__all__ = [
    "BoundKind",
    "BoundResult",
    "ScanRow",
    "XorGame",
    "conjectured_bound",
    "critical_visibility",
    "gram_bound",
    "gram_coefficients",
    "harmonic",
    "l_d",
    "reference_thresholds",
    "scenario_bound",
    "visibility_scan",
    "xor_qubit_bound",
]
