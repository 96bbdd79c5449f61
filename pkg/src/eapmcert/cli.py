"""Command-line interface: ``eapmcert {ideal,scan,bound,seesaw} ...``.

Every command produces a report that is printed as JSON (default) or CSV, or
written to ``--output``.  Without ``--output``, a report goes to the directory
named by ``EAPMCERT_OUTPUT_DIR`` when that is set, otherwise to stdout.

Exit codes: 0 success, 2 invalid input (including unwritable output paths),
3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, bounds, protocols, qudit
from .errors import EapmError, PreconditionError, SolverError
from .optimize import SeesawConfig, seesaw

OUTPUT_DIR_ENV = "EAPMCERT_OUTPUT_DIR"
SIG_DIGITS = 12
IDEAL_TOL = 1e-9
STRICT_TOL = 1e-7

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_SOLVER = 3

ANCHORS = {
    "ideal-eapm": "S_d = 1: Weyl encodings U_x = X^x0 Z^x1 decoded by products of conjugate MUB measurements",
    "ideal-symmetric": "R_d = 1: both senders apply Weyl encodings, receiver measures products of conjugate MUBs",
    "Ld": "L_d = (1/d) (1 + (d - 1)/sqrt(d + 1))",
    "xor": "W <= 1/2 + sqrt(N_X N_Z + 2 eta) sqrt(N_Y N_Z + 2 xi) / (2 N_X N_Y N_Z), eta and xi from unit-diagonal Gram SDPs",
    "conjecture": "R_d = 2/(d + 1) without entanglement (conjectured for odd prime d)",
    "two-thirds": "R_2 <= 2/3 without entanglement",
    "score-law": "ideal score on isotropic states: v + (1 - v)/d",
    "v-star": "v* = (d * bound - 1)/(d - 1)",
    "seesaw": "see-saw: alternate optimal POVMs (SDP) and top-eigenvector pure states until the score settles",
}

_FIELDS = {
    "ideal": ("scenario",),
    "scan": ("scenario", "v_from", "v_to", "steps"),
    "bound": ("which",),
    "seesaw": ("scenario", "restarts", "seed", "tol", "max_iters", "workers"),
}

_SCENARIOS = {"eapm": "eapm", "sym": "symmetric", "symmetric": "symmetric", "eapm-unassisted": "eapm"}


@dataclass
class RunConfig:
    command: str
    d: int
    scenario: str = "eapm"
    v_from: float = 0.0
    v_to: float = 1.0
    steps: int = 101
    which: str | None = None
    seed: int = 0
    restarts: int = 300
    tol: float = 1e-4
    max_iters: int = 500
    workers: int = 1
    output: str | None = None
    fmt: str = "json"
    extra: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        qudit.require_prime(self.d)
        if self.command == "scan":
            if self.steps < 1:
                raise PreconditionError("the visibility grid needs at least one point")
            for v in (self.v_from, self.v_to):
                if not 0.0 <= v <= 1.0:
                    raise PreconditionError(f"grid endpoint {v} outside [0, 1]")
        if self.fmt not in ("json", "csv"):
            raise PreconditionError(f"unknown format {self.fmt!r}")
        return self

    def grid(self) -> np.ndarray:
        return np.linspace(self.v_from, self.v_to, self.steps)

    def as_dict(self) -> dict:
        """Effective settings of this command (enough to re-run it)."""
        full = asdict(self)
        out = {k: full[k] for k in ("command", "d", *_FIELDS[self.command], "fmt")}
        out.update(self.extra)
        return out


# --------------------------------------------------------------------------
# serialisation


def fmt_number(x: float) -> float:
    """Round to SIG_DIGITS significant digits (non-finite values pass through)."""
    x = float(x)
    return float(f"{x:.{SIG_DIGITS}g}") if math.isfinite(x) else x


def matrix_pairs(m: np.ndarray) -> list:
    """Nested ``[re, im]`` pairs, one list per row."""
    m = np.asarray(m, dtype=np.complex128)
    return [[[fmt_number(z.real), fmt_number(z.imag)] for z in row] for row in m]


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_number(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def to_json(report: dict) -> str:
    return json.dumps(_jsonable(report), indent=2) + "\n"


def _csv_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{SIG_DIGITS}g}"
    return str(v)


def to_csv(report: dict) -> str:
    """``# key=value`` metadata lines, then the table (or key,value rows)."""
    buf = io.StringIO()
    meta = {"command": report["command"], "version": report["version"]}
    meta.update(report["config"])
    meta.update(report.get("metadata", {}))
    meta["paper_anchor"] = " | ".join(report["paper_anchor"])
    for k, v in meta.items():
        if v is not None:
            buf.write(f"# {k}={_csv_value(v)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    if "rows" in report:
        cols = report["columns"]
        writer.writerow(cols)
        for row in report["rows"]:
            writer.writerow([_csv_value(row[c]) for c in cols])
    else:
        writer.writerow(["key", "value"])
        for k, v in report["result"].items():
            if isinstance(v, (dict, list, tuple)):
                continue
            writer.writerow([k, _csv_value(v)])
    return buf.getvalue()


def _default_name(cfg: RunConfig) -> str:
    parts = [cfg.command, f"d{cfg.d}"]
    if cfg.command in ("ideal", "scan", "seesaw"):
        parts.append(cfg.scenario)
    if cfg.command == "bound":
        parts.append(str(cfg.which))
    if cfg.command == "seesaw":
        parts.append(f"seed{cfg.seed}")
    return "-".join(parts) + f".{cfg.fmt}"


def emit(report: dict, cfg: RunConfig, stdout=None) -> Path | None:
    text = to_csv(report) if cfg.fmt == "csv" else to_json(report)
    target = cfg.output
    if target is None and os.environ.get(OUTPUT_DIR_ENV):
        target = str(Path(os.environ[OUTPUT_DIR_ENV]) / _default_name(cfg))
    if target is None:
        (stdout or sys.stdout).write(text)
        return None
    path = Path(target)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise PreconditionError(f"cannot write {path}: {exc}") from exc
    return path


def _report(cfg: RunConfig, anchors: Sequence[str], result: dict, **extra) -> dict:
    out = {
        "command": cfg.command,
        "version": __version__,
        "config": cfg.as_dict(),
        "paper_anchor": [ANCHORS[a] for a in anchors],
        "result": result,
    }
    out.update(extra)
    return out


# --------------------------------------------------------------------------
# commands


def cmd_ideal(cfg: RunConfig) -> dict:
    sc = _SCENARIOS[cfg.scenario]
    value = protocols.ideal_score(cfg.d, sc)
    if abs(value - 1.0) > IDEAL_TOL:
        raise SolverError(f"ideal strategy scored {value}, expected 1")
    return _report(cfg, [f"ideal-{sc}"], {"scenario": sc, "d": cfg.d, "score": value})


def cmd_scan(cfg: RunConfig) -> dict:
    sc = _SCENARIOS[cfg.scenario]
    bound = bounds.scenario_bound(cfg.d, sc)
    v_star = bounds.critical_visibility(cfg.d, sc, bound)
    rows = [r._asdict() for r in bounds.visibility_scan(cfg.d, sc, cfg.grid(), bound)]
    anchors = ["score-law", "v-star", "Ld" if sc == "eapm" else ("two-thirds" if cfg.d == 2 else "conjecture")]
    meta = {"scenario_name": sc, "bound": bound.value, "bound_kind": bound.kind, "v_star": v_star}
    result = {"bound": bound.value, "bound_kind": bound.kind, "v_star": v_star, "rows": rows}
    return _report(cfg, anchors, result, columns=["v", "score", "bound", "bound_kind", "certified"],
                   rows=rows, metadata=meta)


def cmd_bound(cfg: RunConfig) -> dict:
    which = cfg.which
    if which == "Ld":
        b = bounds.l_d(cfg.d)
        scenario = "eapm"
    elif which == "xor":
        if cfg.d != 2:
            raise PreconditionError("the XOR Gram bound applies to qubit games (d=2)")
        b = bounds.xor_qubit_bound(protocols.make_game(2, "symmetric"))
        scenario = "symmetric"
    elif which == "conjecture":
        b = bounds.conjectured_bound(cfg.d)
        scenario = "symmetric"
    else:
        raise PreconditionError(f"unknown bound {which!r}")
    result = {
        "value": b.value,
        "kind": b.kind,
        "critical_visibility": bounds.critical_visibility(cfg.d, scenario, b),
        "certificate": b.certificate,
    }
    return _report(cfg, [which], result)


def cmd_seesaw(cfg: RunConfig) -> dict:
    sc = _SCENARIOS[cfg.scenario]
    game = protocols.make_game(cfg.d, sc)
    res = seesaw(game, SeesawConfig(cfg.restarts, cfg.tol, cfg.max_iters, cfg.seed, cfg.workers))
    proven = bounds.l_d(cfg.d) if sc == "eapm" else bounds.scenario_bound(cfg.d, sc)
    strategy = {
        "states_a": [matrix_pairs(s.mat) for s in res.states_a],
        "states_b": None if res.states_b is None else [matrix_pairs(s.mat) for s in res.states_b],
        "povms": [[matrix_pairs(e) for e in p.effects] for p in res.povms],
    }
    result = {
        "scenario": sc,
        "d": cfg.d,
        "best_score": res.best_score,
        "best_restart": res.best_index,
        "converged": res.converged,
        "reference_bound": proven.value,
        "reference_bound_kind": proven.kind,
        "restarts": [
            {"index": t.index, "score": t.score, "iterations": t.iterations, "converged": t.converged}
            for t in res.traces
        ],
        "strategy": strategy,
    }
    anchors = ["seesaw", "Ld" if sc == "eapm" else ("two-thirds" if cfg.d == 2 else "conjecture")]
    return _report(cfg, anchors, result)


COMMANDS = {"ideal": cmd_ideal, "scan": cmd_scan, "bound": cmd_bound, "seesaw": cmd_seesaw}


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--d", type=int, required=True, help="prime dimension")
    common.add_argument("--output", "-o", help="output file (default: stdout or $%s)" % OUTPUT_DIR_ENV)
    common.add_argument("--format", dest="fmt", choices=["json", "csv"], default="json")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="eapmcert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ideal", parents=[common], help="score of the ideal entanglement-assisted strategy")
    p.add_argument("--scenario", choices=["eapm", "sym", "symmetric"], default="eapm")

    p = sub.add_parser("scan", parents=[common], help="certification over a grid of isotropic visibilities")
    p.add_argument("--scenario", choices=["eapm", "sym", "symmetric"], default="eapm")
    p.add_argument("--from", dest="v_from", type=float, default=0.0)
    p.add_argument("--to", dest="v_to", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=101)

    p = sub.add_parser("bound", parents=[common], help="unassisted bound on a game")
    p.add_argument("--which", choices=["Ld", "xor", "conjecture"], required=True)

    p = sub.add_parser("seesaw", parents=[common], help="see-saw lower bound over unassisted strategies")
    p.add_argument("--scenario", choices=["sym", "symmetric", "eapm-unassisted", "eapm"], default="sym")
    p.add_argument("--restarts", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--strict", action="store_true", help=f"use tol={STRICT_TOL:g}")
    p.add_argument("--max-iters", dest="max_iters", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    kw = {k: v for k, v in vars(ns).items() if k in RunConfig.__dataclass_fields__}
    if getattr(ns, "strict", False):
        kw["tol"] = STRICT_TOL
    return RunConfig(**kw).validate()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        report = COMMANDS[cfg.command](cfg)
        path = emit(report, cfg)
    except PreconditionError as exc:
        print(f"eapmcert: error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except SolverError as exc:
        print(f"eapmcert: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except EapmError as exc:
        print(f"eapmcert: error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if path is not None:
        print(path, file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
