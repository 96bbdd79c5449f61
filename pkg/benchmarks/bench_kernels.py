"""Compare the compiled and numpy SDP kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times the Schur-complement assembly (shared-pattern and generic paths) and a
full interior-point solve of a measurement-update problem on each available
backend, then prints one row per case with the speed-up of ``cython`` over
``python`` where both exist.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from eapmcert import _kernels, linalg
from eapmcert.optimize.sdp import _Compiled, block_sum_problem, sdp_solve


def _pd_stack(rng, n, k):
    out = []
    for _ in range(k):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        out.append(g @ g.conj().T + np.eye(n))
    return out


def measurement_problem(d, n_outcomes, seed=0):
    """POVM update with ``n_outcomes`` random score operators on ``d^2`` dimensions."""
    rng = np.random.default_rng(seed)
    return block_sum_problem([linalg.random_hermitian(d * d, rng) for _ in range(n_outcomes)])


def schur_cases(ops, p, rng):
    comp = _Compiled(p)
    w = _pd_stack(rng, p.block_sizes[0], len(p.block_sizes))
    flat = np.concatenate([b.ravel() for b in w])
    stacks = comp.layout.stacks(flat)
    lay = comp.layout

    def shared():
        comp.schur(ops, stacks, flat)

    def generic():
        ops.schur_complement(flat, comp.blk_ptr, lay.offsets, comp.sizes, comp.con, comp.row, comp.col, comp.val, comp.m)

    return {"schur/shared": shared, "schur/generic": generic}


def run(repeat, cases):
    rows = []
    backends = _kernels.available_backends()
    for label, (d, n_out) in cases.items():
        p = measurement_problem(d, n_out)
        timings = {}
        for name in backends:
            ops = _kernels.get_backend(name)
            fns = schur_cases(ops, p, np.random.default_rng(1))
            fns["solve"] = lambda name=name: sdp_solve(p, backend=name)
            for kind, fn in fns.items():
                number = 1 if kind == "solve" else 5
                best = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
                timings.setdefault(kind, {})[name] = best
        for kind, per in timings.items():
            row = {"case": label, "kernel": kind, **{f"{k}_s": v for k, v in per.items()}}
            if "cython" in per and "python" in per:
                row["speedup"] = per["python"] / per["cython"]
            rows.append(row)
    return backends, rows


def print_table(backends, rows, out=sys.stdout):
    cols = ["case", "kernel"] + [f"{b}_s" for b in backends] + (["speedup"] if len(backends) > 1 else [])
    print("  ".join(f"{c:>14}" for c in cols), file=out)
    for r in rows:
        cells = []
        for c in cols:
            v = r.get(c, "")
            cells.append(f"{v:>14.4g}" if isinstance(v, float) else f"{v:>14}")
        print("  ".join(cells), file=out)


CASES = {
    "d=2 (3 outs)": (2, 3),
    "d=3 (4 outs)": (3, 4),
    "d=5 (6 outs)": (5, 6),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the rows to this file")
    args = ap.parse_args(argv)
    backends, rows = run(args.repeat, CASES)
    if len(backends) < 2:
        print("note: compiled kernels not built, timing the numpy backend only", file=sys.stderr)
    print_table(backends, rows)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"backends": backends, "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
