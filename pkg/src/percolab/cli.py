"""Command-line entry point: run experiment manifests, validate them, and
regenerate the brute-force oracle reference tables.

Exit status 0 on success, 2 on a bad manifest or unknown oracle name, 1 on
runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np


def _load_manifest(path: str):
    try:
        with open(path) as f:
            return json.load(f), None
    except OSError as exc:
        return None, f"cannot read {path}: {exc}"
    except json.JSONDecodeError as exc:
        return None, f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"


def _cmd_validate(args) -> int:
    from .experiments import validate_manifest

    manifest, err = _load_manifest(args.manifest)
    if err:
        print(err, file=sys.stderr)
        return 2
    errors = validate_manifest(manifest)
    if errors:
        for e in errors:
            print(f"{args.manifest}: {e}", file=sys.stderr)
        return 2
    print(f"{args.manifest}: ok")
    return 0


def _cmd_run(args) -> int:
    from .experiments import run_manifest, validate_manifest

    manifest, err = _load_manifest(args.manifest)
    if err:
        print(err, file=sys.stderr)
        return 2
    errors = validate_manifest(manifest)
    if errors:
        for e in errors:
            print(f"{args.manifest}: {e}", file=sys.stderr)
        return 2
    try:
        run_manifest(manifest, args.out_dir, workers=args.workers,
                     resume=args.resume)
    except OSError as exc:
        print(f"output failure: {exc}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# Oracle tables.  Each writes one small reference table computed by the
# naive implementations in percolab.oracles, for cross-checking the fast
# code paths by eye or by golden-file tests.

def _oracle_anchored_counts():
    from .lattice import build_box
    from .oracles import anchored_counts

    host = build_box(2, 6)
    counts = anchored_counts(host.indptr, host.indices, host.origin, 8)
    rows = [{"size": k, "count": counts[k]} for k in sorted(counts)]
    return {"table": "anchored-counts",
            "note": "connected sets containing the origin of Z^2, by size",
            "rows": rows}


def _oracle_cycle_gap():
    from .oracles import cycle_gap

    rows = [{"L": L, "beta": 0.5, "gap": cycle_gap(L, 0.5)}
            for L in (4, 8, 16, 32, 64)]
    return {"table": "cycle-gap",
            "note": "lazy walk spectral gap on the L-cycle, exact",
            "rows": rows}


def _oracle_lazy_return():
    from .oracles import lazy_return_z2

    seq = lazy_return_z2(64)
    rows = [{"n": n, "p_n": float(seq[n])} for n in range(0, 65, 4)]
    return {"table": "lazy-return-z2",
            "note": "exact return probability of the lazy walk on Z^2",
            "rows": rows}


def _oracle_census():
    from .lattice import build_box
    from .oracles import census_oracle

    host = build_box(2, 5)
    q = census_oracle(host, host.origin, 10, size_cap=6)
    rows = [{"n": n, "q_n": q[n]} for n in sorted(q)]
    return {"table": "cutset-census",
            "note": "minimal cutsets around the origin in an 11x11 window",
            "rows": rows}


def _oracle_resistance():
    from .oracles import dense_resistance

    rows = []
    for L in (2, 3, 5, 8):
        edges = [(i, i + 1) for i in range(L)]
        r = dense_resistance(L + 1, np.array(edges), [0], [L])
        rows.append({"graph": f"path-{L}", "r_eff": r})
    for L in (4, 6, 8):
        edges = [(i, (i + 1) % L) for i in range(L)]
        r = dense_resistance(L, np.array(edges), [0], [L // 2])
        rows.append({"graph": f"cycle-{L}", "r_eff": r})
    return {"table": "resistance",
            "note": "effective resistance on paths and cycles, dense pinv",
            "rows": rows}


ORACLES = {
    "anchored-counts": _oracle_anchored_counts,
    "cycle-gap": _oracle_cycle_gap,
    "lazy-return": _oracle_lazy_return,
    "census": _oracle_census,
    "resistance": _oracle_resistance,
}


def _cmd_oracle(args) -> int:
    import os

    if args.name not in ORACLES:
        print(f"oracle: unknown name {args.name!r}; "
              f"choose from {sorted(ORACLES)}", file=sys.stderr)
        return 2
    table = ORACLES[args.name]()
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, f"oracle-{args.name}.json")
    with open(path, "w") as f:
        json.dump(table, f, indent=2)
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="percolab",
        description="Percolation cluster geometry experiment runner.",
    )
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--out-dir", default="out",
                        help="directory for CSV/JSON outputs (default: out)")
    shared.add_argument("--workers", type=int, default=1,
                        help="process count for chunk execution")
    shared.add_argument("--resume", action=argparse.BooleanOptionalAction,
                        default=True,
                        help="reuse cached chunk results (default: on)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[shared],
                           help="execute an experiment manifest")
    p_run.add_argument("manifest")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", parents=[shared],
                           help="check a manifest without running")
    p_val.add_argument("manifest")
    p_val.set_defaults(func=_cmd_validate)

    p_or = sub.add_parser("oracle", parents=[shared],
                          help="write a brute-force reference table")
    p_or.add_argument("name")
    p_or.set_defaults(func=_cmd_oracle)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
