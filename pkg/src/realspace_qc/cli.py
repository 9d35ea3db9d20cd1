"""Command-line entry point: ``realspace-qc <command> --config run.json --out DIR``.

Exit codes: 0 success, 2 configuration or parameter error, 3 numerical failure.
Every command writes plain CSV/JSON files into ``--out`` and prints the
main JSON result to stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

COMMANDS = ("solve", "scan-dissociation", "scan-convergence", "lcu", "qcpe", "cusp-cut", "grid", "voronoi-stats")

log = logging.getLogger("realspace_qc")


def _json_default(obj):
    import numpy as np

    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(obj):
    """Replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(doc, path: Path) -> str:
    text = json.dumps(_clean(doc), indent=2, sort_keys=True, default=_json_default)
    path.write_text(text + "\n")
    return text


def write_csv(rows, columns, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="realspace-qc", description=__doc__.splitlines()[0])
    p.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        sp.add_argument("--config", required=needs_config, help="run configuration (JSON)")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        sp.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
        sp.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP threads")
        return sp

    common(sub.add_parser("solve", help="ground-state energy"))
    sp = common(sub.add_parser("scan-dissociation", help="diatomic energy along the bond"))
    sp.add_argument("--R", type=float, nargs="+", help="bond lengths in angstrom (else config scan.R)")
    sp = common(sub.add_parser("scan-convergence", help="energy error along a radial ladder"))
    sp.add_argument("--n-radial", type=int, nargs="+", help="radial point counts (else config scan.n_radial)")
    sp.add_argument("--reference", type=float, default=None, help="reference energy (hartree)")
    sp = common(sub.add_parser("lcu", help="Pauli LCU coefficients and one-norm"))
    sp.add_argument("--rule", choices=("exact", "printed"), default="exact", help="identity-string merge rule")
    sp.add_argument("--validate", action="store_true", help="compare the reconstruction with the dense operator")
    sp.add_argument("--tol", type=float, default=0.0, help="drop coefficients with |c| <= tol from the CSV")
    common(sub.add_parser("qcpe", help="Chebyshev phase estimation (classical simulation)"))
    common(sub.add_parser("cusp-cut", help="two-electron ring cut through coalescence"))
    common(sub.add_parser("grid", help="write the molecular grid"))
    common(sub.add_parser("voronoi-stats", help="Voronoi diagram statistics"))
    return p


def _set_threads(n):
    if n is None:
        return
    if n < 1:
        raise SystemExit(EXIT_CONFIG)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def run(args) -> int:
    from . import pipeline
    from .errors import ConvergenceError, NumericalError, ParameterError

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        cfg = pipeline.RunConfig.from_json(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        cfg.seed = seed
        cmd = args.command
        if cmd == "solve":
            try:
                report, res = pipeline.solve(cfg)
            except ConvergenceError as exc:
                write_json(getattr(exc, "report", {"error": str(exc)}), out / "solve.json")
                raise
            from .eigensolve import write_trace

            write_trace(res.trace, out / "davidson_trace.csv")
            print(write_json(report, out / "solve.json"))
        elif cmd == "scan-dissociation":
            R = args.R or cfg.extra.get("scan", {}).get("R")
            if not R:
                raise ParameterError("no bond lengths given (--R or scan.R)")
            rows = pipeline.scan_dissociation(cfg, R)
            write_csv(rows, ["R", "E_total", "E_binding"], out / "dissociation.csv")
            print(write_json({"rows": rows}, out / "dissociation.json"))
        elif cmd == "scan-convergence":
            scan = cfg.extra.get("scan", {})
            nr = args.n_radial or scan.get("n_radial")
            if not nr:
                raise ParameterError("no radial ladder given (--n-radial or scan.n_radial)")
            ref = args.reference if args.reference is not None else scan.get("reference_energy")
            result = pipeline.scan_convergence(cfg, nr, ref)
            write_csv(result["rows"], ["N", "E", "error"], out / "convergence.csv")
            print(write_json(result, out / "convergence.json"))
        elif cmd == "lcu":
            dec, summary = pipeline.lcu_run(cfg, rule=args.rule, validate=args.validate)
            dec.write_csv(out / "lcu_coefficients.csv", tol=args.tol)
            print(write_json(summary, out / "lcu_summary.json"))
        elif cmd == "qcpe":
            stats = pipeline.qcpe_run(cfg, seed)
            print(write_json(stats, out / "qcpe.json"))
        elif cmd == "cusp-cut":
            result = pipeline.cusp_cut(cfg)
            write_csv(result["rows"], ["mu_ee", "phi", "psi"], out / "cusp_cut.csv")
            summary = {k: v for k, v in result.items() if k != "rows"}
            print(write_json(summary, out / "cusp_metrics.json"))
        elif cmd == "grid":
            grid = pipeline.assemble_grid(cfg.molecule, cfg.specs, merge_eps=cfg.merge_eps)
            grid.write(out / "grid.txt")
            print(write_json({"n_points": grid.n_points, "max_radius": grid.max_radius}, out / "grid.json"))
        elif cmd == "voronoi-stats":
            _, diagram = pipeline.build_grid(cfg)
            diagram.write_json(out / "voronoi.json")
            print(write_json(diagram.stats(), out / "voronoi_stats.json"))
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    _set_threads(args.threads)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
