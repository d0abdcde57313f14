"""Compiled vs pure-Python kernels on realistic inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the median wall time per call for each back end and the speed-up,
after checking that both back ends return identical arrays.
"""

import argparse
import statistics
import time

import numpy as np

from qmi.domain import N_ACTIONS, N_FOURTH, N_STATES, TAU_PERCENT
from qmi.kernels import get_backend
from qmi.smoothing import cover_edges


def projection_case(rng):
    """A noisy decreasing 10x10 layer, the shape the smoother sees."""
    grid = np.add.outer(-np.arange(10.0), -np.arange(10.0)) * 0.3
    y = (grid + rng.normal(0, 1.0, (10, 10))).ravel()
    w = rng.integers(1, 400, 100).astype(np.float64)
    lo, hi = cover_edges(np.ones((10, 10), bool))
    return (y, w, np.ascontiguousarray(lo, np.int64), np.ascontiguousarray(hi, np.int64), 1e-13, 200000)


def quantile_case(rng):
    """Cumulative counts for every (sigma, action) row over all states."""
    counts = rng.poisson(0.4, (N_FOURTH * N_ACTIONS, N_STATES)).astype(np.int64)
    cum = np.ascontiguousarray(np.cumsum(counts, axis=1))
    totals = np.ascontiguousarray(cum[:, -1])
    return (cum, totals, np.ascontiguousarray(TAU_PERCENT, np.int64))


def timed(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    try:
        cy = get_backend("cython")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    py = get_backend("python")
    cases = [("antitone_project", projection_case(rng)), ("quantile_positions", quantile_case(rng))]
    print(f"{'kernel':<20} {'python (ms)':>12} {'cython (ms)':>12} {'speed-up':>9} identical")
    for name, case in cases:
        t_py, out_py = timed(getattr(py, name), case, args.repeat)
        t_cy, out_cy = timed(getattr(cy, name), case, args.repeat)
        print(f"{name:<20} {t_py * 1e3:12.2f} {t_cy * 1e3:12.3f} {t_py / t_cy:9.0f} {same(out_py, out_cy)}")


if __name__ == "__main__":
    main()
