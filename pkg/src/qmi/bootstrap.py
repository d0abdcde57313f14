"""Game-level bootstrap of the whole estimation pipeline.

Replicate ``b`` draws its game multiplicities from ``default_rng([seed, b])``,
so a replicate's result depends only on (data, seed, b). Pooling sorts
replicates by index first, which makes the posterior independent of the
order (or thread) in which replicates ran.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import TAU_PERCENT
from .errors import EmptyRegion, NumericalError, QmiError, ReplicateDegenerate, UnpairedInputs
from .inverse import median_percent
from .pipeline import PipelineConfig, run_events
from .transitions import EventArrays

log = logging.getLogger(__name__)

BOUNDARY_MASS = 0.05
MIN_BANDWIDTH = 0.01
CDF_SLACK = 1e-12
_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class BootstrapSpec:
    B: int = 200
    seed: int = 0
    threads: int = 1
    max_skip_fraction: float = 0.2

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be >= 1")


@dataclass
class ReplicateResult:
    b: int
    sets: dict = field(default_factory=dict)  # region -> sorted grid percents
    error: str | None = None

    def median(self, region) -> float:
        return median_percent(self.sets[region]) / 100


def weighted_quantile(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    """Left-continuous inverse CDF of a weighted sample (values need not be sorted)."""
    order = np.argsort(values, kind="stable")
    v = np.asarray(values)[order]
    cw = np.cumsum(np.asarray(weights, dtype=np.float64)[order])
    cw /= cw[-1]
    k = int(np.searchsorted(cw, p - CDF_SLACK, side="left"))
    return float(v[min(k, len(v) - 1)])


def weighted_kde(values, weights, grid=TAU_PERCENT / 100.0, min_bandwidth: float = MIN_BANDWIDTH):
    """Gaussian KDE of a weighted sample, normalized to unit trapezoid mass on ``grid``.

    Bandwidth: Silverman's rule with the weighted spread and Kish's effective
    sample size, floored at ``min_bandwidth``.
    """
    x = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    grid = np.asarray(grid, dtype=np.float64)
    mu = w @ x
    sd = np.sqrt(w @ (x - mu) ** 2)
    iqr = weighted_quantile(x, w, 0.75) - weighted_quantile(x, w, 0.25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    n_eff = 1.0 / np.sum(w * w)
    h = max(0.9 * spread * n_eff ** -0.2, min_bandwidth)
    z = (grid[:, None] - x[None, :]) / h
    dens = (np.exp(-0.5 * z * z) @ w) / (h * np.sqrt(2 * np.pi))
    dens /= _trapezoid(dens, grid)
    return dens, h


@dataclass
class RegionPosterior:
    percents: np.ndarray  # grid support
    weights: np.ndarray   # pooled weight per grid percent, sums to 1
    median: float
    interval: tuple
    density: np.ndarray
    bandwidth: float
    boundary_flag: bool

    def to_dict(self) -> dict:
        return {
            "tau": [int(p) / 100 for p in self.percents],
            "weight": [float(x) for x in self.weights],
            "density": [float(x) for x in self.density],
            "bandwidth": float(self.bandwidth),
            "median": self.median,
            "interval": list(self.interval),
            "interval_may_extend_beyond_grid": self.boundary_flag,
        }


@dataclass
class TauPosterior:
    B: int
    seed: int
    replicates: list
    regions: dict
    skipped: list

    def to_json(self) -> str:
        return json.dumps({
            "format": "qmi.tau_posterior/1", "B": self.B, "seed": self.seed,
            "n_used": len(self.replicates), "skipped": [{"b": b, "reason": r} for b, r in self.skipped],
            "regions": {str(k): v.to_dict() for k, v in self.regions.items()},
            "replicates": [{"b": r.b, "sets": {str(k): [int(p) / 100 for p in v] for k, v in r.sets.items()}}
                           for r in self.replicates],
        }, sort_keys=True)

    def to_long_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["region", "replicate", "tau", "weight", "replicate_median"])
        n = len(self.replicates)
        for reg in self.regions:
            for r in self.replicates:
                m = r.median(reg)
                for p in r.sets[reg]:
                    wr.writerow([reg, r.b, f"{int(p) / 100:.2f}", repr(1.0 / (n * len(r.sets[reg]))), f"{m:.2f}"])
        return buf.getvalue()


def replicate_multiplicity(n_games: int, seed: int, b: int) -> np.ndarray:
    rng = np.random.default_rng([seed, b])
    return np.bincount(rng.integers(0, n_games, size=n_games), minlength=n_games)


def run_replicate(ev: EventArrays, cfg: PipelineConfig, seed: int, b: int) -> ReplicateResult:
    mult = replicate_multiplicity(ev.n_games, seed, b)
    try:
        res = run_events(ev, cfg, mult)
        part = res.partition
        if part.errors:
            raise EmptyRegion("; ".join(f"{k}: {v}" for k, v in part.errors.items()))
    except (NumericalError, QmiError) as exc:
        return ReplicateResult(b, error=f"{type(exc).__name__}: {exc}")
    return ReplicateResult(b, {k: np.asarray(v.members, dtype=np.int64) for k, v in part.sets.items()})


def pool(replicates: list, percents=TAU_PERCENT) -> dict:
    reps = sorted(replicates, key=lambda r: r.b)
    n = len(reps)
    out = {}
    for reg in reps[0].sets:
        w = np.zeros(len(percents))
        for r in reps:
            members = r.sets[reg]
            w[np.searchsorted(percents, members)] += 1.0 / (n * len(members))
        support = w > 0
        vals = np.asarray(percents)[support] / 100
        ws = w[support]
        dens, h = weighted_kde(vals, ws, np.asarray(percents) / 100)
        med = weighted_quantile(vals, ws, 0.5)
        interval = (weighted_quantile(vals, ws, 0.025), weighted_quantile(vals, ws, 0.975))
        flag = bool(w[0] >= BOUNDARY_MASS or w[-1] >= BOUNDARY_MASS)
        out[reg] = RegionPosterior(np.asarray(percents).copy(), w, med, interval, dens, h, flag)
    return out


def bootstrap_tau(ev: EventArrays, spec: BootstrapSpec = BootstrapSpec(),
                  cfg: PipelineConfig = PipelineConfig(), order=None) -> TauPosterior:
    """Bootstrap over games. ``order`` optionally permutes execution order."""
    if ev.n_games == 0:
        raise ReplicateDegenerate(-1, "no games")
    order = list(range(spec.B)) if order is None else [int(b) for b in order]
    if sorted(order) != list(range(spec.B)):
        raise ValueError("order must be a permutation of range(B)")
    if spec.threads > 1:
        with ThreadPoolExecutor(spec.threads) as ex:
            results = list(ex.map(lambda b: run_replicate(ev, cfg, spec.seed, b), order))
    else:
        results = [run_replicate(ev, cfg, spec.seed, b) for b in order]
    ok = sorted((r for r in results if r.error is None), key=lambda r: r.b)
    skipped = sorted((r.b, r.error) for r in results if r.error is not None)
    for b, why in skipped:
        log.warning("replicate %d skipped: %s", b, why)
    if len(skipped) > spec.max_skip_fraction * spec.B or not ok:
        b0, why = skipped[0]
        raise ReplicateDegenerate(b0, f"{len(skipped)} of {spec.B} replicates degenerate; first: {why}")
    return TauPosterior(spec.B, spec.seed, ok, pool(ok), skipped)


@dataclass
class DifferenceEstimate:
    estimate: float
    interval: tuple
    paired: bool
    n: int
    warning: str | None = None

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "interval": list(self.interval), "paired": self.paired,
                "n": self.n, "warning": self.warning}


def paired_difference(X: TauPosterior, region_x, Y: TauPosterior, region_y, strict: bool = False) -> DifferenceEstimate:
    """Median and 95% percentile interval of replicate-median differences X - Y."""
    paired = X.B == Y.B and X.seed == Y.seed
    if not paired and strict:
        raise UnpairedInputs("posteriors differ in B or seed")
    if paired:
        ym = {r.b: r.median(region_y) for r in Y.replicates}
        d = np.array([r.median(region_x) - ym[r.b] for r in X.replicates if r.b in ym])
        warning = None
    else:
        xm = np.array([r.median(region_x) for r in X.replicates])
        ym = np.array([r.median(region_y) for r in Y.replicates])
        d = (xm[:, None] - ym[None, :]).ravel()
        warning = "unpaired inputs: percentile interval over all cross pairs"
    d = np.round(d, 10)
    w = np.ones(len(d))
    return DifferenceEstimate(weighted_quantile(d, w, 0.5),
                              (weighted_quantile(d, w, 0.025), weighted_quantile(d, w, 0.975)),
                              paired, len(d), warning)
