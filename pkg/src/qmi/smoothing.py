"""Doubly monotone regularization of quantile layers.

A layer is a 10x10 grid indexed ``[yardline_bin - 1, ytg_bucket - 1]``; the
fit is nonincreasing along both axes. Observed cells are projected onto the
monotone cone in weighted least squares (Hildreth's method on the
transitive reduction of the product order, then an exact block-mean polish).
Unobserved cells take the smallest monotone extension of the fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import N_ACTIONS, N_BINS, N_FOURTH, N_YTG
from .errors import AllCellsMissing
from .kernels import antitone_project
from .valuation import QuantileSurface

METHOD = "weighted monotone-cone projection (bivariate, nonincreasing), smallest-extension fill"

_I, _J = np.divmod(np.arange(N_BINS * N_YTG), N_YTG)
# LEQ[c, d]: cell c precedes d in the product order
LEQ = (_I[:, None] <= _I[None, :]) & (_J[:, None] <= _J[None, :])


@dataclass(frozen=True)
class SmoothSpec:
    basis_dim: int = 4  # recorded for provenance, unused by the cone projection
    tol: float = 1e-13
    max_sweeps: int = 200000
    method: str = METHOD


def cover_edges(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Covering pairs (c, d) of the product order restricted to cells in ``mask``.

    Returned as flat cell indices with c strictly preceding d and no masked
    cell strictly between them.
    """
    idx = np.flatnonzero(np.ravel(mask))
    L = LEQ[np.ix_(idx, idx)].copy()
    np.fill_diagonal(L, False)
    Li = L.astype(np.int64)
    between = (Li @ Li) > 0
    lo, hi = np.nonzero(L & ~between)
    return idx[lo], idx[hi]


def is_monotone(grid: np.ndarray) -> bool:
    g = np.asarray(grid)
    return bool(np.all(np.diff(g, axis=0) <= 0) and np.all(np.diff(g, axis=1) <= 0))


def _feasible(x, lo, hi) -> bool:
    return bool(np.all(x[lo] >= x[hi]))


def _polish(x, lam, y, w, lo, hi):
    """Replace near-converged blocks by their exact weighted means."""
    n = len(x)
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    scale = 1.0 + float(np.max(np.abs(y)))
    for k in np.flatnonzero(lam > 0):
        a, b = lo[k], hi[k]
        if abs(x[a] - x[b]) <= 1e-9 * scale:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
    roots = np.array([find(a) for a in range(n)])
    _, grp = np.unique(roots, return_inverse=True)
    means = np.bincount(grp, weights=w * y) / np.bincount(grp, weights=w)
    return means[grp]


def project_observed(y: np.ndarray, w: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                     spec: SmoothSpec = SmoothSpec()) -> np.ndarray:
    """Weighted LS projection of ``y`` onto {x : x[lo] >= x[hi]}."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    if len(lo) == 0 or _feasible(y, lo, hi):
        return y.copy()
    w = np.ascontiguousarray(w, dtype=np.float64)
    x, lam, _ = antitone_project(y, w, np.ascontiguousarray(lo, dtype=np.int64),
                                 np.ascontiguousarray(hi, dtype=np.int64), spec.tol, spec.max_sweeps)
    x = np.asarray(x)
    lam = np.asarray(lam)
    polished = _polish(x, lam, y, w, lo, hi)
    if _feasible(polished, lo, hi) and w @ (polished - y) ** 2 <= w @ (x - y) ** 2 * (1 + 1e-12) + 1e-300:
        return polished
    return x


def _fill_and_clean(fit_obs: np.ndarray, obs_mask: np.ndarray, floor: float | None = None) -> np.ndarray:
    """Complete grid: observed cells keep the fit, missing cells take the smallest
    value compatible with monotonicity, then a running-minimum pass makes the
    ordering exact in floating point.

    A missing cell with no observed cell after it in the product order is
    unbounded below; it gets ``floor`` (default: the smallest observed fit).
    """
    flat = np.full(N_BINS * N_YTG, np.nan)
    obs = np.flatnonzero(obs_mask.ravel())
    flat[obs] = fit_obs
    missing = np.flatnonzero(~obs_mask.ravel())
    if len(missing):
        floor = float(np.min(fit_obs)) if floor is None else min(float(floor), float(np.min(fit_obs)))
        dom = LEQ[np.ix_(missing, obs)]  # missing c precedes observed d
        cand = np.where(dom, fit_obs[None, :], -np.inf).max(axis=1)
        flat[missing] = np.where(np.isfinite(cand), cand, floor)
    grid = flat.reshape(N_BINS, N_YTG)
    grid = np.minimum.accumulate(grid, axis=0)
    grid = np.minimum.accumulate(grid, axis=1)
    return grid


def smooth_layer(layer: np.ndarray, weights: np.ndarray, spec: SmoothSpec = SmoothSpec(),
                 edges: tuple[np.ndarray, np.ndarray] | None = None, floor: float | None = None) -> np.ndarray:
    """Fit a complete nonincreasing grid to the observed cells of ``layer``.

    Cells with NaN value or zero weight are unobserved. ``edges`` may pass a
    precomputed :func:`cover_edges` result for the observed mask; ``floor`` is
    the fill for missing cells that nothing bounds from below.
    """
    layer = np.asarray(layer, dtype=np.float64).reshape(N_BINS, N_YTG)
    weights = np.asarray(weights, dtype=np.float64).reshape(N_BINS, N_YTG)
    mask = ~np.isnan(layer) & (weights > 0)
    if not mask.any():
        raise AllCellsMissing("layer has no observed cell with positive weight")
    if edges is None:
        edges = cover_edges(mask)
    obs = np.flatnonzero(mask.ravel())
    pos = np.full(N_BINS * N_YTG, -1)
    pos[obs] = np.arange(len(obs))
    lo, hi = pos[edges[0]], pos[edges[1]]
    fit = project_observed(layer.ravel()[obs], weights.ravel()[obs], lo, hi, spec)
    return _fill_and_clean(fit, mask, floor)


def smooth_surface(raw: QuantileSurface, weights: np.ndarray, spec: SmoothSpec = SmoothSpec()) -> QuantileSurface:
    """Smooth every (action, tau) layer, then sort each cell along tau.

    ``weights`` is (100, 3): the transition-row totals behind each cell.
    Missing cells that no observation bounds from below are filled with the
    lowest observed value of any action at the same tau, so an action is
    never made attractive where it was not observed.
    """
    q = raw.q
    n_tau = q.shape[2]
    out = np.empty_like(q)
    w = np.where(raw.observed, np.asarray(weights, dtype=np.float64), 0.0)
    floors = np.nanmin(np.where(w[:, :, None] > 0, q, np.nan), axis=(0, 1)) if (w > 0).any() else None
    for a in range(N_ACTIONS):
        wa = w[:, a]
        mask = wa > 0
        if not mask.any():
            raise AllCellsMissing(f"no observed cells for action {a}")
        edges = cover_edges(mask.reshape(N_BINS, N_YTG))
        cache: dict[bytes, np.ndarray] = {}
        for t in range(n_tau):
            col = q[:, a, t]
            key = col[mask].tobytes() + floors[t].tobytes()
            hit = cache.get(key)
            if hit is None:
                hit = smooth_layer(col.reshape(N_BINS, N_YTG), wa.reshape(N_BINS, N_YTG), spec, edges,
                                   floors[t]).ravel()
                cache[key] = hit
            out[:, a, t] = hit
    out.sort(axis=2)
    return QuantileSurface(out, raw.observed.copy(), "smoothed", raw.percents.copy(),
                           f"{spec.method}; basis_dim={spec.basis_dim} (advisory)")


def weighted_sse(grid: np.ndarray, layer: np.ndarray, weights: np.ndarray) -> float:
    layer = np.asarray(layer, dtype=np.float64)
    m = ~np.isnan(layer) & (np.asarray(weights) > 0)
    d = np.asarray(grid)[m] - layer[m]
    return float(np.asarray(weights)[m] @ (d * d))


def best_constant_sse(layer: np.ndarray, weights: np.ndarray) -> float:
    layer = np.asarray(layer, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    m = ~np.isnan(layer) & (w > 0)
    c = (w[m] @ layer[m]) / w[m].sum()
    return float(w[m] @ (layer[m] - c) ** 2)
