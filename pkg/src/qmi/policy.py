"""Tau-optimal decision maps and observed decision frequencies."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .domain import N_ACTIONS, N_FOURTH, Action, tau_grid_index
from .errors import AllCellsMissing
from .valuation import QuantileSurface


@dataclass
class DecisionMap:
    actions: np.ndarray  # (100,) action codes
    tau: float
    provenance: str = "smoothed"

    def to_rows(self):
        for sig, a in enumerate(self.actions):
            yield sig // 10 + 1, sig % 10 + 1, Action(int(a)).name


@dataclass
class FrequencyMap:
    counts: np.ndarray  # (100, 3)

    def majority(self) -> np.ndarray:
        """Most frequent action per state (risk-order tie break); -1 where no decisions."""
        out = np.argmax(self.counts, axis=1)
        out[self.counts.sum(axis=1) == 0] = -1
        return out

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def all_maps(surface: QuantileSurface) -> np.ndarray:
    """(n_tau, 100) argmax actions for every grid tau.

    ``np.argmax`` returns the first maximum, and actions are stored in risk
    order, so exact ties resolve to PUNT, then FGA, then GO.
    """
    if not surface.complete:
        raise AllCellsMissing("surface has missing cells; smooth it before extracting maps")
    return np.argmax(surface.q, axis=1).T.copy()


def tau_optimal_map(surface: QuantileSurface, tau: float) -> DecisionMap:
    t = tau_grid_index(tau)
    if not surface.complete:
        raise AllCellsMissing("surface has missing cells; smooth it before extracting maps")
    return DecisionMap(np.argmax(surface.q[:, :, t], axis=1), int(surface.percents[t]) / 100, surface.provenance)


def observed_frequency_map(sigma, action) -> FrequencyMap:
    sigma = np.asarray(sigma, dtype=np.int64)
    action = np.asarray(action, dtype=np.int64)
    counts = np.bincount(sigma * N_ACTIONS + action, minlength=N_FOURTH * N_ACTIONS)
    return FrequencyMap(counts.reshape(N_FOURTH, N_ACTIONS).astype(np.int64))


def maps_to_csv(maps: np.ndarray, percents: np.ndarray) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["tau", "yardline_bin", "ytg_bucket", "action"])
    for t, pct in enumerate(percents):
        for sig in range(N_FOURTH):
            wr.writerow([f"{int(pct) / 100:.2f}", sig // 10 + 1, sig % 10 + 1, Action(int(maps[t, sig])).name])
    return buf.getvalue()


def frequency_to_csv(fm: FrequencyMap) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["yardline_bin", "ytg_bucket", "action", "count"])
    for sig in range(N_FOURTH):
        for a in range(N_ACTIONS):
            wr.writerow([sig // 10 + 1, sig % 10 + 1, Action(a).name, int(fm.counts[sig, a])])
    return buf.getvalue()
