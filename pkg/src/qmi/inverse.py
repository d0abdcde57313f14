"""Hamming-loss inverse problem over the tau grid.

Decisions enter as a (100, 3) count matrix ``N[sigma, a]``; maps as an
(n_tau, 100) array of actions. Everything reduces to the mismatch matrix
``M[t, sigma] = N_sigma - N[sigma, map_t(sigma)]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .domain import N_BINS, N_FOURTH, N_YTG, SIGMA_REGION, TAU_PERCENT, FieldRegion
from .errors import EmptyRegion


def mismatch_matrix(N: np.ndarray, maps: np.ndarray) -> np.ndarray:
    N = np.asarray(N, dtype=np.int64)
    hit = np.take_along_axis(N[None, :, :], maps[:, :, None], axis=2)[:, :, 0]
    return N.sum(axis=1)[None, :] - hit


def hamming_loss(sigma, action, map_actions, region_mask=None) -> float:
    """Fraction of decisions whose action differs from the map at that state."""
    sigma = np.asarray(sigma, dtype=np.int64)
    action = np.asarray(action, dtype=np.int64)
    if region_mask is not None:
        keep = np.asarray(region_mask, bool)[sigma]
        sigma, action = sigma[keep], action[keep]
    if len(sigma) == 0:
        raise EmptyRegion("no decisions in region")
    return float(np.mean(np.asarray(map_actions)[sigma] != action))


def median_percent(members: np.ndarray) -> int:
    """Median of a sorted set of grid percents.

    For an even count the midpoint of the two central values is used; when
    that falls between grid points it is rounded toward 50.
    """
    m = np.sort(np.asarray(members, dtype=np.int64))
    n = len(m)
    if n % 2:
        return int(m[n // 2])
    s = int(m[n // 2 - 1] + m[n // 2])
    if s % 2 == 0:
        return s // 2
    return (s + 1) // 2 if s < 100 else (s - 1) // 2


@dataclass
class LossCurve:
    loss: np.ndarray  # per grid tau
    n: int
    percents: np.ndarray = field(default_factory=lambda: TAU_PERCENT.copy())


@dataclass
class TauSet:
    members: np.ndarray  # grid percents achieving the minimum
    point_estimate: float
    min_loss: float
    n: int

    def to_dict(self) -> dict:
        return {"members": [int(p) / 100 for p in self.members], "point_estimate": self.point_estimate,
                "min_loss": self.min_loss, "n": self.n}


def tau_set_from_mismatch(mis: np.ndarray, n: int, percents: np.ndarray = TAU_PERCENT) -> tuple[TauSet, LossCurve]:
    """``mis`` holds integer mismatch counts per grid tau for one region."""
    if n <= 0:
        raise EmptyRegion("no decisions in region")
    mis = np.asarray(mis, dtype=np.int64)
    best = int(mis.min())
    members = np.asarray(percents)[mis == best]
    ts = TauSet(members, median_percent(members) / 100, best / n, int(n))
    return ts, LossCurve(mis / n, int(n), np.asarray(percents).copy())


def solve_single_tau(N: np.ndarray, maps: np.ndarray, percents: np.ndarray = TAU_PERCENT):
    M = mismatch_matrix(N, maps)
    return tau_set_from_mismatch(M.sum(axis=1), int(np.sum(N)), percents)


@dataclass
class PartitionResult:
    sets: dict
    curves: dict
    errors: dict

    @property
    def joint_loss(self) -> float:
        n = sum(c.n for c in self.curves.values())
        return sum(s.min_loss * s.n for s in self.sets.values()) / n if n else float("nan")


def solve_partitioned(N: np.ndarray, maps: np.ndarray, region_of=SIGMA_REGION,
                      percents: np.ndarray = TAU_PERCENT) -> PartitionResult:
    """Independent argmin per region; regions with no decisions are reported, not fatal."""
    N = np.asarray(N, dtype=np.int64)
    M = mismatch_matrix(N, maps)
    sets, curves, errors = {}, {}, {}
    for reg in np.unique(region_of):
        mask = region_of == reg
        label = FieldRegion(int(reg)).name if region_of is SIGMA_REGION else int(reg)
        try:
            ts, lc = tau_set_from_mismatch(M[:, mask].sum(axis=1), int(N[mask].sum()), percents)
        except EmptyRegion as exc:
            errors[label] = str(exc)
            continue
        sets[label], curves[label] = ts, lc
    return PartitionResult(sets, curves, errors)


@dataclass(frozen=True)
class CandidatePartition:
    shape: int  # 1..4
    x: int      # yardline bin anchor
    y: int      # ytg bucket anchor
    mask: tuple  # 100 booleans, True for the first subset

    @property
    def first(self) -> np.ndarray:
        return np.array(self.mask, dtype=bool)

    def label(self) -> str:
        ops = {1: ("<", "<"), 2: ("<", ">="), 3: (">=", "<"), 4: (">=", ">=")}[self.shape]
        return f"rho{self.shape}(x={self.x},y={self.y}): bin {ops[0]} {self.x} & ytg {ops[1]} {self.y}"


DEDUPE_CONVENTION = ("anchors x, y over 1..10 for all four shapes; drop partitions with an empty side; "
                     "two candidates are the same when they induce the same unordered pair of subsets; "
                     "the first in (shape, x, y) order is kept")
REFERENCE_COUNT = 344


def enumerate_partitions() -> list[CandidatePartition]:
    X = np.arange(N_FOURTH) // N_YTG + 1
    Y = np.arange(N_FOURTH) % N_YTG + 1
    seen = set()
    out = []
    for shape in (1, 2, 3, 4):
        for x in range(1, N_BINS + 1):
            for y in range(1, N_YTG + 1):
                cx = X < x if shape in (1, 2) else X >= x
                cy = Y < y if shape in (1, 3) else Y >= y
                m = cx & cy
                if not m.any() or m.all():
                    continue
                key = min(m.tobytes(), (~m).tobytes())
                if key in seen:
                    continue
                seen.add(key)
                out.append(CandidatePartition(shape, x, y, tuple(bool(b) for b in m)))
    return out


def singleton_lower_bound(N: np.ndarray, maps: np.ndarray) -> float:
    """Loss when every state may take its own tau: per state, the best achievable match."""
    M = mismatch_matrix(N, maps)
    n = int(np.sum(N))
    if n == 0:
        raise EmptyRegion("no decisions")
    return float(M.min(axis=0).sum() / n)


@dataclass
class PartitionRanking:
    ranked: list  # (CandidatePartition, joint loss), ascending
    lower_bound: float
    count: int
    reference_count: int = REFERENCE_COUNT
    convention: str = DEDUPE_CONVENTION

    def to_json(self) -> str:
        return json.dumps({
            "count": self.count, "reference_count": self.reference_count,
            "count_deviation": self.count - self.reference_count, "dedupe_convention": self.convention,
            "singleton_lower_bound": self.lower_bound,
            "ranked": [{"shape": p.shape, "x": p.x, "y": p.y, "label": p.label(), "loss": loss}
                       for p, loss in self.ranked],
        }, sort_keys=True)


def partition_search(N: np.ndarray, maps: np.ndarray, candidates=None) -> PartitionRanking:
    if candidates is None:
        candidates = enumerate_partitions()
    M = mismatch_matrix(N, maps)
    n = int(np.sum(N))
    if n == 0:
        raise EmptyRegion("no decisions")
    masks = np.array([c.mask for c in candidates], dtype=np.int64)  # (K, 100)
    first = M @ masks.T
    second = M @ (1 - masks).T
    joint = (first.min(axis=0) + second.min(axis=0)) / n
    order = np.lexsort((np.arange(len(candidates)), joint))
    ranked = [(candidates[k], float(joint[k])) for k in order]
    return PartitionRanking(ranked, singleton_lower_bound(N, maps), len(candidates))
