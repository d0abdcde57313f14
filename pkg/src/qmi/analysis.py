"""Fourth-down performance: average points gained per stratum and the OLS
model relating it to estimated risk tolerance.

A stratum is (coach, team, season, win-probability bin, field region). The
team is carried so that the per-team-season Elo covariate can be joined.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .domain import N_ACTIONS, N_FOURTH, SIGMA_REGION, STATE_TEAM, FieldRegion, TeamLabel
from .errors import ConfigError, EmptyRegion, MissingColumn, RankDeficientDesign
from .ingest import FilterSpec, GameLog, canonical_sigma
from .inverse import solve_partitioned
from .valuation import ValueTable

MIN_DECISIONS = 25
DEFAULT_WP_BINS = ((0.0, 0.2), (0.2, 0.4), (0.4, 0.6), (0.6, 0.8), (0.8, 1.0))
COVARIATES = ("tau_hat", "elo", "own_half")


@dataclass(frozen=True, order=True)
class StratumKey:
    coach: str
    team: str
    season: int
    wp_bin: int
    region: int

    def label(self, wp_bins=DEFAULT_WP_BINS) -> str:
        lo, hi = wp_bins[self.wp_bin]
        return f"{lo:g}-{hi:g}"


@dataclass
class PointsGainedRecord:
    key: StratumKey
    avg_points_gained: float
    n: int
    elo: float = math.nan
    tau_hat: float = math.nan

    @property
    def own_half(self) -> int:
        return int(self.key.region == FieldRegion.OWN_HALF)


def wp_bin_of(wp: float, bins=DEFAULT_WP_BINS) -> int | None:
    """Index of the (lo, hi] bin containing ``wp``; the first bin is closed at its lower end."""
    if math.isnan(wp):
        return None
    for k, (lo, hi) in enumerate(bins):
        if (wp > lo or (k == 0 and wp >= lo)) and wp <= hi:
            return k
    return None


def _decision_plays(logs: Iterable[GameLog], f: FilterSpec, wp_bins):
    """Yield (key, game_idx, entry_idx, next_idx) for qualifying fourth-down decisions."""
    for g_idx, g in enumerate(logs):
        ents = g.entries
        nxt = dict(g.transitions())
        for i, e in enumerate(ents):
            if e.is_score or e.nullified or e.action is None or i not in nxt:
                continue
            rec = e.record
            if not f.matches_decision(rec):
                continue
            k = wp_bin_of(rec.wp, wp_bins)
            if k is None:
                continue
            region = int(SIGMA_REGION[canonical_sigma(rec)])
            yield StratumKey(rec.coach, rec.posteam, rec.season, k, region), g_idx, i, nxt[i]


def play_difference(vt: ValueTable, s: int, s_next: int, include_reward: bool = True) -> float:
    """Points gained by the team in possession at ``s`` across one transition.

    With ``include_reward`` the next state is credited with its reward, so a
    scoring play counts the realized points: r(s') + v(s') - v(s).
    """
    nxt = vt.w[s_next] if include_reward else vt.v[s_next]
    d = nxt - vt.v[s]
    return float(-d if STATE_TEAM[s] == TeamLabel.B else d)


def points_gained(logs: Sequence[GameLog], vt: ValueTable, f: FilterSpec = FilterSpec(),
                  wp_bins=DEFAULT_WP_BINS, include_reward: bool = True) -> list[PointsGainedRecord]:
    """Average points gained per stratum over fourth-down decisions with a successor state."""
    sums: dict[StratumKey, float] = {}
    counts: dict[StratumKey, int] = {}
    for key, g_idx, i, j in _decision_plays(logs, f, wp_bins):
        ents = logs[g_idx].entries
        d = play_difference(vt, ents[i].state, ents[j].state, include_reward)
        sums[key] = sums.get(key, 0.0) + d
        counts[key] = counts.get(key, 0) + 1
    return [PointsGainedRecord(k, sums[k] / counts[k], counts[k]) for k in sorted(sums)]


def stratum_decision_counts(logs: Sequence[GameLog], f: FilterSpec = FilterSpec(),
                            wp_bins=DEFAULT_WP_BINS) -> dict:
    """(coach, team, season, wp_bin) -> (100, 3) decision counts, both regions together."""
    out: dict[tuple, np.ndarray] = {}
    for key, g_idx, i, _ in _decision_plays(logs, f, wp_bins):
        e = logs[g_idx].entries[i]
        k = (key.coach, key.team, key.season, key.wp_bin)
        N = out.get(k)
        if N is None:
            N = out[k] = np.zeros((N_FOURTH, N_ACTIONS), dtype=np.int64)
        N[canonical_sigma(e.record), int(e.action)] += 1
    return out


def stratum_tau_hat(strata_counts: dict, maps: np.ndarray) -> dict:
    """Point estimate per (coach, team, season, wp_bin, region) against league maps."""
    out = {}
    for k in sorted(strata_counts):
        res = solve_partitioned(strata_counts[k], maps)
        for reg, ts in res.sets.items():
            out[StratumKey(*k, int(FieldRegion[reg]))] = ts.point_estimate
    return out


def attach_covariates(records: Sequence[PointsGainedRecord], elo: dict, tau_hat: dict) -> list[PointsGainedRecord]:
    """Fill ``elo`` from {(team, season): rating} and ``tau_hat`` from {StratumKey: tau}."""
    out = []
    for r in records:
        e = elo.get((r.key.team, r.key.season), math.nan)
        t = tau_hat.get(r.key, math.nan)
        out.append(PointsGainedRecord(r.key, r.avg_points_gained, r.n, float(e), float(t)))
    return out


def regression_rows(records: Sequence[PointsGainedRecord], min_n: int = MIN_DECISIONS):
    """Response and covariate matrix from records with n >= min_n and complete covariates."""
    keep = [r for r in records if r.n >= min_n and not math.isnan(r.elo) and not math.isnan(r.tau_hat)]
    y = np.array([r.avg_points_gained for r in keep], dtype=np.float64)
    X = np.array([[r.tau_hat, r.elo, r.own_half] for r in keep], dtype=np.float64).reshape(-1, 3)
    return y, X, keep


# --------------------------------------------------------------------------- OLS


@dataclass
class OlsFit:
    names: tuple
    coef: np.ndarray
    se: np.ndarray
    residual_se: float
    r2: float
    adj_r2: float
    partial_r2: np.ndarray  # per non-intercept covariate
    f_stat: float
    df: int
    n: int
    sse: float = field(repr=False, default=math.nan)

    @property
    def t(self) -> np.ndarray:
        return self.coef / self.se

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["term", "estimate", "std_error", "t_value", "partial_r2"])
        for k, name in enumerate(self.names):
            pr = "" if k == 0 else repr(float(self.partial_r2[k - 1]))
            wr.writerow([name, repr(float(self.coef[k])), repr(float(self.se[k])), repr(float(self.t[k])), pr])
        for name, val in (("n", self.n), ("df", self.df), ("residual_se", self.residual_se),
                          ("r2", self.r2), ("adj_r2", self.adj_r2), ("f_stat", self.f_stat)):
            wr.writerow([name, repr(float(val)) if isinstance(val, float) else val, "", "", ""])
        return buf.getvalue()


def _lstsq(Z: np.ndarray, y: np.ndarray):
    coef, _, rank, sv = np.linalg.lstsq(Z, y, rcond=None)
    if rank < Z.shape[1] or sv[-1] <= sv[0] * 1e-12:
        raise RankDeficientDesign(f"design rank {rank} < {Z.shape[1]} columns")
    r = y - Z @ coef
    return coef, float(r @ r)


def ols_fit(y: np.ndarray, X: np.ndarray, names: Sequence[str] = COVARIATES) -> OlsFit:
    """OLS of ``y`` on an intercept plus the columns of ``X``."""
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    n, k = X.shape
    if n < k + 2:
        raise ConfigError(f"need at least {k + 2} records, got {n}")
    Z = np.column_stack([np.ones(n), X])
    coef, sse = _lstsq(Z, y)
    df = n - k - 1
    s2 = sse / df
    # (Z'Z)^-1 from the SVD of Z, which stays accurate for moderately scaled designs
    _, sv, Vt = np.linalg.svd(Z, full_matrices=False)
    cov = (Vt.T / sv ** 2) @ Vt * s2
    se = np.sqrt(np.diag(cov))
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else 0.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / df
    partial = np.empty(k)
    for j in range(k):
        _, sse_red = _lstsq(np.delete(Z, j + 1, axis=1), y)
        partial[j] = (sse_red - sse) / sse_red if sse_red > 0 else 0.0
    f_stat = ((sst - sse) / k) / s2 if s2 > 0 else math.inf
    return OlsFit(("intercept",) + tuple(names), coef, se, math.sqrt(s2), float(r2), float(adj),
                  np.clip(partial, 0.0, 1.0), float(f_stat), df, n, sse)


def fit_points_gained(records: Sequence[PointsGainedRecord], min_n: int = MIN_DECISIONS) -> OlsFit:
    y, X, _ = regression_rows(records, min_n)
    if len(y) < 5:
        raise EmptyRegion(f"only {len(y)} strata with n >= {min_n} and complete covariates")
    return ols_fit(y, X)


def records_to_csv(records: Sequence[PointsGainedRecord], wp_bins=DEFAULT_WP_BINS,
                   include_reward: bool = True) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["coach", "team", "season", "wp_range", "region", "n", "avg_points_gained",
                 "elo", "tau_hat", "credits_reward"])
    for r in records:
        k = r.key
        wr.writerow([k.coach, k.team, k.season, k.label(wp_bins), FieldRegion(k.region).name, r.n,
                     repr(r.avg_points_gained), "" if math.isnan(r.elo) else repr(r.elo),
                     "" if math.isnan(r.tau_hat) else repr(r.tau_hat), int(include_reward)])
    return buf.getvalue()


def read_elo_csv(path) -> dict:
    """Per team-season Elo from a CSV with columns team, season, elo."""
    df = pd.read_csv(path)
    missing = {"team", "season", "elo"} - set(df.columns)
    if missing:
        raise MissingColumn(f"elo file lacks columns {sorted(missing)}")
    return {(str(t), int(s)): float(e) for t, s, e in zip(df["team"], df["season"], df["elo"])}
