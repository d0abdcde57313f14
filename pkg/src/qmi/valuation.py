"""League-average value function and next-state value quantiles.

Conventions. ``w(s)`` is the expected signed reward collected from entering
``s`` onward, its own reward included, so ``w = r + P w``. ``v = w - r`` is
the expected point advantage from the future only. A next-state atom is
``r(s') + v(s') = w(s')``.

With teams modelled as identical, ``w(mirror s) = -w(s)`` and the team-A
block satisfies ``(I - P_AA + P_AB') w_A = r_A`` where ``P_AB'`` maps each
team-B column to its mirrored team-A column.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .domain import (
    FOURTH_STATES,
    MIRROR,
    N_ACTIONS,
    N_FOURTH,
    N_STATES,
    STATE_TEAM,
    TAU_PERCENT,
    TEAM_A_STATES,
    Action,
    PlayState,
    RewardSpec,
    ScoreKind,
    ScoreState,
    TeamLabel,
    play_index,
    reward_vector,
    score_index,
    state_from_index,
)
from .errors import SingularSystem, UnobservedPair
from .kernels import quantile_positions
from .transitions import TransitionModel

RESIDUAL_TOL = 1e-8
KICKOFF_LANDING = play_index(TeamLabel.B, 1, 8, 10)  # opponent first-and-10 at its own 25


def default_row_fill(state: int) -> int:
    """Destination used for a team-A state that was never observed."""
    s = state_from_index(state)
    if isinstance(s, ScoreState):
        return KICKOFF_LANDING
    if s.yardline_bin == 1:
        return score_index(TeamLabel.A, ScoreKind.TD)
    return play_index(TeamLabel.A, 1, s.yardline_bin - 1, 10)


_FILL_DEST = np.array([default_row_fill(int(s)) for s in TEAM_A_STATES], dtype=np.int64)


def solve_chain(P: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Solve ``(I - P) w = r`` for a transient (substochastic) chain."""
    P = np.asarray(P, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    return _checked_solve(np.eye(len(r)) - P, r)


def _checked_solve(M: np.ndarray, r: np.ndarray) -> np.ndarray:
    if not np.any(r):
        return np.zeros_like(r)
    try:
        x = np.linalg.solve(M, r)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    resid = np.max(np.abs(M @ x - r))
    if resid > RESIDUAL_TOL * max(np.max(np.abs(r)), 1.0):
        raise SingularSystem(f"residual {resid:.3e} above tolerance")
    return x


@dataclass
class ValueTable:
    v: np.ndarray
    w: np.ndarray
    filled_states: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    reward: RewardSpec = RewardSpec()

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["state_index", "team", "kind", "down", "yardline_bin", "ytg_bucket",
                     "reward", "value", "filled"])
        filled = set(int(s) for s in self.filled_states)
        r = self.w - self.v
        for k in range(N_STATES):
            s = state_from_index(k)
            if isinstance(s, PlayState):
                row = [k, s.team.name, "play", s.down, s.yardline_bin, s.ytg_bucket]
            else:
                row = [k, s.team.name, s.kind.name, "", "", ""]
            wr.writerow(row + [repr(float(r[k])), repr(float(self.v[k])), int(k in filled)])
        return buf.getvalue()


def policy_matrix(model: TransitionModel) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic team-A rows (403 x 806) with unobserved rows filled."""
    counts = model.pooled_policy_counts()
    tot = counts.sum(axis=1)
    P = np.zeros(counts.shape)
    seen = tot > 0
    P[seen] = counts[seen] / tot[seen, None]
    missing = np.flatnonzero(~seen)
    P[missing, _FILL_DEST[missing]] = 1.0
    return P, TEAM_A_STATES[missing]


def solve_value(model: TransitionModel, spec: RewardSpec = RewardSpec()) -> ValueTable:
    P, filled = policy_matrix(model)
    return solve_policy_rows(P, spec, filled)


def solve_policy_rows(P: np.ndarray, spec: RewardSpec = RewardSpec(), filled=()) -> ValueTable:
    """Value table from row-stochastic team-A rows ``P`` (403 x 806)."""
    r = reward_vector(spec)
    A = TEAM_A_STATES
    M = np.eye(len(A)) - P[:, A] + P[:, MIRROR[A]]
    w_a = _checked_solve(M, r[A])
    w = np.zeros(N_STATES)
    w[A] = w_a
    w[MIRROR[A]] = -w_a
    return ValueTable(w - r, w, np.asarray(filled, dtype=np.int64), spec)


@dataclass
class NextStateValueDist:
    values: np.ndarray
    probs: np.ndarray

    def expectation(self) -> float:
        return float(self.values @ self.probs)


def next_state_dist(model: TransitionModel, vt: ValueTable, sigma: int, action: int) -> NextStateValueDist:
    row = model.action_counts[sigma, int(action)]
    total = row.sum()
    if total == 0:
        raise UnobservedPair(f"no transitions observed for sigma={sigma}, action={Action(action).name}")
    dest = np.flatnonzero(row)
    vals = vt.w[dest]
    uniq, inv = np.unique(vals, return_inverse=True)
    cnt = np.bincount(inv, weights=row[dest].astype(np.float64))
    return NextStateValueDist(uniq, cnt / total)


def quantile(dist: NextStateValueDist, tau: float) -> float:
    """inf{x : tau <= F(x)} over the atoms."""
    F = np.cumsum(dist.probs)
    k = int(np.searchsorted(F, tau, side="left"))
    return float(dist.values[min(k, len(dist.values) - 1)])


@dataclass
class QuantileSurface:
    """q[sigma, action, t] on the percent grid; NaN where unobserved.

    ``observed`` marks cells backed by transition data; on a smoothed surface
    the other cells were filled by the smoother.
    """

    q: np.ndarray
    observed: np.ndarray
    provenance: str = "raw"
    percents: np.ndarray = field(default_factory=lambda: TAU_PERCENT.copy())
    method: str = ""

    @property
    def complete(self) -> bool:
        return not np.isnan(self.q).any()

    def to_json(self) -> str:
        cells = []
        for sig in range(N_FOURTH):
            for a in range(N_ACTIONS):
                vals = self.q[sig, a]
                cells.append({
                    "state_index": int(FOURTH_STATES[sig]),
                    "yardline_bin": sig // 10 + 1,
                    "ytg_bucket": sig % 10 + 1,
                    "action": Action(a).name,
                    "provenance": ("raw" if self.observed[sig, a] else "missing")
                    if self.provenance == "raw" else ("smoothed" if self.observed[sig, a] else "filled"),
                    "q": [None if np.isnan(x) else float(x) for x in vals],
                })
        return json.dumps({"format": "qmi.quantile_surface/1", "provenance": self.provenance,
                           "method": self.method,
                           "tau": [int(p) / 100 for p in self.percents], "cells": cells}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "QuantileSurface":
        d = json.loads(text)
        q = np.full((N_FOURTH, N_ACTIONS, len(d["tau"])), np.nan)
        obs = np.zeros((N_FOURTH, N_ACTIONS), bool)
        for c in d["cells"]:
            sig = (c["yardline_bin"] - 1) * 10 + c["ytg_bucket"] - 1
            a = Action[c["action"]]
            q[sig, a] = [np.nan if x is None else x for x in c["q"]]
            obs[sig, a] = c["provenance"] in ("raw", "smoothed")
        pct = np.array([round(t * 100) for t in d["tau"]], dtype=np.int64)
        return cls(q, obs, d["provenance"], pct, d.get("method", ""))


def surface_from_counts(action_counts: np.ndarray, w: np.ndarray,
                        percents: np.ndarray = TAU_PERCENT) -> QuantileSurface:
    """Exact quantiles for every observed (sigma, a) row.

    All rows share the atom values ``w``, so one global sort serves every
    row; the tau-quantile is the first sorted state whose cumulative count
    reaches ``tau * total``, compared in integers.
    """
    order = np.argsort(w, kind="stable")
    cum = np.cumsum(action_counts.reshape(-1, N_STATES)[:, order], axis=1)
    cum = np.ascontiguousarray(cum, dtype=np.int64)
    totals = np.ascontiguousarray(cum[:, -1])
    pos = quantile_positions(cum, totals, np.ascontiguousarray(percents, dtype=np.int64))
    pos = np.asarray(pos)
    q = np.where(pos >= 0, w[order][np.maximum(pos, 0)], np.nan)
    q = q.reshape(N_FOURTH, N_ACTIONS, len(percents))
    return QuantileSurface(q, (totals > 0).reshape(N_FOURTH, N_ACTIONS), "raw", np.asarray(percents).copy())


def surface_from_probs(action_probs: np.ndarray, w: np.ndarray, percents: np.ndarray = TAU_PERCENT,
                       slack: float = 1e-12) -> QuantileSurface:
    """Quantiles from exact (float) probabilities, as used for oracle surfaces.

    ``slack`` absorbs rounding in the cumulative sums so a cumulative mass of
    exactly tau is recognised as reaching it.
    """
    order = np.argsort(w, kind="stable")
    rows = action_probs.reshape(-1, N_STATES)
    F = np.cumsum(rows[:, order], axis=1)
    taus = np.asarray(percents) / 100.0
    observed = rows.sum(axis=1) > 0
    q = np.full((rows.shape[0], len(percents)), np.nan)
    ws = w[order]
    for i in np.flatnonzero(observed):
        k = np.searchsorted(F[i], taus - slack, side="left")
        q[i] = ws[np.minimum(k, N_STATES - 1)]
    return QuantileSurface(q.reshape(N_FOURTH, N_ACTIONS, len(percents)),
                           observed.reshape(N_FOURTH, N_ACTIONS), "raw", np.asarray(percents).copy())


def build_surface(model: TransitionModel, vt: ValueTable) -> QuantileSurface:
    return surface_from_counts(model.action_counts, vt.w)
