"""Empirical transition counts for the league-average chain and for fourth-down actions.

Counting is done once into flat event arrays tagged with the game they came
from. A point estimate weights every game once; a bootstrap replicate
weights each game by its resampling multiplicity. Counts are integers either
way, so normalization is exact up to one division per cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .domain import (
    FOURTH_STATES,
    MIRROR,
    N_ACTIONS,
    N_FOURTH,
    N_STATES,
    STATE_TEAM,
    Action,
    TeamLabel,
    play_index,
    yardline_bin,
)
from .ingest import FilterSpec, GameLog, canonical_sigma

GO_LIKE = {"pass", "run"}


@dataclass(frozen=True)
class AugmentationPolicy:
    enabled: bool = True
    source_down: int = 3


@dataclass
class TransitionModel:
    """Integer transition counts plus derived probabilities.

    ``policy_counts[s, s2]`` counts observed consecutive pairs in game-log
    orientation (team A = home). ``action_counts[sigma, a, s2]`` counts
    fourth-down outcomes seen from the deciding team, so ``s2`` is relative
    to that team.
    """

    policy_counts: np.ndarray = field(default_factory=lambda: np.zeros((N_STATES, N_STATES), np.int64))
    action_counts: np.ndarray = field(default_factory=lambda: np.zeros((N_FOURTH, N_ACTIONS, N_STATES), np.int64))
    augmented: bool = False

    def policy_totals(self) -> np.ndarray:
        return self.policy_counts.sum(axis=1)

    def action_totals(self) -> np.ndarray:
        return self.action_counts.sum(axis=2)

    def policy_probs(self) -> np.ndarray:
        """Row-normalized policy counts; unobserved rows stay all zero."""
        tot = self.policy_totals()
        out = np.zeros(self.policy_counts.shape)
        rows = tot > 0
        out[rows] = self.policy_counts[rows] / tot[rows, None]
        return out

    def action_probs(self) -> np.ndarray:
        tot = self.action_totals()
        out = np.zeros(self.action_counts.shape)
        rows = tot > 0
        out[rows] = self.action_counts[rows] / tot[rows][:, None]
        return out

    @property
    def unobserved_policy_rows(self) -> np.ndarray:
        return np.flatnonzero(self.policy_totals() == 0)

    @property
    def unobserved_pairs(self) -> np.ndarray:
        """Boolean (100, 3) mask of fourth-down state-action pairs with no data."""
        return self.action_totals() == 0

    def pooled_policy_counts(self) -> np.ndarray:
        """Counts from every team-A row plus the mirrored team-B rows (identical teams)."""
        a_rows = np.flatnonzero(STATE_TEAM == TeamLabel.A)
        b_rows = MIRROR[a_rows]
        return self.policy_counts[a_rows] + self.policy_counts[b_rows][:, MIRROR]

    def merge(self, other: "TransitionModel") -> "TransitionModel":
        return TransitionModel(self.policy_counts + other.policy_counts,
                               self.action_counts + other.action_counts,
                               self.augmented or other.augmented)

    def to_json(self) -> str:
        pol = {}
        for s in np.flatnonzero(self.policy_totals()):
            row = self.policy_counts[s]
            pol[str(s)] = {str(d): int(row[d]) for d in np.flatnonzero(row)}
        act = {}
        tot = self.action_totals()
        for sig, a in zip(*np.nonzero(tot)):
            row = self.action_counts[sig, a]
            act[f"{FOURTH_STATES[sig]}:{Action(a).name}"] = {str(d): int(row[d]) for d in np.flatnonzero(row)}
        return json.dumps({"format": "qmi.transition_model/1", "augmented": self.augmented,
                           "policy_counts": pol, "action_counts": act}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TransitionModel":
        d = json.loads(text)
        m = cls(augmented=bool(d.get("augmented", False)))
        for s, row in d["policy_counts"].items():
            for s2, c in row.items():
                m.policy_counts[int(s), int(s2)] = c
        sigma_of = {int(st): k for k, st in enumerate(FOURTH_STATES)}
        for key, row in d["action_counts"].items():
            st, name = key.split(":")
            for s2, c in row.items():
                m.action_counts[sigma_of[int(st)], Action[name], int(s2)] = c
        return m


@dataclass
class EventArrays:
    """Countable events extracted from game logs, tagged by game position."""

    game_ids: list
    pol_game: np.ndarray
    pol_src: np.ndarray
    pol_dst: np.ndarray
    act_game: np.ndarray
    act_sigma: np.ndarray
    act_action: np.ndarray
    act_dst: np.ndarray
    aug_game: np.ndarray
    aug_sigma: np.ndarray
    aug_dst: np.ndarray
    dec_game: np.ndarray
    dec_sigma: np.ndarray
    dec_action: np.ndarray

    @property
    def n_games(self) -> int:
        return len(self.game_ids)

    def counts(self, multiplicity: np.ndarray | None = None,
               aug: AugmentationPolicy = AugmentationPolicy()) -> TransitionModel:
        """Transition counts with each game weighted by ``multiplicity`` (default 1)."""
        if multiplicity is None:
            multiplicity = np.ones(self.n_games, dtype=np.int64)
        mult = np.asarray(multiplicity, dtype=np.int64)
        pol = _weighted_bincount(self.pol_src * N_STATES + self.pol_dst, mult[self.pol_game],
                                 N_STATES * N_STATES).reshape(N_STATES, N_STATES)
        key = (self.act_sigma * N_ACTIONS + self.act_action) * N_STATES + self.act_dst
        size = N_FOURTH * N_ACTIONS * N_STATES
        act = _weighted_bincount(key, mult[self.act_game], size)
        if aug.enabled:
            key = (self.aug_sigma * N_ACTIONS + int(Action.GO)) * N_STATES + self.aug_dst
            act = act + _weighted_bincount(key, mult[self.aug_game], size)
        return TransitionModel(pol, act.reshape(N_FOURTH, N_ACTIONS, N_STATES), aug.enabled)

    def decision_counts(self, multiplicity: np.ndarray | None = None, region_mask=None) -> np.ndarray:
        """(100, 3) array of observed decision counts, optionally game-weighted."""
        if multiplicity is None:
            w = np.ones(len(self.dec_game), dtype=np.int64)
        else:
            w = np.asarray(multiplicity, dtype=np.int64)[self.dec_game]
        return _weighted_bincount(self.dec_sigma * N_ACTIONS + self.dec_action, w,
                                  N_FOURTH * N_ACTIONS).reshape(N_FOURTH, N_ACTIONS)

    def with_decisions(self, sigma, action, game) -> "EventArrays":
        """Same dynamics, different decision records (e.g. external prescriptions)."""
        return EventArrays(self.game_ids, self.pol_game, self.pol_src, self.pol_dst,
                           self.act_game, self.act_sigma, self.act_action, self.act_dst,
                           self.aug_game, self.aug_sigma, self.aug_dst,
                           np.asarray(game, np.int64), np.asarray(sigma, np.int64),
                           np.asarray(action, np.int64))


def _weighted_bincount(keys: np.ndarray, weights: np.ndarray, size: int) -> np.ndarray:
    if len(keys) == 0:
        return np.zeros(size, dtype=np.int64)
    if np.all(weights == 1):
        return np.bincount(keys, minlength=size).astype(np.int64)
    # integer weights, exact in float64 far beyond any realistic count
    return np.rint(np.bincount(keys, weights=weights.astype(np.float64), minlength=size)).astype(np.int64)


def counterfactual_fourth(entries, i: int, j: int) -> int:
    """Next state a third-down play would have produced on fourth down.

    The realized next state stands when the play gained the distance, scored,
    or turned the ball over; otherwise the opponent takes over on downs at the
    post-play spot. The result is relative to the offense (offense = team A).
    """
    e, nxt = entries[i], entries[j]
    rec = e.record
    team = STATE_TEAM[e.state]
    next_team = STATE_TEAM[nxt.state]
    realized = nxt.state if team == TeamLabel.A else MIRROR[nxt.state]
    if rec.yards_gained >= rec.ytg or nxt.is_score or next_team != team:
        return int(realized)
    spot = rec.yardline_100 - rec.yards_gained  # offense view after the play
    spot = min(max(spot, 1), 99)
    opp = 100 - spot
    return play_index(TeamLabel.B, 1, yardline_bin(opp), min(10, opp))


def extract_events(logs: Sequence[GameLog], f: FilterSpec = FilterSpec(),
                   aug: AugmentationPolicy = AugmentationPolicy()) -> EventArrays:
    pol, act, augm, dec = [], [], [], []
    for g_idx, g in enumerate(logs):
        ents = g.entries
        for i, j in g.transitions():
            e = ents[i]
            if not f.matches_transition(e.record):
                continue
            pol.append((g_idx, e.state, ents[j].state))
            if e.is_score:
                continue
            rec = e.record
            if e.action is not None:
                flip = STATE_TEAM[e.state] == TeamLabel.B
                dst = MIRROR[ents[j].state] if flip else ents[j].state
                act.append((g_idx, canonical_sigma(rec), int(e.action), int(dst)))
            elif (aug.enabled and rec.down == aug.source_down and rec.play_type in GO_LIKE
                  and not rec.two_point):
                augm.append((g_idx, canonical_sigma(rec), counterfactual_fourth(ents, i, j)))
        for e in ents:
            if e.is_score or e.nullified or e.action is None:
                continue
            if f.matches_decision(e.record):
                dec.append((g_idx, canonical_sigma(e.record), int(e.action)))

    def cols(rows, k):
        arr = np.asarray(rows, dtype=np.int64).reshape(-1, k)
        return [arr[:, c].copy() for c in range(k)]

    return EventArrays([g.game_id for g in logs], *cols(pol, 3), *cols(act, 4),
                       *cols(augm, 3), *cols(dec, 3))


def count_policy_transitions(logs: Sequence[GameLog], f: FilterSpec = FilterSpec()) -> TransitionModel:
    ev = extract_events(logs, f, AugmentationPolicy(enabled=False))
    m = ev.counts(aug=AugmentationPolicy(enabled=False))
    m.action_counts[:] = 0
    return m


def count_action_transitions(logs: Sequence[GameLog], f: FilterSpec = FilterSpec(),
                             aug: AugmentationPolicy = AugmentationPolicy()) -> TransitionModel:
    ev = extract_events(logs, f, aug)
    m = ev.counts(aug=aug)
    m.policy_counts[:] = 0
    return m


def estimate_transitions(logs: Sequence[GameLog], f: FilterSpec = FilterSpec(),
                         aug: AugmentationPolicy = AugmentationPolicy()) -> TransitionModel:
    return extract_events(logs, f, aug).counts(aug=aug)
