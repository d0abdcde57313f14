"""State space, actions and rewards for the fourth-down decision model.

Every state has a dense integer index in ``0..805``. Scoring states come
first (A-TD, A-FG, A-SAF, B-TD, B-FG, B-SAF), followed by play states in
lexicographic order of (team, down, yardline_bin, ytg_bucket). Most of the
numerical code works on these indices directly; the dataclasses below are
the readable face of the same information.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np


class TeamLabel(enum.IntEnum):
    A = 0
    B = 1

    @property
    def other(self) -> "TeamLabel":
        return TeamLabel(1 - self)


class ScoreKind(enum.IntEnum):
    TD = 0
    FG = 1
    SAF = 2


class Action(enum.IntEnum):
    """Fourth-down actions; the integer value is the risk order (PUNT < FGA < GO)."""

    PUNT = 0
    FGA = 1
    GO = 2


class FieldRegion(enum.IntEnum):
    OPPONENT_HALF = 0
    OWN_HALF = 1


N_BINS = 10
N_YTG = 10
N_DOWNS = 4
N_SCORE_STATES = 6
N_PLAY_STATES = 2 * N_DOWNS * N_BINS * N_YTG
N_STATES = N_SCORE_STATES + N_PLAY_STATES
N_FOURTH = N_BINS * N_YTG
N_ACTIONS = 3
TEAM_BLOCK = N_STATES // 2

ACTIONS = (Action.PUNT, Action.FGA, Action.GO)


@dataclass(frozen=True)
class RewardSpec:
    td_value: float = 6.95
    fg_value: float = 3.0
    saf_value: float = -2.0

    def value(self, kind: ScoreKind) -> float:
        return (self.td_value, self.fg_value, self.saf_value)[kind]


@dataclass(frozen=True)
class PlayState:
    team: TeamLabel
    down: int
    yardline_bin: int
    ytg_bucket: int

    def __post_init__(self):
        if not 1 <= self.down <= N_DOWNS:
            raise ValueError(f"down out of range: {self.down}")
        if not 1 <= self.yardline_bin <= N_BINS:
            raise ValueError(f"yardline_bin out of range: {self.yardline_bin}")
        if not 1 <= self.ytg_bucket <= N_YTG:
            raise ValueError(f"ytg_bucket out of range: {self.ytg_bucket}")
        object.__setattr__(self, "team", TeamLabel(self.team))


@dataclass(frozen=True)
class ScoreState:
    team: TeamLabel
    kind: ScoreKind

    def __post_init__(self):
        object.__setattr__(self, "team", TeamLabel(self.team))
        object.__setattr__(self, "kind", ScoreKind(self.kind))


GameState = Union[PlayState, ScoreState]


@dataclass(frozen=True)
class FourthDownState:
    """A fourth-down play state seen from the team in possession."""

    yardline_bin: int
    ytg_bucket: int

    def __post_init__(self):
        if not 1 <= self.yardline_bin <= N_BINS:
            raise ValueError(f"yardline_bin out of range: {self.yardline_bin}")
        if not 1 <= self.ytg_bucket <= N_YTG:
            raise ValueError(f"ytg_bucket out of range: {self.ytg_bucket}")

    @property
    def index(self) -> int:
        return (self.yardline_bin - 1) * N_YTG + (self.ytg_bucket - 1)

    @classmethod
    def from_index(cls, k: int) -> "FourthDownState":
        return cls(k // N_YTG + 1, k % N_YTG + 1)

    def as_play_state(self) -> PlayState:
        return PlayState(TeamLabel.A, 4, self.yardline_bin, self.ytg_bucket)


def yardline_bin(yardline_100: int) -> int:
    """Bin of a yards-to-opponent-endzone value: 1-10 -> 1, ..., 91-99 -> 10."""
    if not 1 <= yardline_100 <= 99:
        raise ValueError(f"yardline_100 out of range: {yardline_100}")
    return (yardline_100 - 1) // 10 + 1


def ytg_bucket(ytg: int) -> int:
    if ytg < 1:
        raise ValueError(f"yards to go must be positive: {ytg}")
    return min(ytg, N_YTG)


def play_index(team: int, down: int, ybin: int, ytg_b: int) -> int:
    return (
        N_SCORE_STATES
        + int(team) * (N_DOWNS * N_BINS * N_YTG)
        + (down - 1) * (N_BINS * N_YTG)
        + (ybin - 1) * N_YTG
        + (ytg_b - 1)
    )


def score_index(team: int, kind: int) -> int:
    return int(team) * 3 + int(kind)


def state_index(state: GameState) -> int:
    if isinstance(state, ScoreState):
        return score_index(state.team, state.kind)
    return play_index(state.team, state.down, state.yardline_bin, state.ytg_bucket)


def state_from_index(k: int) -> GameState:
    if not 0 <= k < N_STATES:
        raise ValueError(f"state index out of range: {k}")
    if k < N_SCORE_STATES:
        return ScoreState(TeamLabel(k // 3), ScoreKind(k % 3))
    k -= N_SCORE_STATES
    team, k = divmod(k, N_DOWNS * N_BINS * N_YTG)
    down, k = divmod(k, N_BINS * N_YTG)
    ybin, ytg_b = divmod(k, N_YTG)
    return PlayState(TeamLabel(team), down + 1, ybin + 1, ytg_b + 1)


def all_states() -> Iterator[GameState]:
    for k in range(N_STATES):
        yield state_from_index(k)


def mirror(state: GameState) -> GameState:
    if isinstance(state, ScoreState):
        return ScoreState(state.team.other, state.kind)
    return PlayState(state.team.other, state.down, state.yardline_bin, state.ytg_bucket)


def _build_tables():
    mirror_idx = np.empty(N_STATES, dtype=np.int64)
    team = np.empty(N_STATES, dtype=np.int64)
    for k in range(N_STATES):
        s = state_from_index(k)
        mirror_idx[k] = state_index(mirror(s))
        team[k] = s.team
    return mirror_idx, team


MIRROR, STATE_TEAM = _build_tables()
#: indices of every state belonging to team A, in index order (403 states)
TEAM_A_STATES = np.flatnonzero(STATE_TEAM == TeamLabel.A)
#: position of each state inside its own team block (A and B blocks align under MIRROR)
BLOCK_POS = np.empty(N_STATES, dtype=np.int64)
BLOCK_POS[TEAM_A_STATES] = np.arange(TEAM_BLOCK)
BLOCK_POS[MIRROR[TEAM_A_STATES]] = np.arange(TEAM_BLOCK)
#: state index of each canonical fourth-down state sigma (0..99)
FOURTH_STATES = np.array(
    [play_index(TeamLabel.A, 4, k // N_YTG + 1, k % N_YTG + 1) for k in range(N_FOURTH)],
    dtype=np.int64,
)


def reward(state: GameState, spec: RewardSpec = RewardSpec()) -> float:
    """Points from team A's perspective; play states earn nothing."""
    if isinstance(state, PlayState):
        return 0.0
    value = spec.value(state.kind)
    return value if state.team == TeamLabel.A else -value


def reward_vector(spec: RewardSpec = RewardSpec()) -> np.ndarray:
    r = np.zeros(N_STATES)
    for kind in ScoreKind:
        r[score_index(TeamLabel.A, kind)] = spec.value(kind)
        r[score_index(TeamLabel.B, kind)] = -spec.value(kind)
    return r


def field_region(sigma: FourthDownState) -> FieldRegion:
    return FieldRegion.OPPONENT_HALF if sigma.yardline_bin <= 5 else FieldRegion.OWN_HALF


#: region of each fourth-down index 0..99
SIGMA_REGION = np.array(
    [field_region(FourthDownState.from_index(k)) for k in range(N_FOURTH)], dtype=np.int64
)

#: tau grid 0.20, 0.21, ..., 0.80 held as integer percentages to keep comparisons exact
TAU_PERCENT = np.arange(20, 81, dtype=np.int64)
TAU_GRID = TAU_PERCENT / 100.0


def tau_grid_index(tau: float) -> int:
    k = int(round(tau * 100))
    if abs(tau * 100 - k) > 1e-9 or not 20 <= k <= 80:
        from .errors import TauOffGrid

        raise TauOffGrid(tau)
    return k - 20
