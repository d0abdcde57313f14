"""Play-by-play ingestion: CSV parsing, game logs, stratification filters."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .domain import (
    Action,
    ScoreKind,
    TeamLabel,
    play_index,
    score_index,
    yardline_bin,
    ytg_bucket,
)
from .errors import (
    InconsistentPossession,
    MalformedRow,
    MissingColumn,
    ParseThresholdExceeded,
    UnknownTeamCode,
)

log = logging.getLogger(__name__)

#: logical field -> default column name (public nflfastR export)
DEFAULT_SCHEMA = {
    "game_id": "game_id",
    "play_id": "play_id",
    "posteam": "posteam",
    "home_team": "home_team",
    "down": "down",
    "ydstogo": "ydstogo",
    "yardline_100": "yardline_100",
    "play_type": "play_type",
    "td_team": "td_team",
    "field_goal_result": "field_goal_result",
    "safety": "safety",
    "wp": "wp",
    "season": "season",
    "qtr": "qtr",
    "score_differential": "score_differential",
    "game_seconds_remaining": "game_seconds_remaining",
    "yards_gained": "yards_gained",
    # optional
    "away_team": "away_team",
    "home_coach": "home_coach",
    "away_coach": "away_coach",
    "two_point_attempt": "two_point_attempt",
}
OPTIONAL_FIELDS = {"away_team", "home_coach", "away_coach", "two_point_attempt"}

SCRIMMAGE_TYPES = {"pass", "run", "punt", "field_goal", "qb_kneel", "qb_spike", "no_play"}
NON_STATE_TYPES = {"kickoff", "extra_point"}
ACTION_OF_PLAY_TYPE = {"pass": Action.GO, "run": Action.GO, "field_goal": Action.FGA, "punt": Action.PUNT}
MALFORMED_LIMIT = 0.10


def read_schema_file(path) -> dict:
    """Parse a plain-text ``key = value`` file (``#`` starts a comment)."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


def resolve_schema(overrides: dict | None = None) -> dict:
    schema = dict(DEFAULT_SCHEMA)
    for key, value in (overrides or {}).items():
        if key not in DEFAULT_SCHEMA:
            raise ValueError(f"unknown schema field: {key}")
        schema[key] = value
    return schema


@dataclass(slots=True)
class PlayRecord:
    game_id: str
    play_index: int
    season: int
    quarter: int
    posteam: str
    home_team: str
    away_team: str
    down: int | None
    ytg: int | None
    yardline_100: int | None
    play_type: str
    fourth_down_action: Action | None
    score_event: tuple[str, ScoreKind] | None
    wp: float
    score_differential: int
    game_seconds_remaining: int
    coach: str
    yards_gained: int
    nullified: bool
    two_point: bool = False

    @property
    def half(self) -> int:
        return min((self.quarter + 1) // 2, 3)

    @property
    def is_scrimmage(self) -> bool:
        return self.play_type in SCRIMMAGE_TYPES and not self.two_point

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fourth_down_action"] = None if self.fourth_down_action is None else self.fourth_down_action.name
        d["score_event"] = None if self.score_event is None else [self.score_event[0], self.score_event[1].name]
        d["wp"] = None if math.isnan(self.wp) else self.wp
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlayRecord":
        d = dict(d)
        fa = d.get("fourth_down_action")
        d["fourth_down_action"] = None if fa is None else Action[fa]
        se = d.get("score_event")
        d["score_event"] = None if se is None else (se[0], ScoreKind[se[1]])
        d["wp"] = float("nan") if d.get("wp") is None else float(d["wp"])
        return cls(**d)


class PlayTable(list):
    """List of :class:`PlayRecord` plus parse bookkeeping."""

    def __init__(self, records=(), dropped=0, skipped=0, errors=()):
        super().__init__(records)
        self.dropped = dropped
        self.skipped = skipped
        self.errors = list(errors)


def _num(series: pd.Series) -> pd.Series:
    return pd.to_numeric(series, errors="coerce")


def parse_plays(source, schema: dict | None = None) -> PlayTable:
    """Parse a play-by-play CSV into :class:`PlayRecord` objects.

    Rows without a play type (timeouts, quarter ends) are skipped; scrimmage
    rows missing down, distance or yardline are dropped. Both are counted.
    Unparseable or out-of-range values are collected as :class:`MalformedRow`;
    more than 10% of rows malformed aborts with ParseThresholdExceeded.
    """
    schema = resolve_schema(schema)
    wanted = {v: k for k, v in schema.items()}
    df = pd.read_csv(source, dtype=str, keep_default_na=True, usecols=lambda c: c in wanted)
    df = df.rename(columns=wanted)
    for name in schema:
        if name not in df.columns:
            if name in OPTIONAL_FIELDS:
                df[name] = pd.NA
            else:
                raise MissingColumn(schema[name])
    n_rows = len(df)
    if n_rows == 0:
        return PlayTable()

    lines = np.arange(n_rows) + 2  # header is line 1
    errors: list[MalformedRow] = []
    bad = np.zeros(n_rows, dtype=bool)

    def check(mask, reason):
        mask = np.asarray(mask, dtype=bool) & ~bad
        for line in lines[mask]:
            errors.append(MalformedRow(int(line), reason))
        bad[mask] = True

    present = {c: df[c].notna().to_numpy() for c in df.columns}
    numeric = {}
    for c in ("play_id", "down", "ydstogo", "yardline_100", "wp", "season", "qtr",
              "score_differential", "game_seconds_remaining", "yards_gained", "safety",
              "two_point_attempt"):
        values = _num(df[c])
        numeric[c] = values.to_numpy(dtype=float)
        check(present[c] & values.isna().to_numpy(), f"non-numeric {c}")

    check(~present["game_id"], "missing game_id")
    check(~present["play_id"], "missing play_id")
    check(~present["season"], "missing season")
    dn, yl, ytg, wp, q = (numeric[c] for c in ("down", "yardline_100", "ydstogo", "wp", "qtr"))
    with np.errstate(invalid="ignore"):
        check(~np.isnan(dn) & ~np.isin(dn, [1, 2, 3, 4]), "down out of range")
        check(~np.isnan(yl) & ((yl < 1) | (yl > 99)), "yardline_100 out of range")
        check(~np.isnan(ytg) & (ytg < 1), "ydstogo out of range")
        check(~np.isnan(wp) & ((wp < 0) | (wp > 1)), "wp out of range")
        check(~np.isnan(q) & ~np.isin(q, [1, 2, 3, 4, 5]), "qtr out of range")

    n_bad = int(bad.sum())
    if n_bad > MALFORMED_LIMIT * n_rows:
        raise ParseThresholdExceeded(n_bad, n_rows, errors)

    ptype = df["play_type"].fillna("").str.strip().str.lower().to_numpy()
    two_pt = np.nan_to_num(numeric["two_point_attempt"]) == 1
    no_type = ptype == ""
    scrim = np.isin(ptype, list(SCRIMMAGE_TYPES)) & ~two_pt
    missing_geo = scrim & (np.isnan(dn) | np.isnan(yl) | np.isnan(ytg))
    keep = ~bad & ~no_type & ~missing_geo
    skipped = int((~bad & no_type).sum())
    dropped = int((~bad & ~no_type & missing_geo).sum())

    records = []
    cols = {c: df[c].to_numpy(dtype=object) for c in df.columns}
    for i in np.flatnonzero(keep):
        records.append(_make_record(i, cols, numeric, ptype[i], bool(two_pt[i])))
    if errors:
        log.warning("%d malformed rows skipped", len(errors))
    return PlayTable(records, dropped=dropped, skipped=skipped, errors=errors)


def _text(value) -> str:
    return "" if value is None or (isinstance(value, float) and math.isnan(value)) or value is pd.NA else str(value).strip()


def _int_or_none(x: float):
    return None if math.isnan(x) else int(x)


def _make_record(i, cols, numeric, ptype, two_pt) -> PlayRecord:
    posteam = _text(cols["posteam"][i])
    home = _text(cols["home_team"][i])
    away = _text(cols["away_team"][i])
    down = _int_or_none(numeric["down"][i])
    nullified = ptype == "no_play"

    score = None
    if ptype not in ("extra_point",) and not two_pt:
        td_team = _text(cols["td_team"][i])
        if td_team:
            score = (td_team, ScoreKind.TD)
        elif _text(cols["field_goal_result"][i]).lower() == "made":
            score = (posteam, ScoreKind.FG)
        elif numeric["safety"][i] == 1:
            score = (posteam, ScoreKind.SAF)

    action = None
    if down == 4 and not nullified and not two_pt:
        action = ACTION_OF_PLAY_TYPE.get(ptype)

    coach = _text(cols["home_coach"][i]) if posteam == home else _text(cols["away_coach"][i])
    gsr = numeric["game_seconds_remaining"][i]
    sd = numeric["score_differential"][i]
    yg = numeric["yards_gained"][i]
    return PlayRecord(
        game_id=_text(cols["game_id"][i]),
        play_index=int(numeric["play_id"][i]),
        season=int(numeric["season"][i]),
        quarter=0 if math.isnan(numeric["qtr"][i]) else int(numeric["qtr"][i]),
        posteam=posteam,
        home_team=home,
        away_team=away,
        down=down,
        ytg=_int_or_none(numeric["ydstogo"][i]),
        yardline_100=_int_or_none(numeric["yardline_100"][i]),
        play_type=ptype,
        fourth_down_action=action,
        score_event=score,
        wp=float(numeric["wp"][i]),
        score_differential=0 if math.isnan(sd) else int(sd),
        game_seconds_remaining=0 if math.isnan(gsr) else int(gsr),
        coach=coach,
        yards_gained=0 if math.isnan(yg) else int(yg),
        nullified=nullified,
        two_point=two_pt,
    )


# --------------------------------------------------------------------------- game logs


@dataclass(slots=True)
class LogEntry:
    state: int
    action: Action | None
    record: PlayRecord
    half: int
    nullified: bool = False
    is_score: bool = False


@dataclass
class GameLog:
    game_id: str
    home_team: str
    away_team: str
    entries: list[LogEntry] = field(default_factory=list)

    def transitions(self):
        """Yield ``(i, j)`` entry positions of countable consecutive pairs.

        Pairs never span a half, and nothing leaves a penalty-nullified play.
        """
        ents = self.entries
        for i in range(len(ents) - 1):
            a, b = ents[i], ents[i + 1]
            if a.half != b.half or a.nullified:
                continue
            yield i, i + 1

    def to_json(self) -> str:
        entries = []
        for e in self.entries:
            entries.append({
                "s": e.state,
                "a": None if e.action is None else e.action.name,
                "h": e.half,
                "n": e.nullified,
                "score": e.is_score,
                "r": None if e.is_score else e.record.to_dict(),
            })
        return json.dumps({"game_id": self.game_id, "home_team": self.home_team,
                           "away_team": self.away_team, "entries": entries}, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "GameLog":
        d = json.loads(line)
        log_ = cls(d["game_id"], d["home_team"], d["away_team"])
        prev = None
        for e in d["entries"]:
            rec = prev if e["score"] else PlayRecord.from_dict(e["r"])
            log_.entries.append(LogEntry(e["s"], None if e["a"] is None else Action[e["a"]],
                                         rec, e["h"], e["n"], e["score"]))
            prev = rec
        return log_


def write_game_logs(logs: Iterable[GameLog], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in logs:
            fh.write(g.to_json())
            fh.write("\n")


def read_game_logs(path) -> list[GameLog]:
    with open(path, encoding="utf-8") as fh:
        return [GameLog.from_json(line) for line in fh if line.strip()]


def build_game_logs(plays: Sequence[PlayRecord]) -> list[GameLog]:
    """Canonicalize plays into per-game state sequences (team A = home team)."""
    plays = sorted(plays, key=lambda p: (p.game_id, p.play_index))
    logs: list[GameLog] = []
    i = 0
    n = len(plays)
    while i < n:
        j = i
        gid = plays[i].game_id
        while j < n and plays[j].game_id == gid:
            j += 1
        logs.append(_build_one(plays[i:j]))
        i = j
    return logs


def _build_one(plays: Sequence[PlayRecord]) -> GameLog:
    gid = plays[0].game_id
    home = plays[0].home_team
    if not home:
        raise UnknownTeamCode(f"game {gid}: missing home team")
    away = next((p.away_team for p in plays if p.away_team), "")
    if not away:
        others = {p.posteam for p in plays if p.posteam and p.posteam != home}
        if len(others) > 1:
            raise UnknownTeamCode(f"game {gid}: cannot infer away team from {sorted(others)}")
        away = others.pop() if others else ""
    teams = {home: TeamLabel.A, away: TeamLabel.B}
    log_ = GameLog(gid, home, away)
    for p in plays:
        if p.home_team != home:
            raise UnknownTeamCode(f"game {gid}: home team changes from {home} to {p.home_team}")
        if p.is_scrimmage:
            if p.posteam not in teams:
                raise InconsistentPossession(f"game {gid} play {p.play_index}: posteam {p.posteam!r}")
            team = teams[p.posteam]
            s = play_index(team, p.down, yardline_bin(p.yardline_100), ytg_bucket(p.ytg))
            log_.entries.append(LogEntry(s, p.fourth_down_action, p, p.half, p.nullified))
        if p.score_event is not None and not p.nullified:
            scorer, kind = p.score_event
            if scorer not in teams:
                raise UnknownTeamCode(f"game {gid} play {p.play_index}: scoring team {scorer!r}")
            log_.entries.append(LogEntry(score_index(teams[scorer], kind), None, p, p.half,
                                         False, True))
    return log_


# --------------------------------------------------------------------------- filters


@dataclass(frozen=True)
class FilterSpec:
    """Stratification clauses; ``None`` means "no restriction".

    ``wp_range`` is the half-open interval (lo, hi], closed at 0 when lo == 0.
    Score-differential and minutes-remaining bins are [lo, hi) intervals.
    Seasons and win probability restrict transition estimation as well as
    decisions; the remaining clauses restrict decisions only, since the
    league-average dynamics are shared by every coach and game situation.
    """

    seasons: frozenset | None = None
    wp_range: tuple[float, float] | None = None
    quarters: frozenset | None = None
    coach_team: tuple[str, str] | None = None
    score_diff_bins: tuple[tuple[float, float], ...] | None = None
    minutes_remaining_bins: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.wp_range is not None:
            lo, hi = self.wp_range
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"wp_range must lie within [0, 1]: {self.wp_range}")
        if self.seasons is not None:
            object.__setattr__(self, "seasons", frozenset(self.seasons))
        if self.quarters is not None:
            object.__setattr__(self, "quarters", frozenset(self.quarters))

    def _wp_ok(self, wp: float) -> bool:
        if self.wp_range is None:
            return True
        if math.isnan(wp):
            return False
        lo, hi = self.wp_range
        return (wp > lo or (lo == 0.0 and wp >= 0.0)) and wp <= hi

    def matches_transition(self, rec: PlayRecord) -> bool:
        if self.seasons is not None and rec.season not in self.seasons:
            return False
        return self._wp_ok(rec.wp)

    def matches_decision(self, rec: PlayRecord) -> bool:
        if not self.matches_transition(rec):
            return False
        if self.quarters is not None and rec.quarter not in self.quarters:
            return False
        if self.coach_team is not None and (rec.coach, rec.posteam) != tuple(self.coach_team):
            return False
        if self.score_diff_bins is not None and not any(
            lo <= rec.score_differential < hi for lo, hi in self.score_diff_bins
        ):
            return False
        if self.minutes_remaining_bins is not None:
            minutes = rec.game_seconds_remaining / 60.0
            if not any(lo <= minutes < hi for lo, hi in self.minutes_remaining_bins):
                return False
        return True


@dataclass(frozen=True, slots=True)
class Decision:
    sigma: int  # fourth-down index 0..99, possession team's view
    action: Action
    record: PlayRecord


def canonical_sigma(record: PlayRecord) -> int:
    return (yardline_bin(record.yardline_100) - 1) * 10 + (ytg_bucket(record.ytg) - 1)


def filter_decisions(logs: Iterable[GameLog], f: FilterSpec = FilterSpec()) -> list[Decision]:
    out = []
    for g in logs:
        for e in g.entries:
            if e.is_score or e.nullified or e.action is None:
                continue
            if f.matches_decision(e.record):
                out.append(Decision(canonical_sigma(e.record), e.action, e.record))
    return out
