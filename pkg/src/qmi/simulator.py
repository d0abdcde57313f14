"""Synthetic league with a planted fourth-down risk preference.

The drive model works on exact yardlines and distances, but before every
snap the exact pair is redrawn uniformly from the pairs compatible with the
current binned state. Outcomes therefore depend on the binned state only,
the binned process is exactly Markov, and its kernels can be enumerated in
closed form from the same outcome tables the simulation samples from.

Coaches on both teams play the tau-optimal map of the oracle surface, with
one planted tau per field region. Because the league-average chain includes
those fourth-down choices, the maps and the value function are solved
jointly by fixed-point iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields

import numpy as np
import pandas as pd

from .domain import (
    MIRROR,
    N_ACTIONS,
    N_FOURTH,
    N_STATES,
    SIGMA_REGION,
    TEAM_BLOCK,
    Action,
    RewardSpec,
    ScoreKind,
    TeamLabel,
    play_index,
    score_index,
)
from .errors import InvalidKernel, TauOffGrid
from .valuation import KICKOFF_LANDING, QuantileSurface, ValueTable, solve_policy_rows, surface_from_probs

log = logging.getLogger(__name__)

GAIN_VALUES = np.arange(-5, 51)
N_GAIN = len(GAIN_VALUES)
TURNOVER = N_GAIN  # extra outcome index for scrimmage plays
N_SCRIM_OUT = N_GAIN + 1
KICKOFF_YARDLINE = 75
TOUCHBACK_YARDLINE = 80
MAX_FIXED_POINT_ITERS = 100

# offense-relative play states: (down, bin, bucket) -> 0..399
_N_REL = 400


@dataclass(frozen=True)
class SyntheticLeague:
    games: int = 1000
    seed: int = 0
    tau_opponent_half: float = 0.35
    tau_own_half: float = 0.55
    plays_per_half: int = 65
    first_season: int = 2030
    n_seasons: int = 1
    n_teams: int = 32
    coach_noise: float = 0.0
    td_value: float = 7.0
    fg_value: float = 3.0
    saf_value: float = -2.0
    # per-snap gain model (probabilities; zero-yard mass is the remainder)
    p_loss: float = 0.12        # spread over -5..-1
    p_short_each: float = 0.042  # each of 1..9
    p_medium: float = 0.22      # spread over 10..20
    p_long: float = 0.08        # spread over 21..50
    p_turnover: float = 0.02
    fg_center: float = 55.0     # kick distance with even odds
    fg_scale: float = 4.5
    punt_min: int = 30
    punt_max: int = 50

    @property
    def reward(self) -> RewardSpec:
        return RewardSpec(self.td_value, self.fg_value, self.saf_value)

    @property
    def tau_percents(self) -> tuple[int, int]:
        out = []
        for t in (self.tau_opponent_half, self.tau_own_half):
            k = int(round(t * 100))
            if abs(t * 100 - k) > 1e-9 or not 20 <= k <= 80:
                raise TauOffGrid(t)
            out.append(k)
        return tuple(out)

    def gain_pmf(self) -> np.ndarray:
        p = np.zeros(N_SCRIM_OUT)
        g = GAIN_VALUES
        gp = p[:N_GAIN]
        gp[(g >= -5) & (g <= -1)] = self.p_loss / 5
        gp[(g >= 1) & (g <= 9)] = self.p_short_each
        gp[(g >= 10) & (g <= 20)] = self.p_medium / 11
        gp[(g >= 21) & (g <= 50)] = self.p_long / 30
        p[TURNOVER] = self.p_turnover
        gp[g == 0] = 1.0 - p.sum()
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidKernel("gain probabilities must be nonnegative and sum to at most 1")
        return p

    def fg_make_prob(self, yl: np.ndarray) -> np.ndarray:
        dist = np.asarray(yl, dtype=np.float64) + 17.0
        return 1.0 / (1.0 + np.exp((dist - self.fg_center) / self.fg_scale))

    def punt_nets(self) -> np.ndarray:
        if not 0 < self.punt_min <= self.punt_max:
            raise InvalidKernel("punt range must satisfy 0 < min <= max")
        return np.arange(self.punt_min, self.punt_max + 1)


def read_league_config(path) -> SyntheticLeague:
    """Plain-text ``key = value`` configuration; keys are SyntheticLeague fields."""
    from .ingest import read_schema_file

    raw = read_schema_file(path)
    types = {f.name: f.type for f in fields(SyntheticLeague)}
    kw = {}
    for k, v in raw.items():
        if k not in types:
            raise ValueError(f"unknown league option: {k}")
        kw[k] = int(v) if types[k] in ("int", int) else float(v)
    return SyntheticLeague(**kw)


# --------------------------------------------------------------------------- exact pairs


def _bin(yl):
    return (np.asarray(yl) - 1) // 10 + 1


def _bucket(ytg):
    return np.minimum(np.asarray(ytg), 10)


def _rel_index(down, ybin, bucket):
    return (np.asarray(down) - 1) * 100 + (np.asarray(ybin) - 1) * 10 + (np.asarray(bucket) - 1)


def _exact_pairs():
    """Exact (yardline, distance) pairs per offense-relative state, uniform weight."""
    yl = np.zeros((_N_REL, 30), np.int64)
    ytg = np.zeros((_N_REL, 30), np.int64)
    n = np.zeros(_N_REL, np.int64)
    for down in range(1, 5):
        for b in range(1, 11):
            for k in range(1, 11):
                dists = [k] if k < 10 else ([10] if down == 1 else [10, 12, 15])
                pairs = [(y, t) for y in range(10 * (b - 1) + 1, min(10 * b, 99) + 1) for t in dists if t <= y]
                if not pairs:  # first-and-10 deep in the opponent's ten: distance = goal distance
                    pairs = [(y, y) for y in range(10 * (b - 1) + 1, min(10 * b, 99) + 1)]
                i = _rel_index(down, b, k)
                n[i] = len(pairs)
                yl[i, : len(pairs)] = [p[0] for p in pairs]
                ytg[i, : len(pairs)] = [p[1] for p in pairs]
    return yl, ytg, n


PAIR_YL, PAIR_YTG, PAIR_N = _exact_pairs()


# --------------------------------------------------------------------------- outcomes


_B_FIRST = play_index(TeamLabel.B, 1, 1, 1)
_A_TD = score_index(TeamLabel.A, ScoreKind.TD)
_A_FG = score_index(TeamLabel.A, ScoreKind.FG)
_A_SAF = score_index(TeamLabel.A, ScoreKind.SAF)


def _b_first(opp_yl):
    opp_yl = np.clip(opp_yl, 1, 99)
    return _B_FIRST + (_bin(opp_yl) - 1) * 10 + (np.minimum(10, opp_yl) - 1)


def _a_play(down, yl, ytg):
    return play_index(TeamLabel.A, 1, 1, 1) + (np.asarray(down) - 1) * 100 + (_bin(yl) - 1) * 10 + (_bucket(ytg) - 1)


@dataclass
class Outcome:
    next_state: np.ndarray   # offense = team A orientation
    yards: np.ndarray
    score: np.ndarray        # -1 none, else ScoreKind
    fg_made: np.ndarray      # -1 not a kick, 0 missed, 1 made
    turnover: np.ndarray


def resolve(down, yl, ytg, action, k, league: SyntheticLeague) -> Outcome:
    """Vectorized play resolution for the offense (as team A).

    ``k`` indexes the outcome table of ``action``: gain index or TURNOVER for
    scrimmage plays, net-distance index for punts, 0 make / 1 miss for kicks.
    """
    down, yl, ytg, action, k = (np.asarray(x, dtype=np.int64) for x in (down, yl, ytg, action, k))
    n = len(yl)
    nxt = np.zeros(n, np.int64)
    yards = np.zeros(n, np.int64)
    score = np.full(n, -1, np.int64)
    fg = np.full(n, -1, np.int64)
    tov = np.zeros(n, bool)

    scrim = action == Action.GO
    t = scrim & (k == TURNOVER)
    nxt[t] = _b_first(100 - yl[t])
    tov[t] = True
    g_idx = np.where(scrim & ~t, k, 0)
    g = GAIN_VALUES[np.minimum(g_idx, N_GAIN - 1)]
    m = scrim & ~t
    td = m & (g >= yl)
    new = yl - g
    saf = m & ~td & (new >= 100)
    conv = m & ~td & ~saf & (g >= ytg)
    adv = m & ~td & ~saf & ~conv & (down < 4)
    fail = m & ~td & ~saf & ~conv & (down == 4)
    yards[m] = np.where(td[m], yl[m], g[m])
    nxt[td], score[td] = _A_TD, ScoreKind.TD
    nxt[saf], score[saf] = _A_SAF, ScoreKind.SAF
    nxt[conv] = _a_play(1, new[conv], np.minimum(10, new[conv]))
    nxt[adv] = _a_play(down[adv] + 1, new[adv], ytg[adv] - g[adv])
    nxt[fail] = _b_first(100 - new[fail])

    punt = action == Action.PUNT
    net = league.punt_nets()[np.where(punt, k, 0)]
    land = yl - net
    nxt[punt] = np.where(land[punt] <= 0, _b_first(np.full(punt.sum(), TOUCHBACK_YARDLINE)), _b_first(100 - land[punt]))

    kick = action == Action.FGA
    made = kick & (k == 0)
    miss = kick & (k == 1)
    nxt[made], score[made], fg[made] = _A_FG, ScoreKind.FG, 1
    nxt[miss] = _b_first(np.minimum(TOUCHBACK_YARDLINE, 100 - (yl[miss] + 7)))
    fg[miss] = 0
    return Outcome(nxt, yards, score, fg, tov)


def outcome_probs(action: int, yl: np.ndarray, league: SyntheticLeague) -> np.ndarray:
    """(len(yl), n_outcomes) probabilities for ``action`` at exact yardlines."""
    yl = np.asarray(yl)
    if action == Action.GO:
        return np.broadcast_to(league.gain_pmf(), (len(yl), N_SCRIM_OUT))
    if action == Action.PUNT:
        nets = league.punt_nets()
        return np.full((len(yl), len(nets)), 1.0 / len(nets))
    p = league.fg_make_prob(yl)
    return np.stack([p, 1.0 - p], axis=1)


# --------------------------------------------------------------------------- exact kernels


def true_kernels(league: SyntheticLeague) -> np.ndarray:
    """K[rel_state, action, s'] for all 400 offense-relative play states."""
    K = np.zeros((_N_REL, N_ACTIONS, N_STATES))
    rel = np.repeat(np.arange(_N_REL), 30)
    slot = np.tile(np.arange(30), _N_REL)
    ok = slot < PAIR_N[rel]
    rel, slot = rel[ok], slot[ok]
    yl, ytg = PAIR_YL[rel, slot], PAIR_YTG[rel, slot]
    down = rel // 100 + 1
    w_pair = 1.0 / PAIR_N[rel]
    for a in Action:
        probs = outcome_probs(a, yl, league)
        n_out = probs.shape[1]
        for k in range(n_out):
            out = resolve(down, yl, ytg, np.full(len(yl), int(a)), np.full(len(yl), k), league)
            np.add.at(K, (rel, int(a), out.next_state), w_pair * probs[:, k])
    return K


@dataclass
class OracleTruth:
    value: ValueTable
    surface: QuantileSurface
    maps: np.ndarray          # (100,) coach action per sigma
    region_maps: dict         # region -> map at that region's tau
    kernels: np.ndarray       # (400, 3, 806)
    policy_rows: np.ndarray   # (403, 806) league chain, team A rows
    iterations: int


def _policy_rows(K: np.ndarray, maps: np.ndarray, eps: float) -> np.ndarray:
    P = np.zeros((TEAM_BLOCK, N_STATES))
    for kind in ScoreKind:
        P[int(kind), KICKOFF_LANDING] = 1.0
    rel = np.arange(_N_REL)
    P[3 + rel] = K[rel, Action.GO]
    fourth = 300 + np.arange(N_FOURTH)
    chosen = K[fourth, maps]
    if eps > 0:
        chosen = (1 - eps) * chosen + eps * K[fourth].mean(axis=1)
    P[3 + fourth] = chosen
    return P


def _maps_at(surface: QuantileSurface, percents: tuple[int, int]) -> np.ndarray:
    q = surface.q
    t_of = {p: int(np.flatnonzero(surface.percents == p)[0]) for p in percents}
    out = np.zeros(N_FOURTH, np.int64)
    for reg, p in enumerate(percents):
        m = SIGMA_REGION == reg
        out[m] = np.argmax(q[m][:, :, t_of[p]], axis=1)
    return out


def oracle_truth(league: SyntheticLeague) -> OracleTruth:
    K = true_kernels(league)
    for row in K.reshape(-1, N_STATES):
        if abs(row.sum() - 1.0) > 1e-12:
            raise InvalidKernel("kernel row does not sum to one")
    percents = league.tau_percents
    action_probs = K[300:400]  # fourth-down rows, sigma order
    maps = np.full(N_FOURTH, int(Action.PUNT))
    history = []
    for it in range(1, MAX_FIXED_POINT_ITERS + 1):
        P = _policy_rows(K, maps, league.coach_noise)
        vt = solve_policy_rows(P, league.reward)
        surf = surface_from_probs(action_probs, vt.w)
        new = _maps_at(surf, percents)
        if np.array_equal(new, maps):
            break
        key = new.tobytes()
        if key in history:
            log.warning("coach map iteration cycles; stopping at iteration %d", it)
            maps = new
            P = _policy_rows(K, maps, league.coach_noise)
            vt = solve_policy_rows(P, league.reward)
            surf = surface_from_probs(action_probs, vt.w)
            break
        history.append(key)
        maps = new
    region_maps = {reg: np.argmax(surf.q[:, :, int(np.flatnonzero(surf.percents == p)[0])], axis=1)
                   for reg, p in enumerate(percents)}
    return OracleTruth(vt, surf, maps, region_maps, K, P, it)


# --------------------------------------------------------------------------- simulation


@dataclass
class SimulationResult:
    frame: pd.DataFrame
    truth: OracleTruth
    src: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))  # state pairs, game-log orientation
    dst: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def to_csv(self, path) -> None:
        self.frame.to_csv(path, index=False, lineterminator="\n")


COLUMNS = ["game_id", "play_id", "season", "qtr", "home_team", "away_team", "posteam", "home_coach",
           "away_coach", "down", "ydstogo", "yardline_100", "play_type", "yards_gained", "td_team",
           "field_goal_result", "safety", "two_point_attempt", "wp", "score_differential",
           "game_seconds_remaining"]


def _wp(diff, frac_left):
    return np.clip(1.0 / (1.0 + np.exp(-diff * (0.08 + 0.25 * (1.0 - frac_left)))), 0.01, 0.99)


def simulate(league: SyntheticLeague, truth: OracleTruth | None = None) -> SimulationResult:
    """Simulate ``league.games`` games in lockstep and emit ingest-schema rows."""
    if truth is None:
        truth = oracle_truth(league)
    G = league.games
    rng = np.random.default_rng([league.seed, 0x51A])
    home = rng.integers(0, league.n_teams, size=G)
    away = (home + 1 + rng.integers(0, league.n_teams - 1, size=G)) % league.n_teams
    team_code = np.array([f"T{i:02d}" for i in range(league.n_teams)])
    coach_code = np.array([f"Coach{i:02d}" for i in range(league.n_teams)])
    season = league.first_season + np.arange(G) % max(league.n_seasons, 1)
    gid = np.array([f"{season[g]}_{g:06d}" for g in range(G)])
    H = league.plays_per_half
    total = 2 * H
    gain_cdf = np.cumsum(league.gain_pmf())
    n_punt = len(league.punt_nets())
    maps = truth.maps
    everyone = np.ones(G, bool)
    games = np.arange(G)

    rows: list[dict] = []
    src_all, dst_all = [], []
    points = np.zeros((G, 2), np.int64)  # home (A), away (B)

    def emit(mask, **cols):
        idx = np.flatnonzero(mask)
        if len(idx):
            rows.append({"g": idx, **{k: (v[idx] if isinstance(v, np.ndarray) else v) for k, v in cols.items()}})

    pid = 0
    for half in (1, 2):
        poss = np.full(G, 0 if half == 1 else 1)  # home receives the opening kickoff
        rel = np.full(G, _rel_index(1, 8, 10))
        prev = np.full(G, -1)
        pid += 1
        emit(everyone, play_id=pid, play_type="kickoff", posteam_t=poss, snap=(half - 1) * H)
        for step in range(H):
            snap = (half - 1) * H + step
            pid += 1
            n = PAIR_N[rel]
            slot = np.minimum((rng.random(G) * n).astype(np.int64), n - 1)
            yl, ytg = PAIR_YL[rel, slot], PAIR_YTG[rel, slot]
            down = rel // 100 + 1
            fourth = down == 4
            action = np.full(G, int(Action.GO))
            action[fourth] = maps[rel[fourth] - 300]
            if league.coach_noise > 0:
                flip = fourth & (rng.random(G) < league.coach_noise)
                action[flip] = rng.integers(0, N_ACTIONS, size=int(flip.sum()))
            u = rng.random(G)
            k = np.zeros(G, np.int64)
            go = action == Action.GO
            k[go] = np.minimum(np.searchsorted(gain_cdf, u[go], side="right"), N_SCRIM_OUT - 1)
            pu = action == Action.PUNT
            k[pu] = np.minimum((u[pu] * n_punt).astype(np.int64), n_punt - 1)
            fk = action == Action.FGA
            k[fk] = (u[fk] >= league.fg_make_prob(yl[fk])).astype(np.int64)
            out = resolve(down, yl, ytg, action, k, league)

            # game-log orientation: the home team is A
            cur = 6 + rel + 400 * poss
            has_prev = prev >= 0
            src_all.append(prev[has_prev])
            dst_all.append(cur[has_prev])
            scored = out.score >= 0
            score_state = np.where(poss == 1, MIRROR[np.maximum(out.score, 0)], np.maximum(out.score, 0))
            src_all.append(cur[scored])
            dst_all.append(score_state[scored])

            diff = points[games, poss] - points[games, 1 - poss]
            label = np.where(rng.random(G) < 0.55, "pass", "run")
            ptype = np.where(action == Action.PUNT, "punt", np.where(action == Action.FGA, "field_goal", label))
            td = out.score == ScoreKind.TD
            saf = out.score == ScoreKind.SAF
            emit(everyone, play_id=pid, play_type=ptype, posteam_t=poss, down=down, ydstogo=ytg,
                 yardline_100=yl, yards_gained=out.yards, td_team=np.where(td, poss, -1),
                 field_goal_result=np.where(out.fg_made == 1, "made", np.where(out.fg_made == 0, "missed", "")),
                 safety=saf.astype(np.int64), wp=_wp(diff, 1.0 - snap / total), diff=diff, snap=snap)
            points[games, poss] += np.where(td, 7, np.where(out.score == ScoreKind.FG, 3, 0))
            points[games, 1 - poss] += np.where(saf, 2, 0)
            if td.any():
                pid += 1
                emit(td, play_id=pid, play_type="extra_point", posteam_t=poss, snap=snap)
            if scored.any():
                pid += 1
                emit(scored, play_id=pid, play_type="kickoff", posteam_t=1 - poss, snap=snap)

            ns = out.next_state
            flips = ns >= 406
            new_rel = np.where(flips, ns - 406, ns - 6)
            rel = np.where(scored, _rel_index(1, 8, 10), new_rel)
            poss = np.where(scored | flips, 1 - poss, poss)
            prev = np.where(scored, score_state, cur)

    frame = _rows_to_frame(rows, gid, season, home, away, team_code, coach_code, total)
    src = np.concatenate(src_all).astype(np.int64)
    dst = np.concatenate(dst_all).astype(np.int64)
    return SimulationResult(frame, truth, src, dst)


def _td_codes(side, home, away, team_code):
    side = np.asarray(side, dtype=np.int64)
    return np.where(side == 0, team_code[home], np.where(side == 1, team_code[away], ""))


def _rows_to_frame(rows, gid, season, home, away, team_code, coach_code, total) -> pd.DataFrame:
    n_all = sum(len(r["g"]) for r in rows)
    g = np.concatenate([r["g"] for r in rows])

    def col(name, default, dtype):
        out = np.empty(n_all, dtype=dtype)
        i = 0
        for r in rows:
            n = len(r["g"])
            out[i:i + n] = r.get(name, default)
            i += n
        return out

    poss = col("posteam_t", 0, np.int64)
    snap = col("snap", 0, np.int64)
    missing = col("down", -1, np.int64) < 0

    def nullable(name):
        return pd.arrays.IntegerArray(np.where(missing, 0, col(name, -1, np.int64)), missing)

    wp = col("wp", np.nan, np.float64)
    frame = pd.DataFrame({
        "game_id": gid[g],
        "play_id": col("play_id", 0, np.int64),
        "season": season[g],
        "qtr": np.minimum(4, 1 + (snap * 4) // total),
        "home_team": team_code[home[g]],
        "away_team": team_code[away[g]],
        "posteam": team_code[np.where(poss == 0, home[g], away[g])],
        "home_coach": coach_code[home[g]],
        "away_coach": coach_code[away[g]],
        "down": nullable("down"),
        "ydstogo": nullable("ydstogo"),
        "yardline_100": nullable("yardline_100"),
        "play_type": col("play_type", "", object),
        "yards_gained": col("yards_gained", 0, np.int64),
        "td_team": _td_codes(col("td_team", -1, np.int64), home[g], away[g], team_code),
        "field_goal_result": col("field_goal_result", "", object),
        "safety": col("safety", 0, np.int64),
        "two_point_attempt": 0,
        "wp": np.round(wp, 6),
        "score_differential": col("diff", 0, np.int64),
        "game_seconds_remaining": 3600 * (total - snap) // total,
    })
    frame = frame.sort_values(["game_id", "play_id"], kind="stable").reset_index(drop=True)
    return frame[COLUMNS]
