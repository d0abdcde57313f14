import io
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from qmi.ingest import build_game_logs, parse_plays
from qmi.simulator import SyntheticLeague, oracle_truth, simulate
from qmi.transitions import extract_events

FIXTURES = Path(__file__).parent / "fixtures"

PLAY_COLUMNS = ["game_id", "play_id", "season", "qtr", "home_team", "away_team", "posteam",
                "home_coach", "away_coach", "down", "ydstogo", "yardline_100", "play_type",
                "yards_gained", "td_team", "field_goal_result", "safety", "two_point_attempt", "wp",
                "score_differential", "game_seconds_remaining"]


def play_row(**kw):
    row = {"game_id": "G1", "play_id": 1, "season": 2020, "qtr": 1, "home_team": "HOM",
           "away_team": "AWY", "posteam": "HOM", "home_coach": "Hc", "away_coach": "Ac",
           "down": 1, "ydstogo": 10, "yardline_100": 75, "play_type": "run", "yards_gained": 0,
           "td_team": "", "field_goal_result": "", "safety": 0, "two_point_attempt": 0,
           "wp": 0.5, "score_differential": 0, "game_seconds_remaining": 3600}
    row.update(kw)
    return row


def csv_text(rows) -> str:
    return pd.DataFrame(rows, columns=PLAY_COLUMNS).to_csv(index=False, lineterminator="\n")


def logs_from_rows(rows):
    return build_game_logs(parse_plays(io.StringIO(csv_text(rows))))


def monte_carlo_chain(P, r, episodes, seed=0):
    """Mean and standard error of cumulative reward from each start state."""
    rng = np.random.default_rng(seed)
    n = len(r)
    cum = np.cumsum(np.column_stack([P, 1 - P.sum(axis=1)]), axis=1)
    means, ses = np.empty(n), np.empty(n)
    for s0 in range(n):
        state = np.full(episodes, s0)
        total = np.zeros(episodes)
        alive = np.ones(episodes, bool)
        while alive.any():
            idx = np.flatnonzero(alive)
            total[idx] += r[state[idx]]
            u = rng.random(len(idx))
            nxt = (u[:, None] >= cum[state[idx]]).sum(axis=1)
            state[idx] = nxt
            alive[idx] = nxt < n
        means[s0] = total.mean()
        ses[s0] = total.std(ddof=1) / np.sqrt(episodes)
    return means, ses


@pytest.fixture(scope="session")
def toy_chain():
    d = json.loads((FIXTURES / "toy_chain.json").read_text())
    return np.array(d["P"]), np.array(d["r"])


@pytest.fixture(scope="session")
def small_league():
    return SyntheticLeague(games=400, seed=7, n_seasons=2)


@pytest.fixture(scope="session")
def small_sim(small_league):
    return simulate(small_league)


@pytest.fixture(scope="session")
def small_csv(small_sim):
    buf = io.StringIO()
    small_sim.to_csv(buf)
    return buf.getvalue()


@pytest.fixture(scope="session")
def small_logs(small_csv):
    return build_game_logs(parse_plays(io.StringIO(small_csv)))


@pytest.fixture(scope="session")
def small_events(small_logs):
    return extract_events(small_logs)


@pytest.fixture(scope="session")
def default_truth():
    return oracle_truth(SyntheticLeague())
