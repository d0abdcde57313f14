import io

import numpy as np
import pytest

from conftest import PLAY_COLUMNS, csv_text, logs_from_rows, play_row
from qmi.domain import MIRROR, Action, PlayState, ScoreKind, ScoreState, TeamLabel, state_from_index, state_index
from qmi.errors import MissingColumn, ParseThresholdExceeded, UnknownTeamCode
from qmi.ingest import (
    FilterSpec,
    build_game_logs,
    filter_decisions,
    parse_plays,
    read_game_logs,
    read_schema_file,
    write_game_logs,
)


def parse(rows, schema=None):
    return parse_plays(io.StringIO(csv_text(rows)), schema)


def test_empty_file_with_header():
    assert len(parse_plays(io.StringIO(",".join(PLAY_COLUMNS) + "\n"))) == 0


def test_one_row_fully_populated():
    (rec,) = parse([play_row(down=4, ydstogo=2, yardline_100=34, play_type="punt", wp=0.41)])
    assert rec.game_id == "G1" and rec.season == 2020 and rec.quarter == 1
    assert (rec.down, rec.ytg, rec.yardline_100) == (4, 2, 34)
    assert rec.fourth_down_action == Action.PUNT
    assert rec.coach == "Hc" and rec.wp == pytest.approx(0.41)


def test_missing_required_column():
    text = csv_text([play_row()]).replace("yardline_100", "yl")
    with pytest.raises(MissingColumn):
        parse_plays(io.StringIO(text))


def test_malformed_threshold():
    rows = [play_row(play_id=i) for i in range(100)]
    for i in range(11):
        rows[i]["down"] = 7
    with pytest.raises(ParseThresholdExceeded):
        parse(rows)
    rows[10]["down"] = 2
    table = parse(rows)
    assert len(table.errors) == 10 and len(table) == 90


def test_schema_file_remaps_columns(tmp_path):
    p = tmp_path / "schema.txt"
    p.write_text("# remap\nyardline_100 = yl\n")
    schema = read_schema_file(p)
    text = csv_text([play_row(yardline_100=12)]).replace("yardline_100", "yl")
    (rec,) = parse_plays(io.StringIO(text), schema)
    assert rec.yardline_100 == 12


def test_rows_without_play_type_are_skipped():
    table = parse([play_row(play_id=1), play_row(play_id=2, play_type="")])
    assert len(table) == 1 and table.skipped == 1


def td_drive(k=4):
    rows = []
    yl = 75
    for i in range(k - 1):
        rows.append(play_row(play_id=i + 1, yardline_100=yl, yards_gained=10, down=1, ydstogo=10))
        yl -= 10
    rows.append(play_row(play_id=k, yardline_100=yl, yards_gained=yl, play_type="pass", td_team="HOM"))
    rows.append(play_row(play_id=k + 1, play_type="extra_point", down=None, ydstogo=None, yardline_100=15))
    return rows


def test_td_drive_gives_k_plays_then_score():
    (log,) = logs_from_rows(td_drive(5))
    states = [state_from_index(e.state) for e in log.entries]
    assert all(isinstance(s, PlayState) for s in states[:5])
    assert states[5] == ScoreState(TeamLabel.A, ScoreKind.TD)
    assert len(states) == 6


def test_mirrored_team_codes_swap_labels():
    rows = td_drive(3) + [play_row(play_id=10, posteam="AWY", yardline_100=60, down=2, ydstogo=7)]
    swapped = [dict(r, home_team="AWY", away_team="HOM", home_coach="Ac", away_coach="Hc") for r in rows]
    (a,), (b,) = logs_from_rows(rows), logs_from_rows(swapped)
    sa = np.array([e.state for e in a.entries])
    sb = np.array([e.state for e in b.entries])
    assert np.array_equal(MIRROR[sa], sb)


def test_unknown_scoring_team():
    rows = [play_row(play_type="pass", td_team="XXX")]
    with pytest.raises(UnknownTeamCode):
        logs_from_rows(rows)


def test_no_transition_across_halves(small_logs):
    for g in small_logs[:50]:
        for i, j in g.transitions():
            assert g.entries[i].half == g.entries[j].half


def test_nullified_plays_not_decisions():
    rows = [play_row(play_id=1, down=4, play_type="no_play"), play_row(play_id=2, down=4, play_type="punt")]
    decs = filter_decisions(logs_from_rows(rows))
    assert [d.action for d in decs] == [Action.PUNT]


def test_filters(small_logs):
    everything = filter_decisions(small_logs)
    assert len(everything) > 0
    assert len(filter_decisions(small_logs, FilterSpec(wp_range=(0.0, 1.0)))) == len(everything)
    assert filter_decisions(small_logs, FilterSpec(seasons={1999})) == []
    assert all(d.record.down == 4 for d in everything)
    q4 = filter_decisions(small_logs, FilterSpec(quarters={4}))
    assert q4 and all(d.record.quarter == 4 for d in q4)


def test_wp_range_is_half_open():
    f = FilterSpec(wp_range=(0.2, 0.4))
    rows = [play_row(play_id=i, down=4, play_type="punt", wp=w) for i, w in enumerate([0.2, 0.3, 0.4], 1)]
    got = [d.record.wp for d in filter_decisions(logs_from_rows(rows), f)]
    assert got == pytest.approx([0.3, 0.4])


def test_game_log_jsonl_roundtrip(tmp_path, small_logs):
    p = tmp_path / "logs.jsonl"
    write_game_logs(small_logs[:20], p)
    back = read_game_logs(p)
    assert [g.to_json() for g in back] == [g.to_json() for g in small_logs[:20]]


def test_simulated_csv_parses_cleanly(small_csv):
    table = parse_plays(io.StringIO(small_csv))
    assert table.errors == []
    assert len(build_game_logs(table)) == 400
