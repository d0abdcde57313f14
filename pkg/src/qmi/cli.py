"""Command-line front end: ``qmi <command> [options]``.

Every command writes plain CSV/JSON artifacts into ``--out``. Exit codes:
0 success, 2 configuration error, 3 data error, 4 numerical error. Failures
print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .analysis import (
    DEFAULT_WP_BINS,
    attach_covariates,
    fit_points_gained,
    points_gained,
    read_elo_csv,
    records_to_csv,
    stratum_decision_counts,
    stratum_tau_hat,
)
from .bootstrap import BootstrapSpec, bootstrap_tau, paired_difference
from .domain import N_STATES, Action, RewardSpec
from .errors import ConfigError, DataError, NumericalError, QmiError
from .ingest import (
    FilterSpec,
    build_game_logs,
    canonical_sigma,
    parse_plays,
    read_game_logs,
    read_schema_file,
    write_game_logs,
)
from .inverse import partition_search
from .pipeline import PipelineConfig, run_events
from .policy import frequency_to_csv, maps_to_csv, observed_frequency_map
from .simulator import SyntheticLeague, read_league_config, simulate
from .transitions import AugmentationPolicy, TransitionModel, extract_events
from .valuation import solve_chain, solve_value

log = logging.getLogger("qmi")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4
_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}


# --------------------------------------------------------------------------- option parsing


def _int_set(text: str) -> frozenset:
    """'2014,2016' or '2014-2022' (inclusive ranges may be mixed with lists)."""
    out = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.update(range(int(lo), int(hi) + 1))
        else:
            out.add(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty set: {text!r}")
    return frozenset(out)


def _wp_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI: {text!r}") from None
    if not 0.0 <= lo <= hi <= 1.0:
        raise argparse.ArgumentTypeError(f"win probability range must lie in [0, 1]: {text!r}")
    return lo, hi


def _coach(text: str) -> tuple[str, str]:
    if ":" not in text:
        raise argparse.ArgumentTypeError(f"expected COACH:TEAM, got {text!r}")
    name, team = text.rsplit(":", 1)
    return name, team


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", type=Path, help="play-by-play CSV, or game logs (.jsonl) from `ingest`")
    common.add_argument("--schema", type=Path, help="column mapping file (key = value lines)")
    common.add_argument("--out", type=Path, default=Path("qmi_out"), help="output directory")
    common.add_argument("--seed", type=int, help="random seed (required by bootstrap and simulate)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--wp-range", type=_wp_range, help="win probability interval LO,HI")
    common.add_argument("--seasons", type=_int_set, help="e.g. 2014-2022 or 2019,2020")
    common.add_argument("--quarters", type=_int_set, help="e.g. 1,2,3")
    common.add_argument("--coach", type=_coach, help="COACH:TEAM")
    common.add_argument("--boot-B", type=int, default=200, help="bootstrap replicates")
    common.add_argument("--td-value", type=float, help="touchdown reward (default 6.95)")
    common.add_argument("--augment-go", choices=("on", "off"), default="on",
                        help="count third-down plays as counterfactual fourth-down attempts")
    common.add_argument("--no-smooth", action="store_true", help="use the raw quantile surface")

    p = argparse.ArgumentParser(prog="qmi", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qmi {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("ingest", parents=[common], help="parse plays into canonical game logs")
    sub.add_parser("estimate", parents=[common], help="transition counts")
    sub.add_parser("value", parents=[common], help="value table CSV (also accepts a toy-chain JSON)")
    sub.add_parser("surface", parents=[common], help="raw and smoothed quantile surfaces")
    sub.add_parser("policy", parents=[common], help="tau-optimal decision maps on the grid")
    sub.add_parser("inverse", parents=[common], help="optimal tau sets and loss curves")
    b = sub.add_parser("bootstrap", parents=[common], help="game-level bootstrap of tau")
    b.add_argument("--prescriptions", type=Path,
                   help="CSV game_id,play_id,action of external prescriptions to bootstrap alongside")
    sub.add_parser("partitions", parents=[common], help="rank candidate field partitions")
    s = sub.add_parser("simulate", parents=[common], help="synthetic league play-by-play CSV")
    s.add_argument("--config", type=Path, help="league configuration file (key = value lines)")
    s.add_argument("--games", type=int, help="number of games (overrides the config)")
    r = sub.add_parser("regress", parents=[common], help="points gained vs tau regression")
    r.add_argument("--elo", type=Path, required=True, help="CSV team,season,elo")
    r.add_argument("--tau", type=Path, help="CSV coach,team,season,wp_bin,region,tau_hat (default: estimate)")
    r.add_argument("--min-n", type=int, default=25)
    r.add_argument("--reward-credit", choices=("on", "off"), default="on",
                   help="credit the next state's reward in points gained")
    sub.add_parser("report", parents=[common], help="manifest of the artifacts in --out")
    return p


# --------------------------------------------------------------------------- helpers


def _filter(args) -> FilterSpec:
    return FilterSpec(seasons=args.seasons, wp_range=args.wp_range, quarters=args.quarters,
                      coach_team=args.coach)


def _config(args) -> PipelineConfig:
    reward = RewardSpec() if args.td_value is None else replace(RewardSpec(), td_value=args.td_value)
    cfg = PipelineConfig(reward=reward,
                         augment=AugmentationPolicy(enabled=args.augment_go == "on"))
    if args.no_smooth:
        cfg = replace(cfg, smooth=None)
    return cfg


def _require_input(args) -> Path:
    if args.input is None:
        raise ConfigError("--input is required")
    if not args.input.exists():
        raise ConfigError(f"input not found: {args.input}")
    return args.input


def _load_logs(args):
    path = _require_input(args)
    if path.suffix == ".jsonl":
        return read_game_logs(path)
    schema = None
    if args.schema is not None:
        if not args.schema.exists():
            raise ConfigError(f"schema file not found: {args.schema}")
        schema = read_schema_file(args.schema)
    table = parse_plays(path, schema)
    return build_game_logs(table)


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)
    return path


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _run(args):
    logs = _load_logs(args)
    cfg = _config(args)
    ev = extract_events(logs, _filter(args), cfg.augment)
    return logs, ev, cfg, run_events(ev, cfg)


# --------------------------------------------------------------------------- commands


def cmd_ingest(args):
    path = _require_input(args)
    schema = read_schema_file(args.schema) if args.schema else None
    table = parse_plays(path, schema)
    logs = build_game_logs(table)
    args.out.mkdir(parents=True, exist_ok=True)
    write_game_logs(logs, args.out / "game_logs.jsonl")
    _write(args.out, "ingest_summary.json", _dump({
        "plays": len(table), "games": len(logs), "dropped": table.dropped, "skipped": table.skipped,
        "malformed": len(table.errors),
        "first_errors": [str(e) for e in table.errors[:20]],
    }))


def cmd_estimate(args):
    logs = _load_logs(args)
    cfg = _config(args)
    model = extract_events(logs, _filter(args), cfg.augment).counts(aug=cfg.augment)
    _write(args.out, "transitions.json", model.to_json())


def _toy_value(path: Path, out: Path):
    d = json.loads(path.read_text())
    P = np.asarray(d["P"], dtype=np.float64)
    r = np.asarray(d["r"], dtype=np.float64)
    names = d.get("states", [str(k) for k in range(len(r))])
    w = solve_chain(P, r)
    rows = ["state,reward,value,cumulative\n"]
    for name, rk, wk in zip(names, r, w):
        rows.append(f"{name},{float(rk)!r},{float(wk - rk)!r},{float(wk)!r}\n")
    _write(out, "value_table.csv", "".join(rows))


def cmd_value(args):
    path = _require_input(args)
    if path.suffix == ".json":
        d = json.loads(path.read_text())
        if "P" in d:
            return _toy_value(path, args.out)
        model = TransitionModel.from_json(path.read_text())
        vt = solve_value(model, _config(args).reward)
    else:
        _, _, _, res = _run(args)
        vt = res.value
    _write(args.out, "value_table.csv", vt.to_csv())


def cmd_surface(args):
    _, _, _, res = _run(args)
    _write(args.out, "surface_raw.json", res.raw.to_json() + "\n")
    _write(args.out, "surface_smoothed.json", res.surface.to_json() + "\n")


def cmd_policy(args):
    _, ev, _, res = _run(args)
    _write(args.out, "decision_maps.csv", maps_to_csv(res.maps, res.surface.percents))
    fm = observed_frequency_map(ev.dec_sigma, ev.dec_action)
    _write(args.out, "observed_decisions.csv", frequency_to_csv(fm))


def cmd_inverse(args):
    _, _, _, res = _run(args)
    part = res.partition
    _write(args.out, "tau_sets.json", _dump({
        "sets": {str(k): v.to_dict() for k, v in part.sets.items()},
        "errors": {str(k): v for k, v in part.errors.items()},
        "joint_loss": part.joint_loss if part.sets else None,
    }))
    rows = ["region,tau,loss,n\n"]
    for reg, lc in part.curves.items():
        for p, loss in zip(lc.percents, lc.loss):
            rows.append(f"{reg},{int(p) / 100:.2f},{float(loss)!r},{lc.n}\n")
    _write(args.out, "loss_curves.csv", "".join(rows))


def _prescribed_decisions(logs, f: FilterSpec, path: Path):
    df = pd.read_csv(path, dtype={"game_id": str})
    missing = {"game_id", "play_id", "action"} - set(df.columns)
    if missing:
        raise ConfigError(f"prescriptions file lacks columns {sorted(missing)}")
    try:
        pres = {(g, int(p)): Action[str(a).strip().upper()]
                for g, p, a in zip(df["game_id"], df["play_id"], df["action"])}
    except KeyError as exc:
        raise DataError(f"unknown action in prescriptions: {exc}") from None
    sig, act, game = [], [], []
    for g_idx, g in enumerate(logs):
        for e in g.entries:
            if e.is_score or e.nullified or e.action is None or not f.matches_decision(e.record):
                continue
            a = pres.get((g.game_id, e.record.play_index))
            if a is not None:
                sig.append(canonical_sigma(e.record))
                act.append(int(a))
                game.append(g_idx)
    if not sig:
        raise DataError("no prescription matches a fourth-down decision in the input")
    return sig, act, game


def cmd_bootstrap(args):
    if args.seed is None:
        raise ConfigError("--seed is required for bootstrap")
    logs = _load_logs(args)
    cfg = _config(args)
    f = _filter(args)
    ev = extract_events(logs, f, cfg.augment)
    spec = BootstrapSpec(B=args.boot_B, seed=args.seed, threads=max(1, args.threads))
    post = bootstrap_tau(ev, spec, cfg)
    _write(args.out, "tau_posterior.json", post.to_json() + "\n")
    _write(args.out, "tau_posterior_long.csv", post.to_long_csv())
    if args.prescriptions is not None:
        if not args.prescriptions.exists():
            raise ConfigError(f"prescriptions file not found: {args.prescriptions}")
        alt = bootstrap_tau(ev.with_decisions(*_prescribed_decisions(logs, f, args.prescriptions)), spec, cfg)
        _write(args.out, "tau_posterior_prescribed.json", alt.to_json() + "\n")
        _write(args.out, "tau_posterior_prescribed_long.csv", alt.to_long_csv())
        diffs = {str(reg): paired_difference(post, reg, alt, reg).to_dict()
                 for reg in post.regions if reg in alt.regions}
        _write(args.out, "tau_differences.json", _dump(diffs))


def cmd_partitions(args):
    _, ev, _, res = _run(args)
    ranking = partition_search(res.decisions, res.maps)
    _write(args.out, "partitions.json", ranking.to_json() + "\n")


def cmd_simulate(args):
    if args.seed is None:
        raise ConfigError("--seed is required for simulate")
    league = read_league_config(args.config) if args.config else SyntheticLeague()
    league = replace(league, seed=args.seed)
    if args.td_value is not None:
        league = replace(league, td_value=args.td_value)
    if args.games is not None:
        league = replace(league, games=args.games)
    res = simulate(league)
    args.out.mkdir(parents=True, exist_ok=True)
    res.to_csv(args.out / "plays.csv")
    t = res.truth
    _write(args.out, "truth.json", _dump({
        "tau": {"OPPONENT_HALF": league.tau_opponent_half, "OWN_HALF": league.tau_own_half},
        "games": league.games, "seed": league.seed, "oracle_iterations": t.iterations,
        "coach_map": [Action(int(a)).name for a in t.maps],
        "region_maps": {str(getattr(reg, "name", reg)): [Action(int(a)).name for a in m]
                        for reg, m in t.region_maps.items()},
    }))


def _read_tau_csv(path: Path) -> dict:
    from .analysis import StratumKey
    from .domain import FieldRegion

    df = pd.read_csv(path, dtype={"coach": str, "team": str})
    need = {"coach", "team", "season", "wp_bin", "region", "tau_hat"}
    if need - set(df.columns):
        raise ConfigError(f"tau file lacks columns {sorted(need - set(df.columns))}")
    out = {}
    for row in df.itertuples(index=False):
        reg = row.region if isinstance(row.region, (int, np.integer)) else FieldRegion[str(row.region)]
        out[StratumKey(row.coach, row.team, int(row.season), int(row.wp_bin), int(reg))] = float(row.tau_hat)
    return out


def cmd_regress(args):
    if not args.elo.exists():
        raise ConfigError(f"elo file not found: {args.elo}")
    logs, _, cfg, res = _run(args)
    f = _filter(args)
    credit = args.reward_credit == "on"
    recs = points_gained(logs, res.value, f, DEFAULT_WP_BINS, credit)
    if args.tau is not None:
        taus = _read_tau_csv(args.tau)
    else:
        taus = stratum_tau_hat(stratum_decision_counts(logs, f, DEFAULT_WP_BINS), res.maps)
    recs = attach_covariates(recs, read_elo_csv(args.elo), taus)
    _write(args.out, "points_gained.csv", records_to_csv(recs, DEFAULT_WP_BINS, credit))
    fit = fit_points_gained(recs, args.min_n)
    _write(args.out, "regression.csv", fit.to_csv())


_KINDS = {".json": "json", ".jsonl": "jsonl", ".csv": "csv"}


def cmd_report(args):
    out = args.out
    if not out.is_dir():
        raise ConfigError(f"output directory not found: {out}")
    files = []
    for path in sorted(out.iterdir()):
        if not path.is_file() or path.name == "manifest.json":
            continue
        data = path.read_bytes()
        entry = {"file": path.name, "format": _KINDS.get(path.suffix, "other"), "bytes": len(data),
                 "sha256": hashlib.sha256(data).hexdigest()}
        if path.suffix == ".csv":
            lines = data.decode("utf-8").splitlines()
            entry["columns"] = lines[0].split(",") if lines else []
            entry["rows"] = max(len(lines) - 1, 0)
        files.append(entry)
    _write(out, "manifest.json", _dump({"format": "qmi.manifest/1", "version": __version__,
                                        "n_states": N_STATES, "artifacts": files}))


COMMANDS = {
    "ingest": cmd_ingest, "estimate": cmd_estimate, "value": cmd_value, "surface": cmd_surface,
    "policy": cmd_policy, "inverse": cmd_inverse, "bootstrap": cmd_bootstrap,
    "partitions": cmd_partitions, "simulate": cmd_simulate, "regress": cmd_regress, "report": cmd_report,
}


def _error(kind: str, exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    level = os.environ.get("QMI_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        return _error("config", exc, EXIT_CONFIG)
    except DataError as exc:
        return _error("data", exc, EXIT_DATA)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        return _error("numerical", exc, EXIT_NUMERICAL)
    except QmiError as exc:
        return _error("data", exc, EXIT_DATA)
    return 0


if __name__ == "__main__":
    sys.exit(main())
