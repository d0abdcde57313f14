"""Counts to tau estimates: value solve, surface, smoothing, maps, inverse solve."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import SIGMA_REGION, RewardSpec
from .ingest import FilterSpec, GameLog
from .inverse import PartitionResult, solve_partitioned
from .policy import all_maps
from .smoothing import SmoothSpec, smooth_surface
from .transitions import AugmentationPolicy, EventArrays, TransitionModel, extract_events
from .valuation import QuantileSurface, ValueTable, build_surface, solve_value


@dataclass(frozen=True)
class PipelineConfig:
    reward: RewardSpec = RewardSpec()
    augment: AugmentationPolicy = AugmentationPolicy()
    smooth: SmoothSpec | None = field(default_factory=SmoothSpec)
    region_of: tuple = tuple(int(r) for r in SIGMA_REGION)


@dataclass
class PipelineResult:
    model: TransitionModel
    value: ValueTable
    raw: QuantileSurface
    surface: QuantileSurface
    maps: np.ndarray
    decisions: np.ndarray
    partition: PartitionResult


def surfaces_from_model(model: TransitionModel, cfg: PipelineConfig = PipelineConfig()):
    vt = solve_value(model, cfg.reward)
    raw = build_surface(model, vt)
    if cfg.smooth is None:
        surf = raw
    else:
        surf = smooth_surface(raw, model.action_totals(), cfg.smooth)
    return vt, raw, surf


def run_from_counts(model: TransitionModel, N: np.ndarray, cfg: PipelineConfig = PipelineConfig()) -> PipelineResult:
    vt, raw, surf = surfaces_from_model(model, cfg)
    maps = all_maps(surf)
    region_of = np.asarray(cfg.region_of, dtype=np.int64)
    if np.array_equal(region_of, SIGMA_REGION):
        region_of = SIGMA_REGION
    part = solve_partitioned(N, maps, region_of)
    return PipelineResult(model, vt, raw, surf, maps, np.asarray(N), part)


def run_events(ev: EventArrays, cfg: PipelineConfig = PipelineConfig(), multiplicity=None) -> PipelineResult:
    model = ev.counts(multiplicity, cfg.augment)
    return run_from_counts(model, ev.decision_counts(multiplicity), cfg)


def run_pipeline(logs: Sequence[GameLog], f: FilterSpec = FilterSpec(),
                 cfg: PipelineConfig = PipelineConfig()) -> PipelineResult:
    return run_events(extract_events(logs, f, cfg.augment), cfg)
