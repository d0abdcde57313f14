"""Inverse estimation of quantile risk preferences for fourth-down decisions."""

from .domain import (
    Action,
    FieldRegion,
    FourthDownState,
    PlayState,
    RewardSpec,
    ScoreKind,
    ScoreState,
    TeamLabel,
    field_region,
    reward,
    state_from_index,
    state_index,
)
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "Action",
    "FieldRegion",
    "FourthDownState",
    "KERNEL_BACKEND",
    "PlayState",
    "RewardSpec",
    "ScoreKind",
    "ScoreState",
    "TeamLabel",
    "field_region",
    "reward",
    "state_from_index",
    "state_index",
]
