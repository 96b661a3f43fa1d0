"""Skeleton video anomaly detection with graph-conditioned diffusion."""

from ._gicisad import (
    ConfigError,
    Error,
    Model,
    NumericError,
    aggregate,
    auroc,
    multi_actor_score,
    schedule,
    synthesize,
    train,
)

__all__ = [
    "ConfigError",
    "Error",
    "Model",
    "NumericError",
    "aggregate",
    "auroc",
    "multi_actor_score",
    "schedule",
    "synthesize",
    "train",
]
