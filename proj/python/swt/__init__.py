"""Python bindings for sense weight training."""

from ._core import (
    SwtError,
    TrainConfig,
    absolute_mask,
    generate_synthetic,
    load_embeddings,
    pairwise_similarity,
    percentile_mask,
    recovery_score,
    run_cli,
    spearman,
    train_group,
)

__all__ = [
    "SwtError",
    "TrainConfig",
    "absolute_mask",
    "generate_synthetic",
    "load_embeddings",
    "pairwise_similarity",
    "percentile_mask",
    "recovery_score",
    "run_cli",
    "spearman",
    "train_group",
]
