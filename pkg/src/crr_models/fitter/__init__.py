from .types import FitResult, ResidualPath, RiskAggregates
from .estimate import baseline_at, fit, fitted_score, risk_aggregates, score
from .residuals import (
    ClusterIncrements,
    cluster_increments,
    cluster_sum,
    iter_residual_blocks,
    residual_path,
    score_increments,
    score_paths,
)

__all__ = [
    "FitResult",
    "ResidualPath",
    "RiskAggregates",
    "baseline_at",
    "fit",
    "fitted_score",
    "risk_aggregates",
    "score",
    "ClusterIncrements",
    "cluster_increments",
    "cluster_sum",
    "iter_residual_blocks",
    "residual_path",
    "score_increments",
    "score_paths",
]
