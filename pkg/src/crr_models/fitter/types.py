from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd

from crr_models.censoring import CensoringModel, WeightMatrix, WeightMode
from crr_models.dataset import ClusteredDataset, TimeGrid

if TYPE_CHECKING:
    from .residuals import ClusterIncrements


@dataclass(frozen=True, eq=False)
class RiskAggregates:
    """
    Weighted risk-set sums, unnormalised (the 1/n factor cancels everywhere it is used).

    Interval quantities (suffix I) use the weight on (starts[a], knots[a]); knot quantities
    (suffix K) the weight at knots[a]. Covariates enter through their base values; the time
    basis is applied through the grid moments.
    """

    S0I: np.ndarray
    S1I: np.ndarray
    S2I: np.ndarray
    S0K: np.ndarray
    S1K: np.ndarray
    events: np.ndarray
    score_jumps: np.ndarray

    @cached_property
    def XbarI(self) -> np.ndarray:
        return _ratio(self.S1I, self.S0I)

    @cached_property
    def XbarK(self) -> np.ndarray:
        return _ratio(self.S1K, self.S0K)

    @cached_property
    def centered_S2(self) -> np.ndarray:
        """S2 - S1 S1'/S0 per interval, i.e. Σ w (x - x̄)(x - x̄)'."""
        outer = self.S1I[:, :, None] * self.XbarI[:, None, :]
        return self.S2I - outer


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    shape = (-1,) + (1,) * (num.ndim - 1)
    d = den.reshape(shape)
    return np.divide(num, d, out=np.zeros_like(num), where=d > 0)


@dataclass(frozen=True, eq=False)
class FitResult:
    """
    Weighted least-squares fit of the additive subdistribution hazards model for one cause.

    - ``A_tau`` = Â(τ) = n⁻¹ Σ ∫ ω̂ Y X̃ X̃' dt and ``A_path[a]`` = Â(knots[a])
    - ``jump`` / ``dcont`` are the step and drift increments of Λ̂₀ on each grid interval
    """

    ds: ClusteredDataset
    grid: TimeGrid
    cause: int
    mode: WeightMode
    beta: np.ndarray
    A_tau: np.ndarray
    A_path: np.ndarray
    jump: np.ndarray
    dcont: np.ndarray
    aggregates: RiskAggregates = field(repr=False)
    weights: WeightMatrix = field(repr=False)
    censoring: CensoringModel | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.ds.n

    @property
    def p(self) -> int:
        return int(self.beta.size)

    @property
    def baseline(self) -> np.ndarray:
        """Λ̂₀ at each knot."""
        return np.cumsum(self.jump + self.dcont)

    def baseline_curve(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"time": np.r_[0.0, self.grid.knots], "baseline": np.r_[0.0, self.baseline]}
        )

    @cached_property
    def increments(self) -> "ClusterIncrements":
        from .residuals import cluster_increments

        return cluster_increments(self)


@dataclass(frozen=True, eq=False)
class ResidualPath:
    """M̂(t) at the grid knots; ``dN`` holds the counting-process part of each step."""

    times: np.ndarray
    values: np.ndarray
    dN: np.ndarray

    def at(self, t: float) -> float:
        idx = int(np.searchsorted(self.times, t, side="right"))
        return 0.0 if idx == 0 else float(self.values[idx - 1])
