from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import StrEnum
from typing import Any

from crr_core.exceptions import SimConfigError


class SimModel(StrEnum):
    M1 = "m1"  # additive subdistribution hazards for cause 1
    M2 = "m2"  # proportional subdistribution hazards for cause 1


class CovariateDesign(StrEnum):
    UNIFORM = "uniform01"
    NORMAL_BERNOULLI = "normal-bernoulli"

    @property
    def dim(self) -> int:
        return 1 if self is CovariateDesign.UNIFORM else 2

    @property
    def names(self) -> tuple[str, ...]:
        return ("x",) if self is CovariateDesign.UNIFORM else ("x1", "x2")


@dataclass(frozen=True)
class SimConfig:
    """
    One data-generating setting.

    - ``gamma`` is the exponential censoring rate
    - ``horizon`` optionally caps every censoring time (administrative end of study)
    - ``replicate`` selects the independent stream family under ``seed``
    """

    n_clusters: int = 100
    cluster_size: int = 10
    rho: float = 0.5
    theta: float = 0.7
    beta1: tuple[float, ...] = (1.0,)
    beta2: tuple[float, ...] = (0.2,)
    gamma: float = 0.35
    model: SimModel = SimModel.M1
    covariates: CovariateDesign = CovariateDesign.UNIFORM
    seed: int = 0
    horizon: float | None = None
    replicate: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "model", SimModel(self.model))
        object.__setattr__(self, "covariates", CovariateDesign(self.covariates))
        object.__setattr__(self, "beta1", tuple(float(b) for b in self.beta1))
        object.__setattr__(self, "beta2", tuple(float(b) for b in self.beta2))

        if not 0 < self.rho < 1:
            raise SimConfigError(f"rho must lie in (0, 1), got {self.rho}")
        if self.theta <= 0:
            raise SimConfigError(f"theta must be > 0, got {self.theta}")
        if self.gamma <= 0:
            raise SimConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.n_clusters < 2:
            raise SimConfigError(f"need at least 2 clusters, got {self.n_clusters}")
        if self.cluster_size < 1:
            raise SimConfigError(f"cluster size must be >= 1, got {self.cluster_size}")
        if self.horizon is not None and self.horizon <= 0:
            raise SimConfigError(f"horizon must be > 0, got {self.horizon}")
        dim = self.covariates.dim
        if len(self.beta1) != dim or len(self.beta2) != dim:
            raise SimConfigError(
                f"{self.covariates.value} design has {dim} covariates; "
                f"got beta1={self.beta1}, beta2={self.beta2}"
            )

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["model"] = self.model.value
        out["covariates"] = self.covariates.value
        return out
