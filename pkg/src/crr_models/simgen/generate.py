from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from crr_core.exceptions import InvalidProbability
from crr_core.logging import get_logger
from crr_models.dataset import Basis, ClusteredDataset

from .config import SimConfig
from .draws import (
    PROB_TOL,
    assign_cause,
    cause1_probability,
    draw_covariates,
    draw_failure_time,
    draw_frailty,
)

log = get_logger("crr.simgen")

REDRAW_LIMIT = 1000


@dataclass(frozen=True, eq=False)
class SimDataset:
    dataset: ClusteredDataset
    true_time: np.ndarray
    true_cause: np.ndarray
    ctime: np.ndarray
    frailty: np.ndarray  # per subject, repeated within cluster
    config: SimConfig

    @property
    def truth(self) -> dict[str, np.ndarray]:
        return {
            "true_time": self.true_time,
            "true_cause": self.true_cause,
            "ctime": self.ctime,
            "frailty": self.frailty,
        }

    @property
    def censored_share(self) -> float:
        return float(np.mean(self.dataset.status == 0))


def cluster_rng(seed: int, replicate: int, cluster: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, replicate, cluster)."""
    ss = np.random.SeedSequence(seed, spawn_key=(replicate, cluster))
    return np.random.Generator(np.random.Philox(ss))


def _admissible_covariates(
    config: SimConfig, nu: float, rng: np.random.Generator
) -> np.ndarray:
    """Covariates whose cause-1 probability lies in [0, 1]; offending rows are redrawn."""
    X = draw_covariates(config.covariates, config.cluster_size, rng)
    for _ in range(REDRAW_LIMIT):
        P = cause1_probability(X, nu, config.rho, np.asarray(config.beta1), config.model)
        bad = ~((P >= -PROB_TOL) & (P <= 1 + PROB_TOL))
        if not bad.any():
            return X
        X[bad] = draw_covariates(config.covariates, int(bad.sum()), rng)
    raise InvalidProbability(
        f"covariates with cause-1 probability in [0, 1] not found in {REDRAW_LIMIT} redraws"
    )


def _cluster(config: SimConfig, i: int) -> tuple[np.ndarray, ...]:
    rng = cluster_rng(config.seed, config.replicate, i)
    nu = draw_frailty(config.theta, config.rho, rng)
    X = _admissible_covariates(config, nu, rng)
    eps = assign_cause(X, nu, config.rho, np.asarray(config.beta1), config.model, rng)
    T = draw_failure_time(X, nu, eps, config, rng)
    C = rng.exponential(1.0 / config.gamma, size=config.cluster_size)
    if config.horizon is not None:
        C = np.minimum(C, config.horizon)
    return X, eps, T, C, np.full(config.cluster_size, nu)


def generate(config: SimConfig, replicate: int | None = None) -> SimDataset:
    """
    Clustered competing-risks data from the frailty-coupled cause-1 model:
    ν per cluster, then per subject X, ε, T from F̃_ε, C ~ Exponential(γ) capped at the horizon,
    Z = min(T, C) and status = I(T <= C) ε. τ is the largest observed failure time.
    """
    if replicate is not None:
        config = replace(config, replicate=replicate)
    n, m = config.n_clusters, config.cluster_size

    parts = [_cluster(config, i) for i in range(n)]
    X, eps, T, C, nu = (np.concatenate(col) for col in zip(*parts))
    Z = np.minimum(T, C)
    status = np.where(T <= C, eps, 0).astype(np.int64)

    failed = status > 0
    tau = float(Z[failed].max()) if failed.any() else float(Z.max())
    ds = ClusteredDataset(
        cluster=np.repeat(np.arange(n), m),
        time=Z,
        status=status,
        X=X,
        basis=(Basis.EXP_DECAY,) * config.covariates.dim,
        names=config.covariates.names,
        tau=tau,
        K=2,
        cluster_labels=tuple(str(i) for i in range(n)),
        ctime=C,
    )
    sim = SimDataset(
        dataset=ds, true_time=T, true_cause=eps, ctime=C, frailty=nu, config=config
    )
    log.debug(
        "generated %s replicate %d: N=%d censored=%.3f cause1=%d",
        config.model.value,
        config.replicate,
        ds.N,
        sim.censored_share,
        int(np.count_nonzero(status == 1)),
    )
    return sim
