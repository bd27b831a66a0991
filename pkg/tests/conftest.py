from __future__ import annotations

import numpy as np
import pytest

from crr_models.dataset import Basis, ClusteredDataset
from crr_models.simgen import SimConfig, generate


def make_dataset(
    cluster,
    time,
    status,
    X,
    *,
    tau=None,
    K=2,
    ctime=None,
    basis=None,
    names=None,
) -> ClusteredDataset:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    p = X.shape[1]
    cluster = np.asarray(cluster)
    time = np.asarray(time, dtype=float)
    status = np.asarray(status)
    if tau is None:
        failed = time[status != 0]
        tau = float(failed.max()) if failed.size else float(time.max())
    return ClusteredDataset(
        cluster=cluster,
        time=time,
        status=status,
        X=X,
        basis=basis or (Basis.CONST,) * p,
        names=names or tuple(f"x{j + 1}" for j in range(p)),
        tau=tau,
        K=K,
        cluster_labels=tuple(str(c) for c in range(int(cluster.max()) + 1)),
        ctime=ctime,
    )


@pytest.fixture
def tiny_ds() -> ClusteredDataset:
    """Three clusters of two, one binary covariate, censoring at t=2 and t=6, τ = 5."""
    return make_dataset(
        cluster=[0, 0, 1, 1, 2, 2],
        time=[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        status=[1, 0, 2, 1, 1, 0],
        X=[1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
    )


@pytest.fixture
def uncensored_ds() -> ClusteredDataset:
    """Single cause, no censoring, two constant covariates."""
    rng = np.random.default_rng(3)
    n, m = 8, 3
    X = np.column_stack([rng.uniform(0, 1, n * m), rng.binomial(1, 0.5, n * m)])
    time = rng.exponential(1.0 / (0.5 + X @ np.array([1.0, 0.5])))
    return make_dataset(
        cluster=np.repeat(np.arange(n), m),
        time=time,
        status=np.ones(n * m, dtype=int),
        X=X,
        K=1,
    )


@pytest.fixture(scope="session")
def sim() -> "SimDataset":  # noqa: F821
    return generate(SimConfig(n_clusters=30, cluster_size=4, seed=11))


@pytest.fixture(scope="session")
def sim_ds(sim) -> ClusteredDataset:
    return sim.dataset
