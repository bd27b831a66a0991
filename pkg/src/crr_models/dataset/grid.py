from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crr_core.logging import get_logger

from .types import CauseCode, ClusteredDataset, SubjectRecord, TimeGrid

log = get_logger("crr.dataset")


def build_grid(ds: ClusteredDataset, Q: int = 16) -> TimeGrid:
    """
    Knots are the distinct observed times <= τ plus τ itself; recorded censoring times <= τ
    join them so that I(C > t) stays constant between knots. Q collapses to 1 when every
    covariate basis is constant (the trapezoid rule is then exact).
    """
    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")

    pool = [ds.time[ds.time <= ds.tau], np.array([ds.tau])]
    if ds.ctime is not None:
        pool.append(ds.ctime[ds.ctime <= ds.tau])
    knots = np.unique(np.concatenate(pool))
    knots = knots[knots > 0]

    q_eff = 1 if ds.all_constant else int(Q)
    if q_eff != Q:
        log.debug("all covariates constant; quadrature Q=%d reduced to 1", Q)
    return TimeGrid(knots=knots, Q=q_eff, basis=ds.basis)


@dataclass(frozen=True)
class CountingState:
    N: int
    Y: int


def counting_process(record: SubjectRecord, k: int, t: float) -> CountingState:
    """
    N(t) = I(Z <= t, cause = k); Y(t) = 1 - N(t-). Subjects failing from another cause stay
    in the subdistribution risk set.
    """
    hit = record.cause == CauseCode(k)
    N = int(hit and record.time <= t)
    Y = 0 if (hit and record.time < t) else 1
    return CountingState(N=N, Y=Y)
