from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from crr_core.exceptions import GhatZeroBeforeTau
from crr_core.logging import get_logger

from crr_models.dataset import CENSORED, ClusteredDataset

log = get_logger("crr.censoring")


@dataclass(frozen=True, eq=False)
class CensoringModel:
    """
    Product-limit estimate of the censoring survival G with censoring as the event.

    Ĝ is right-continuous: ``G(t)`` is the product over censoring times u <= t.
    ``risk_totals`` holds Σ Y^c(u) = #{Z >= u} at each censoring time.
    """

    km_times: np.ndarray
    km_values: np.ndarray
    cum_hazard: np.ndarray
    risk_totals: np.ndarray
    events: np.ndarray
    sorted_time: np.ndarray
    n_clusters: int
    floor: float = 1e-10

    def _step(self, values: np.ndarray, t: np.ndarray | float, at_zero: float) -> np.ndarray:
        idx = np.searchsorted(self.km_times, np.asarray(t, dtype=float), side="right")
        padded = np.r_[at_zero, values]
        return padded[idx]

    def G(self, t: np.ndarray | float) -> np.ndarray:
        return self._step(self.km_values, t, 1.0)

    def cumulative_hazard(self, t: np.ndarray | float) -> np.ndarray:
        return self._step(self.cum_hazard, t, 0.0)

    def hazard_jump(self, t: np.ndarray | float) -> np.ndarray:
        """dΛ̂^c(t): d/Y at censoring times, 0 elsewhere."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t.shape)
        if not self.km_times.size:
            return out
        idx = np.minimum(np.searchsorted(self.km_times, t, side="left"), self.km_times.size - 1)
        hit = self.km_times[idx] == t
        out[hit] = (self.events[idx] / self.risk_totals[idx])[hit]
        return out

    def at_risk(self, t: np.ndarray | float) -> np.ndarray:
        """#{Z >= t}."""
        t = np.asarray(t, dtype=float)
        return self.sorted_time.size - np.searchsorted(self.sorted_time, t, side="left")

    def pi(self, t: np.ndarray | float) -> np.ndarray:
        """π̂(t) = n⁻¹ Σ Y^c(t), n = number of clusters."""
        return self.at_risk(t) / self.n_clusters


def fit_censoring_km(ds: ClusteredDataset, floor: float = 1e-10) -> CensoringModel:
    """
    Pooled Kaplan–Meier of the censoring distribution. Failures tied with a censoring time
    keep their subjects in the censoring risk set at that time (risk set is Z >= u).
    """
    sorted_time = np.sort(ds.time)
    cens = ds.time[ds.status == CENSORED]
    km_times, events = np.unique(cens, return_counts=True)
    risk = sorted_time.size - np.searchsorted(sorted_time, km_times, side="left")

    with np.errstate(divide="ignore", invalid="ignore"):
        frac = events / risk
    km_values = np.cumprod(1.0 - frac)
    cum_hazard = np.cumsum(frac)

    model = CensoringModel(
        km_times=km_times.astype(float),
        km_values=km_values,
        cum_hazard=cum_hazard,
        risk_totals=risk.astype(float),
        events=events.astype(float),
        sorted_time=sorted_time,
        n_clusters=ds.n,
        floor=floor,
    )
    g_tau = float(model.G(ds.tau))
    if g_tau <= floor:
        raise GhatZeroBeforeTau(f"G(tau={ds.tau:.6g}) = {g_tau:.3g} is at or below floor {floor:g}")

    log.debug(
        "censoring KM: %d censoring times, G(tau)=%.4f, censored share %.3f",
        km_times.size,
        g_tau,
        cens.size / max(ds.N, 1),
    )
    return model


def km_table(model: CensoringModel) -> pd.DataFrame:
    """Two-column (time, G) step table starting at t=0."""
    return pd.DataFrame(
        {
            "time": np.r_[0.0, model.km_times],
            "G": np.r_[1.0, model.km_values],
        }
    )
