from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import joblib as jbl
import numpy as np
import pandas as pd

from crr_core.exceptions import BootstrapFitFailure, ConfigError, CrrError
from crr_core.logging import get_logger
from crr_models.censoring import WeightMode
from crr_models.dataset import ClusteredDataset, CovariatePath, TimeGrid
from crr_models.fitter import FitResult, baseline_at, fit

log = get_logger("crr.variance")

MAX_FAILURE_SHARE = 0.10


@dataclass(frozen=True, eq=False)
class CifPrediction:
    """
    F̂ₖ(t, X) on ``times``. Values are reported raw and may be non-monotone. The band, when
    present, is a pointwise percentile band widened to contain the point estimate.
    """

    times: np.ndarray
    point: np.ndarray
    X: CovariatePath
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    B_boot: int = 0
    level: float | None = None
    failures: int = 0

    def to_frame(self) -> pd.DataFrame:
        cols = {"time": self.times, "cif": self.point}
        if self.lower is not None:
            cols["lower"] = self.lower
            cols["upper"] = self.upper
        return pd.DataFrame(cols)


def _cumulative_I1(grid: TimeGrid, times: np.ndarray) -> np.ndarray:
    out = np.zeros((times.size, len(grid.basis)))
    cum = np.cumsum(grid.I1, axis=0)
    for i, t in enumerate(times):
        if t <= 0:
            continue
        a, I1_part, _, _ = grid.truncated(float(t))
        out[i] = (cum[a - 1] if a > 0 else 0.0) + I1_part
    return out


def predict_cif(
    fit_res: FitResult,
    X: CovariatePath,
    times: Sequence[float] | np.ndarray | None = None,
) -> CifPrediction:
    """F̂(t, X) = 1 - exp{-Λ̂₀(t) - ∫₀ᵗ X(u)'β̂ du}; default times are 0 and the grid knots."""
    if X.p != fit_res.p:
        raise ValueError(f"profile has {X.p} covariates, fit has {fit_res.p}")
    grid = fit_res.grid
    if X.basis != grid.basis:
        grid = TimeGrid(knots=grid.knots, Q=grid.Q, basis=X.basis)
    t = np.r_[0.0, fit_res.grid.knots] if times is None else np.asarray(times, dtype=float)

    base = np.array([baseline_at(fit_res, float(u)) for u in t])
    linear = (_cumulative_I1(grid, t) * X.base[None, :]) @ fit_res.beta
    point = 1.0 - np.exp(-base - linear)
    return CifPrediction(times=t, point=point, X=X)


def predict_cif_table(
    fit_res: FitResult,
    profiles: Sequence[CovariatePath],
    labels: Sequence[str] | None = None,
    times: Sequence[float] | np.ndarray | None = None,
) -> pd.DataFrame:
    """Wide table with one CIF column per covariate profile."""
    labels = list(labels) if labels is not None else [f"profile_{i}" for i in range(len(profiles))]
    preds = [predict_cif(fit_res, X, times) for X in profiles]
    frame = pd.DataFrame({"time": preds[0].times})
    for label, pred in zip(labels, preds):
        frame[label] = pred.point
    return frame


def _resample_curve(
    ds: ClusteredDataset,
    k: int,
    X: CovariatePath,
    times: np.ndarray,
    seed: np.random.SeedSequence,
    mode: WeightMode,
    Q: int,
    ghat_floor: float,
) -> np.ndarray | None:
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, ds.n, size=ds.n)
    boot = ds.take_clusters(idx)
    failed = boot.time[(boot.status != 0) & (boot.time <= ds.tau)]
    if failed.size == 0:
        return None
    tau_b = float(failed.max())
    try:
        res = fit(boot.with_tau(tau_b), k, mode, Q=Q, ghat_floor=ghat_floor)
    except CrrError as e:
        log.debug("bootstrap resample failed: %s", e)
        return None
    inside = times <= tau_b
    out = np.full(times.size, np.nan)
    out[inside] = predict_cif(res, X, times[inside]).point
    return out


def bootstrap_cif_band(
    ds: ClusteredDataset,
    k: int,
    X: CovariatePath,
    B: int = 200,
    level: float = 0.95,
    seed: int = 0,
    *,
    mode: WeightMode | str = WeightMode.IPCW,
    Q: int = 16,
    ghat_floor: float = 1e-10,
    n_jobs: int = 1,
) -> CifPrediction:
    """
    Cluster bootstrap percentile band for F̂ₖ(t, X). Each resample draws n clusters with
    replacement on its own spawned seed and refits with τ cut back to its largest failure time;
    times past that τ do not enter the band.
    """
    if B < 100:
        raise ConfigError(f"bootstrap needs B >= 100, got {B}")
    if not 0 < level < 1:
        raise ConfigError(f"level must lie in (0, 1), got {level}")
    mode = WeightMode(mode)

    base = fit(ds, k, mode, Q=Q, ghat_floor=ghat_floor)
    pred = predict_cif(base, X)
    seeds = np.random.SeedSequence(seed).spawn(B)

    curves = jbl.Parallel(n_jobs=n_jobs)(
        jbl.delayed(_resample_curve)(ds, k, X, pred.times, s, mode, Q, ghat_floor) for s in seeds
    )
    ok = [c for c in curves if c is not None]
    failures = B - len(ok)
    if failures:
        log.warning("%d of %d bootstrap resamples failed to fit", failures, B)
    if failures > MAX_FAILURE_SHARE * B:
        raise BootstrapFitFailure(failed=failures, total=B)

    draws = np.vstack(ok)
    alpha = 100 * (1 - level) / 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        lower, upper = np.nanpercentile(draws, [alpha, 100 - alpha], axis=0)
    lower = np.fmin(lower, pred.point)
    upper = np.fmax(upper, pred.point)

    return CifPrediction(
        times=pred.times,
        point=pred.point,
        X=X,
        lower=lower,
        upper=upper,
        B_boot=B,
        level=level,
        failures=failures,
    )
