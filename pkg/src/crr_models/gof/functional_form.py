from __future__ import annotations

import numpy as np

from crr_core.exceptions import DegenerateCovariate
from crr_core.logging import get_logger
from crr_models.fitter import FitResult, iter_residual_blocks

from .perturb import check_draws, iter_perturbations, monte_carlo_pvalue
from .types import GofEntry, ProcessKind, TestProcess

log = get_logger("crr.gof")

MAX_THRESHOLDS = 512


def thresholds(values: np.ndarray, cap: int = MAX_THRESHOLDS) -> np.ndarray:
    """Distinct observed values, or ``cap`` quantiles of them when there are more."""
    distinct = np.unique(values)
    if distinct.size < 2:
        raise DegenerateCovariate(f"covariate needs >= 2 distinct values, got {distinct.size}")
    if distinct.size <= cap:
        return distinct
    return np.unique(np.quantile(values, np.linspace(0.0, 1.0, cap), method="inverted_cdf"))


def form_influence(
    fit: FitResult, l: int, cap: int = MAX_THRESHOLDS
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Q̂ᵢ(τ, x) with f ≡ 1 over thresholds x on covariate l (other coordinates at +inf).
    Returns (thresholds, Q, W) with Q of shape (n, T) and W_l(τ, x) = Σᵢ Q̂ᵢ(x).
    """
    ds, agg, grid = fit.ds, fit.aggregates, fit.grid
    L, n, p = grid.size, ds.n, fit.p
    thr = thresholds(ds.X[:, l], cap)
    T = thr.size
    bins = np.searchsorted(thr, ds.X[:, l], side="left")

    R = np.zeros((n, T))
    GK, GI = np.zeros((L, T)), np.zeros((L, T))
    HI = np.zeros((L, T, p))
    DJ, DC = np.zeros((n, L)), np.zeros((n, L))
    for block in iter_residual_blocks(fit):
        rows = block.rows
        onehot = np.zeros((bins[rows].size, T))
        onehot[np.arange(onehot.shape[0]), bins[rows]] = 1.0
        cl = ds.cluster[rows]
        resid = (block.dJ + block.dC).sum(axis=1)
        np.add.at(R, cl, onehot * resid[:, None])
        GK += block.wK.T @ onehot
        GI += block.wI.T @ onehot
        mx = (onehot[:, :, None] * ds.X[rows][:, None, :]).reshape(-1, T * p)
        HI += (block.wI.T @ mx).reshape(L, T, p)
        np.add.at(DJ, cl, block.dJ)
        np.add.at(DC, cl, block.dC)

    # I(X_l <= thr[j]) is a cumulative sum over bins
    R, GK, GI, HI = (np.cumsum(a, axis=1) for a in (R, GK, GI, HI))
    gK = np.divide(GK, agg.S0K[:, None], out=np.zeros_like(GK), where=agg.S0K[:, None] > 0)
    gI = np.divide(GI, agg.S0I[:, None], out=np.zeros_like(GI), where=agg.S0I[:, None] > 0)
    H = np.einsum("atl,al->tl", HI - gI[:, :, None] * agg.S1I[:, None, :], grid.I1)

    eta = fit.increments.eta
    correction = eta @ np.linalg.solve(fit.A_tau * n, H.T)
    Q = R - DJ @ gK - DC @ gI - correction
    return thr, Q, R.sum(axis=0)


def _axis_floor(thr: np.ndarray) -> float:
    span = float(thr[-1] - thr[0])
    return float(thr[0] - max(0.01 * span, 1e-8))


def functional_form_test(
    fit: FitResult,
    l: int | str,
    B: int = 1000,
    seed: int = 0,
    *,
    add_one: bool = False,
    keep_draws: int | None = None,
    cap: int = MAX_THRESHOLDS,
) -> GofEntry:
    """sup_x |W_l(τ, x)| against B multiplier draws of Σᵢ ξᵢ Q̂ᵢ(τ, x)."""
    check_draws(B)
    idx = fit.ds.names.index(l) if isinstance(l, str) else int(l)
    name = fit.ds.names[idx]
    thr, Q, observed = form_influence(fit, idx, cap)
    stat = float(np.abs(observed).max())

    keep = B if keep_draws is None else min(keep_draws, B)
    sups, kept = [], []
    for block in iter_perturbations(Q, B, seed):
        sups.append(np.abs(block).max(axis=1))
        if sum(k.shape[0] for k in kept) < keep:
            kept.append(block)
    sups = np.concatenate(sups)
    draws = np.concatenate(kept, axis=0)[:keep] if kept else np.zeros((0, thr.size))

    tp = TestProcess(
        kind=ProcessKind.FUNCTIONAL_FORM,
        covariate=name,
        axis=np.r_[_axis_floor(thr), thr],
        observed=np.r_[0.0, observed],
        perturbed=np.hstack([np.zeros((draws.shape[0], 1)), draws]),
    )
    p_value = monte_carlo_pvalue(stat, sups, add_one)
    log.debug(
        "functional form %s: sup|W|=%.4f p=%.4f (B=%d, %d thresholds)",
        name,
        stat,
        p_value,
        B,
        thr.size,
    )
    return GofEntry(
        test=ProcessKind.FUNCTIONAL_FORM,
        covariate=name,
        statistic=stat,
        p_value=p_value,
        process=tp,
    )
