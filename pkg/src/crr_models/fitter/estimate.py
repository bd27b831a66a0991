from __future__ import annotations

import numpy as np

from crr_core.exceptions import NoEventsForCause, SingularDesign
from crr_core.logging import get_logger
from crr_models.censoring import CensoringModel, WeightMatrix, WeightMode, fit_censoring_km
from crr_models.dataset import ClusteredDataset, TimeGrid, build_grid
from crr_models.dataset.io import require_ctime

from .types import FitResult, RiskAggregates

log = get_logger("crr.fitter")

COND_LIMIT = 1e12
MIN_EVENTS = 5


def event_indicator(W: WeightMatrix, rows: slice) -> np.ndarray:
    """dN^k at the knots for a block of subjects."""
    idx = np.arange(W.zi.size)[rows]
    out = np.zeros((idx.size, W.L))
    hit = W.event[idx]
    out[np.flatnonzero(hit), W.zi[idx][hit]] = 1.0
    return out


def risk_aggregates(ds: ClusteredDataset, grid: TimeGrid, W: WeightMatrix) -> RiskAggregates:
    L, p = grid.size, ds.p
    S0I, S1I, S2I = np.zeros(L), np.zeros((L, p)), np.zeros((L, p, p))
    S0K, S1K = np.zeros(L), np.zeros((L, p))
    E0, E1 = np.zeros(L), np.zeros((L, p))

    for rows in W.chunks():
        x = ds.X[rows]
        wI, wK = W.interval(rows), W.knot(rows)
        dN = event_indicator(W, rows) * wK
        S0I += wI.sum(axis=0)
        S1I += wI.T @ x
        S2I += np.einsum("na,nl,nm->alm", wI, x, x, optimize=True)
        S0K += wK.sum(axis=0)
        S1K += wK.T @ x
        E0 += dN.sum(axis=0)
        E1 += dN.T @ x

    XbarK = np.divide(S1K, S0K[:, None], out=np.zeros_like(S1K), where=S0K[:, None] > 0)
    score_jumps = (E1 - E0[:, None] * XbarK) * grid.BK
    return RiskAggregates(
        S0I=S0I, S1I=S1I, S2I=S2I, S0K=S0K, S1K=S1K, events=E0, score_jumps=score_jumps
    )


def _check_design(ds: ClusteredDataset, agg: RiskAggregates, grid: TimeGrid, A: np.ndarray) -> None:
    raw = np.einsum("all,al->l", agg.S2I, np.diagonal(grid.I2, axis1=1, axis2=2))
    flat = np.diag(A) <= 1e-12 * np.maximum(raw, np.finfo(float).tiny)
    if flat.any():
        names = ", ".join(ds.names[j] for j in np.flatnonzero(flat))
        raise SingularDesign(np.inf, f"no variation on the risk sets in: {names}")
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularDesign(cond)


def fit(
    ds: ClusteredDataset,
    k: int = 1,
    mode: WeightMode | str = WeightMode.IPCW,
    grid: TimeGrid | None = None,
    *,
    cm: CensoringModel | None = None,
    Q: int = 16,
    ghat_floor: float = 1e-10,
) -> FitResult:
    """
    Closed-form weighted least-squares estimate for cause k.

    β̂ = [Σ∫ ω̂ Y X̃X̃' dt]⁻¹ Σ∫ ω̂ X̃ dN^k with X̃ = X - X̂; in CC mode ω̂ is I(C > t).
    """
    mode = WeightMode(mode)
    if mode is WeightMode.CC:
        require_ctime(ds)
    n_events = ds.events_before(k)
    if n_events == 0:
        raise NoEventsForCause(f"no cause-{k} events in (0, {ds.tau:.6g}]")
    if n_events < MIN_EVENTS:
        log.warning("only %d cause-%d events before tau; estimates are unstable", n_events, k)

    grid = grid if grid is not None else build_grid(ds, Q)
    if mode is WeightMode.IPCW and cm is None:
        cm = fit_censoring_km(ds, floor=ghat_floor)

    W = WeightMatrix(ds, grid, k, mode, cm)
    agg = risk_aggregates(ds, grid, W)

    A_int = agg.centered_S2 * grid.I2
    A_sum = A_int.sum(axis=0)
    A_sum = 0.5 * (A_sum + A_sum.T)
    _check_design(ds, agg, grid, A_sum)

    b_sum = agg.score_jumps.sum(axis=0)
    beta = np.linalg.solve(A_sum, b_sum)

    jump = np.divide(agg.events, agg.S0K, out=np.zeros_like(agg.events), where=agg.S0K > 0)
    dcont = -np.einsum("al,al,l->a", agg.XbarI, grid.I1, beta)

    log.debug(
        "fit cause=%d mode=%s n=%d N=%d events=%d knots=%d Q=%d beta=%s",
        k,
        mode.value,
        ds.n,
        ds.N,
        n_events,
        grid.size,
        grid.Q,
        np.array2string(beta, precision=4),
    )
    return FitResult(
        ds=ds,
        grid=grid,
        cause=k,
        mode=mode,
        beta=beta,
        A_tau=A_sum / ds.n,
        A_path=np.cumsum(A_int, axis=0) / ds.n,
        jump=jump,
        dcont=dcont,
        aggregates=agg,
        weights=W,
        censoring=cm,
    )


def _score_at(agg: RiskAggregates, grid: TimeGrid, beta: np.ndarray, t: float) -> np.ndarray:
    a, _, I2_part, reached = grid.truncated(t)
    if t <= 0:
        return np.zeros(beta.size)
    full = (agg.centered_S2[:a] * grid.I2[:a]).sum(axis=0)
    part = agg.centered_S2[a] * I2_part
    jumps = agg.score_jumps[: a + int(reached)].sum(axis=0)
    return jumps - (full + part) @ beta


def score(
    ds: ClusteredDataset,
    k: int,
    beta: np.ndarray,
    t: float,
    mode: WeightMode | str = WeightMode.IPCW,
    grid: TimeGrid | None = None,
    *,
    cm: CensoringModel | None = None,
    Q: int = 16,
    ghat_floor: float = 1e-10,
) -> np.ndarray:
    """
    U(β, t) = Σ∫₀ᵗ X̃ ω̂ {dN^k - Y X'β du}; the dΛ̂₀ part vanishes after centring.
    """
    mode = WeightMode(mode)
    grid = grid if grid is not None else build_grid(ds, Q)
    if mode is WeightMode.IPCW and cm is None:
        cm = fit_censoring_km(ds, floor=ghat_floor)
    W = WeightMatrix(ds, grid, k, mode, cm)
    agg = risk_aggregates(ds, grid, W)
    return _score_at(agg, grid, np.asarray(beta, dtype=float), t)


def fitted_score(fit: FitResult, t: float, beta: np.ndarray | None = None) -> np.ndarray:
    """score() reusing the aggregates of an existing fit."""
    beta = fit.beta if beta is None else np.asarray(beta, dtype=float)
    return _score_at(fit.aggregates, fit.grid, beta, t)


def baseline_at(fit: FitResult, t: float) -> float:
    """Λ̂₀(t): weighted event jumps over weighted risk totals minus ∫₀ᵗ X̂'β̂ du."""
    if t <= 0:
        return 0.0
    a, I1_part, _, reached = fit.grid.truncated(t)
    steps = fit.jump[: a + int(reached)].sum()
    drift = fit.dcont[:a].sum() - float(fit.aggregates.XbarI[a] * I1_part @ fit.beta)
    return float(steps + drift)
