from __future__ import annotations

import numpy as np

from crr_models.fitter import FitResult
from crr_models.fitter.estimate import event_indicator

from .types import FChoice


def _truncated_moments(fit: FitResult, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grid moments restricted to [0, t] and the mask of knots <= t."""
    grid = fit.grid
    L, p = grid.size, fit.p
    I1t, I2t, kmask = np.zeros((L, p)), np.zeros((L, p, p)), np.zeros(L, dtype=bool)
    if t <= 0:
        return I1t, I2t, kmask
    a, I1p, I2p, reached = grid.truncated(t)
    I1t[:a], I2t[:a] = grid.I1[:a], grid.I2[:a]
    I1t[a], I2t[a] = I1p, I2p
    kmask[: a + int(reached)] = True
    return I1t, I2t, kmask


def _indicator(X: np.ndarray, x: np.ndarray | float) -> np.ndarray:
    x = np.broadcast_to(np.asarray(x, dtype=float), (X.shape[1],))
    return np.all(X <= x[None, :], axis=1).astype(float)


def weighted_residual_process(
    fit: FitResult, t: float, x: np.ndarray | float, f_choice: FChoice | str
) -> np.ndarray:
    """W(t, x) = Σᵢⱼ ∫₀ᵗ ω̂ f(X) I(X <= x) dM̂ evaluated directly."""
    f_choice = FChoice(f_choice)
    W, agg, grid, beta = fit.weights, fit.aggregates, fit.grid, fit.beta
    I1t, I2t, kmask = _truncated_moments(fit, t)
    out = np.zeros(fit.p if f_choice is FChoice.COVARIATE else 1)
    for rows in W.chunks():
        X = fit.ds.X[rows]
        m = _indicator(X, x)
        wI, wK = W.interval(rows), W.knot(rows)
        dJ = wK * (event_indicator(W, rows) - fit.jump[None, :]) * kmask[None, :]
        cI = X[:, None, :] - agg.XbarI[None, :, :]
        if f_choice is FChoice.ONE:
            drift = np.einsum("nal,al,l->na", cI, I1t, beta, optimize=True)
            out[0] += np.sum(m[:, None] * (dJ - wI * drift))
        else:
            knot = np.einsum("na,nl,al->l", dJ, m[:, None] * X, grid.BK, optimize=True)
            drift = np.einsum(
                "na,nl,alr,r,nar->l", wI, m[:, None] * X, I2t, beta, cI, optimize=True
            )
            out += knot - drift
    return out


def cluster_influence(
    fit: FitResult, t: float, x: np.ndarray | float, f_choice: FChoice | str
) -> np.ndarray:
    """
    Q̂ᵢ(t, x) for every cluster, shape (n, dim f):

        Σⱼ ∫₀ᵗ ω̂ [f(X) I(X <= x) - ĝ(u, x)] dM̂ - n⁻¹ĥ(t, x) Â⁻¹(τ) Σⱼ ∫₀^τ ω̂ (X - X̂) dM̂

    ĝ is the ω̂Y-weighted risk-set average of f(X) I(X <= x) and ĥ the matching drift
    derivative. Thresholds apply to the recorded (base) covariate values; x may hold ±inf.
    Summed over clusters this is W(t, x).
    """
    f_choice = FChoice(f_choice)
    W, agg, grid, beta = fit.weights, fit.aggregates, fit.grid, fit.beta
    ds = fit.ds
    L, p, n = grid.size, fit.p, ds.n
    I1t, I2t, kmask = _truncated_moments(fit, t)
    m_all = _indicator(ds.X, x)

    # risk-set sums of w f(X) I(X <= x), base values only
    SmK, SmI = np.zeros((L, p)), np.zeros((L, p))
    SmK0, SmI0 = np.zeros(L), np.zeros(L)
    S2m = np.zeros((L, p, p))
    for rows in W.chunks():
        X, m = ds.X[rows], m_all[rows]
        wI, wK = W.interval(rows), W.knot(rows)
        SmK0 += wK.T @ m
        SmI0 += wI.T @ m
        SmK += wK.T @ (m[:, None] * X)
        SmI += wI.T @ (m[:, None] * X)
        S2m += np.einsum("na,nl,nr->alr", wI, m[:, None] * X, X, optimize=True)

    def ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
        d = den.reshape((-1,) + (1,) * (num.ndim - 1))
        return np.divide(num, d, out=np.zeros_like(num), where=d > 0)

    if f_choice is FChoice.COVARIATE:
        gK, gI = ratio(SmK, agg.S0K), ratio(SmI, agg.S0I)
        H = ((S2m - gI[:, :, None] * agg.S1I[:, None, :]) * I2t).sum(axis=0)
    else:
        gK, gI = ratio(SmK0, agg.S0K), ratio(SmI0, agg.S0I)
        H = ((SmI - gI[:, None] * agg.S1I) * I1t).sum(axis=0)[None, :]

    dim = p if f_choice is FChoice.COVARIATE else 1
    first = np.zeros((n, dim))
    for rows in W.chunks():
        X, m = ds.X[rows], m_all[rows]
        wI, wK = W.interval(rows), W.knot(rows)
        dJ = wK * (event_indicator(W, rows) - fit.jump[None, :]) * kmask[None, :]
        cI = X[:, None, :] - agg.XbarI[None, :, :]
        if f_choice is FChoice.COVARIATE:
            fk = (m[:, None, None] * X[:, None, :] - gK[None]) * grid.BK[None]
            fi = m[:, None, None] * X[:, None, :] - gI[None]
            knot = np.einsum("na,nal->nl", dJ, fk, optimize=True)
            drift = np.einsum("na,nal,alr,r,nar->nl", wI, fi, I2t, beta, cI, optimize=True)
        else:
            fk = m[:, None] - gK[None, :]
            fi = m[:, None] - gI[None, :]
            knot = np.sum(dJ * fk, axis=1)[:, None]
            drift = np.einsum("na,na,nal,al,l->n", wI, fi, cI, I1t, beta, optimize=True)[:, None]
        np.add.at(first, ds.cluster[rows], knot - drift)

    eta = fit.increments.eta
    A_sum = fit.A_tau * n
    correction = eta @ np.linalg.solve(A_sum, H.T)
    return first - correction
