from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .estimate import event_indicator
from .types import FitResult, ResidualPath


@dataclass(frozen=True)
class ResidualBlock:
    """
    Weighted residual increments ω̂ dM̂ for a block of subjects on the grid.

    - ``dJ`` (rows, L): knot part ŵ (dN - dΛ̂₀ jump)
    - ``dC`` (rows, L): drift part -w̄ ∫ (X - X̂)'β̂ du over each interval
    - ``cK`` / ``cI`` (rows, L, p): base covariates centred at the knot / interval averages
    """

    rows: slice
    wI: np.ndarray
    wK: np.ndarray
    dN: np.ndarray
    dJ: np.ndarray
    dC: np.ndarray
    cK: np.ndarray
    cI: np.ndarray


def iter_residual_blocks(fit: FitResult, chunk: int | None = None) -> Iterator[ResidualBlock]:
    W, agg, grid, beta = fit.weights, fit.aggregates, fit.grid, fit.beta
    for rows in W.chunks(chunk):
        x = fit.ds.X[rows]
        wI, wK = W.interval(rows), W.knot(rows)
        dN = event_indicator(W, rows)
        cK = x[:, None, :] - agg.XbarK[None, :, :]
        cI = x[:, None, :] - agg.XbarI[None, :, :]
        dJ = wK * (dN - fit.jump[None, :])
        dC = -wI * np.einsum("nal,al,l->na", cI, grid.I1, beta, optimize=True)
        yield ResidualBlock(rows=rows, wI=wI, wK=wK, dN=dN, dJ=dJ, dC=dC, cK=cK, cI=cI)


def score_increments(fit: FitResult, block: ResidualBlock) -> np.ndarray:
    """ω̂ X̃ dM̂ per subject and interval, shape (rows, L, p)."""
    grid = fit.grid
    jump_part = block.dJ[:, :, None] * block.cK * grid.BK[None, :, :]
    M = grid.I2 * fit.beta[None, None, :]
    drift = np.einsum("alm,nam->nal", M, block.cI, optimize=True)
    return jump_part - block.wI[:, :, None] * block.cI * drift


@dataclass(frozen=True, eq=False)
class ClusterIncrements:
    """
    - ``eta_subject`` (N, p): ∫₀^τ ω̂ X̃ dM̂ per subject
    - ``resid`` (N,): ∫₀^τ ω̂ dM̂ per subject
    - ``cluster`` (N,): cluster code of each subject
    """

    eta_subject: np.ndarray
    resid: np.ndarray
    cluster: np.ndarray
    n: int

    @property
    def eta(self) -> np.ndarray:
        """Σⱼ ∫₀^τ ω̂ X̃ dM̂ per cluster, shape (n, p)."""
        return cluster_sum(self.eta_subject, self.cluster, self.n)


def cluster_sum(values: np.ndarray, cluster: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n,) + values.shape[1:])
    np.add.at(out, cluster, values)
    return out


def cluster_increments(fit: FitResult) -> ClusterIncrements:
    eta = np.zeros((fit.ds.N, fit.p))
    resid = np.zeros(fit.ds.N)
    for block in iter_residual_blocks(fit):
        eta[block.rows] = score_increments(fit, block).sum(axis=1)
        resid[block.rows] = (block.dJ + block.dC).sum(axis=1)
    return ClusterIncrements(eta_subject=eta, resid=resid, cluster=fit.ds.cluster, n=fit.ds.n)


def score_paths(fit: FitResult) -> np.ndarray:
    """Φ̂ᵢ(t) = Σⱼ ∫₀ᵗ ω̂ X̃ dM̂ at every knot, shape (n, L, p)."""
    out = np.zeros((fit.ds.n, fit.grid.size, fit.p))
    for block in iter_residual_blocks(fit):
        np.add.at(out, fit.ds.cluster[block.rows], score_increments(fit, block))
    return np.cumsum(out, axis=1)


def residual_path(fit: FitResult, subject: int) -> ResidualPath:
    """
    Unweighted M̂(t) = N(t) - ∫₀ᵗ Y {dΛ̂₀ + X'β̂ du} at the knots. Y is the observable risk
    indicator: under follow-up, or after a competing failure.
    """
    W, agg, grid = fit.weights, fit.aggregates, fit.grid
    rows = slice(subject, subject + 1)
    Y = W.at_risk(rows)[0]
    dN = event_indicator(W, rows)[0]
    x = fit.ds.X[subject]
    drift = ((x[None, :] - agg.XbarI) * grid.I1) @ fit.beta
    dM = dN - Y * fit.jump - Y * drift
    return ResidualPath(times=grid.knots.copy(), values=np.cumsum(dM), dN=dN)
