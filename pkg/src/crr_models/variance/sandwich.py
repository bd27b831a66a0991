from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import pandas as pd
from scipy import stats

from crr_core.logging import get_logger
from crr_models.censoring import CensoringModel, WeightMode
from crr_models.dataset import ClusteredDataset
from crr_models.fitter import FitResult, cluster_sum

log = get_logger("crr.variance")


class Clustering(StrEnum):
    BY_CLUSTER = "by_cluster"
    BY_INDIVIDUAL = "by_individual"


@dataclass(frozen=True, eq=False)
class SandwichParts:
    """
    Â⁻¹ Ω̂ Â⁻¹ and its ingredients. ``se`` = sqrt(diag Σ̂ / n_eff): Σ̂ is the variance of
    √n (β̂ - β).
    """

    clustering: Clustering
    n_eff: int
    eta: np.ndarray
    psi: np.ndarray
    q: np.ndarray
    A: np.ndarray
    Omega: np.ndarray
    Sigma: np.ndarray

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.Sigma), 0.0, None) / self.n_eff)

    @property
    def cov(self) -> np.ndarray:
        """Covariance of β̂ itself."""
        return self.Sigma / self.n_eff


def _suffix(arr: np.ndarray, start: int = 0) -> np.ndarray:
    """out[c] = Σ_{a >= c + start} arr[a], zero-padded past the end."""
    rev = np.cumsum(arr[::-1], axis=0)[::-1]
    pad = np.zeros((start,) + arr.shape[1:])
    return np.concatenate([rev[start:], pad], axis=0)


def censoring_q(fit: FitResult, cm: CensoringModel) -> np.ndarray:
    """
    q̂(t_c) at every knot, shape (L, p). Only competing-risk subjects with Z < t_c contribute,
    through their weighted residuals on [t_c, τ].
    """
    grid, agg, beta, W = fit.grid, fit.aggregates, fit.beta, fit.weights
    L = grid.size
    g_knot = cm.G(grid.knots)
    g_start = cm.G(grid.starts)

    J1 = (g_knot * fit.jump)[:, None] * grid.BK
    J2 = J1 * agg.XbarK
    M = grid.I2 * beta[None, None, :]
    A1 = g_start[:, None, None] * M
    A2 = g_start[:, None] * np.einsum("alm,am->al", M, agg.XbarI)
    A3 = agg.XbarI[:, :, None] * A1
    A4 = agg.XbarI * A2

    SJ1, SJ2 = _suffix(J1), _suffix(J2)
    SA1, SA2, SA3, SA4 = (_suffix(T, start=1) for T in (A1, A2, A3, A4))

    comp = np.flatnonzero(W.competing & (W.zi < L))
    zc, inv = W.zi[comp], W.inv_gz[comp]
    x = fit.ds.X[comp]
    p = fit.p
    b0, b1, b2 = np.zeros(L), np.zeros((L, p)), np.zeros((L, p, p))
    np.add.at(b0, zc, inv)
    np.add.at(b1, zc, inv[:, None] * x)
    np.add.at(b2, zc, inv[:, None, None] * x[:, :, None] * x[:, None, :])
    # strictly before knot c
    m0 = np.r_[0.0, np.cumsum(b0)[:-1]]
    m1 = np.concatenate([np.zeros((1, p)), np.cumsum(b1, axis=0)[:-1]])
    m2 = np.concatenate([np.zeros((1, p, p)), np.cumsum(b2, axis=0)[:-1]])

    jump_part = m1 * SJ1 - m0[:, None] * SJ2
    drift_part = (
        np.einsum("clm,clm->cl", m2, SA1)
        - m1 * SA2
        - np.einsum("cm,clm->cl", m1, SA3)
        + m0[:, None] * SA4
    )
    return (jump_part + drift_part) / fit.ds.n


def censoring_psi(fit: FitResult, cm: CensoringModel, q: np.ndarray) -> np.ndarray:
    """ψ̂ per subject: Σ_c q̂/π̂ (dN^c - Y^c dΛ̂^c) over censoring knots, shape (N, p)."""
    grid, W = fit.grid, fit.weights
    L = grid.size
    dlam = cm.hazard_jump(grid.knots)
    pi = cm.pi(grid.knots)
    ratio = np.divide(q, pi[:, None], out=np.zeros_like(q), where=pi[:, None] > 0)

    comp_part = np.cumsum(ratio * dlam[:, None], axis=0)
    zi = np.minimum(W.zi, L - 1)
    psi = -comp_part[zi]

    censored = (fit.ds.status == 0) & (W.zi < L)
    cens_idx = np.flatnonzero(censored)
    psi[cens_idx] += ratio[W.zi[cens_idx]]
    return psi


def sandwich(
    ds: ClusteredDataset,
    fit: FitResult,
    cm: CensoringModel | None = None,
    clustering: Clustering | str = Clustering.BY_CLUSTER,
) -> SandwichParts:
    """
    Cluster-robust Σ̂ = Â⁻¹ Ω̂ Â⁻¹, Ω̂ = n⁻¹ Σᵢ (η̂ᵢ + ψ̂ᵢ)⊗². In CC mode ψ̂ ≡ 0.
    ``by_individual`` treats every subject as its own cluster.
    """
    clustering = Clustering(clustering)
    cm = cm if cm is not None else fit.censoring
    inc = fit.increments

    if fit.mode is WeightMode.IPCW and cm is not None:
        q = censoring_q(fit, cm)
        psi_subject = censoring_psi(fit, cm, q)
    else:
        q = np.zeros((fit.grid.size, fit.p))
        psi_subject = np.zeros_like(inc.eta_subject)

    if clustering is Clustering.BY_CLUSTER:
        n_eff = ds.n
        eta = inc.eta
        psi = cluster_sum(psi_subject, ds.cluster, n_eff)
    else:
        n_eff = ds.N
        eta, psi = inc.eta_subject, psi_subject

    A = fit.A_tau * (ds.n / n_eff)
    total = eta + psi
    Omega = total.T @ total / n_eff
    A_inv = np.linalg.inv(A)
    Sigma = A_inv @ Omega @ A_inv
    Sigma = 0.5 * (Sigma + Sigma.T)

    se = np.sqrt(np.diag(Sigma) / n_eff)
    log.debug("sandwich %s: n_eff=%d se=%s", clustering.value, n_eff, se)
    return SandwichParts(
        clustering=clustering,
        n_eff=n_eff,
        eta=eta,
        psi=psi,
        q=q,
        A=A,
        Omega=Omega,
        Sigma=Sigma,
    )


def coefficient_table(fit: FitResult, parts: SandwichParts, level: float = 0.95) -> pd.DataFrame:
    """Estimate, robust SE, z, two-sided normal p-value and CI per covariate."""
    se = parts.se
    z = np.divide(fit.beta, se, out=np.full_like(se, np.nan), where=se > 0)
    crit = stats.norm.ppf(0.5 + level / 2)
    return pd.DataFrame(
        {
            "covariate": list(fit.ds.names),
            "estimate": fit.beta,
            "robust_se": se,
            "z": z,
            "p_value": 2 * stats.norm.sf(np.abs(z)),
            "ci_lower": fit.beta - crit * se,
            "ci_upper": fit.beta + crit * se,
        }
    )
