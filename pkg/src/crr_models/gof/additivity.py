from __future__ import annotations

import numpy as np

from crr_core.logging import get_logger
from crr_models.fitter import FitResult, score_paths

from .perturb import check_draws, iter_perturbations, monte_carlo_pvalue
from .types import ALL, GofEntry, ProcessKind, TestProcess

log = get_logger("crr.gof")

COND_WARN = 1e10


def score_influence(fit: FitResult) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-cluster Q̂ᵢ(t) = Φ̂ᵢ(t) - Â(t)Â⁻¹(τ)Φ̂ᵢ(τ) at every knot, the observed score path
    U(β̂, t) = Σᵢ Φ̂ᵢ(t), and Φ̂ᵢ(τ).
    """
    Phi = score_paths(fit)
    eta = Phi[:, -1, :]
    proj = np.linalg.solve(fit.A_tau, fit.A_path.transpose(0, 2, 1)).transpose(0, 2, 1)
    Q = Phi - np.einsum("alm,nm->nal", proj, eta)
    return Q, Phi.sum(axis=0), eta


def _normaliser(eta: np.ndarray) -> np.ndarray:
    n = eta.shape[0]
    Sigma = eta.T @ eta / n
    cond = float(np.linalg.cond(Sigma))
    if not np.isfinite(cond) or cond > COND_WARN:
        log.warning("additivity normaliser is ill-conditioned (cond=%.3g)", cond)
        return np.diag(np.linalg.pinv(Sigma))
    return np.diag(np.linalg.inv(Sigma))


def additivity_entries(
    fit: FitResult,
    B: int = 1000,
    seed: int | np.random.SeedSequence = 0,
    *,
    add_one: bool = False,
    keep_draws: int | None = None,
) -> list[GofEntry]:
    """
    Per-covariate suprema sₗ = sup_t {Σ̂⁻¹}ₗₗ^½ |n^-½ Uₗ(β̂, t)| and the overall S_all (sum over l),
    with one shared set of multiplier draws. Entries: one per covariate, then ``all``.
    """
    check_draws(B)
    n, p = fit.ds.n, fit.p
    Q, U, eta = score_influence(fit)
    wts = np.sqrt(np.clip(_normaliser(eta), 0.0, None))
    scale = 1.0 / np.sqrt(n)

    obs = np.abs(U) * scale * wts[None, :]
    s_l = obs.max(axis=0)
    s_all = float(obs.sum(axis=1).max())

    keep = B if keep_draws is None else min(keep_draws, B)
    sup_l, sup_all, kept = [], [], []
    for block in iter_perturbations(Q, B, seed):
        z = np.abs(block) * scale * wts[None, None, :]
        sup_l.append(z.max(axis=1))
        sup_all.append(z.sum(axis=2).max(axis=1))
        if sum(k.shape[0] for k in kept) < keep:
            kept.append(block * scale)
    sup_l = np.concatenate(sup_l, axis=0)
    sup_all = np.concatenate(sup_all)
    draws = np.concatenate(kept, axis=0)[:keep] if kept else np.zeros((0,) + Q.shape[1:])

    axis = np.r_[0.0, fit.grid.knots]
    entries = []
    for l, name in enumerate(fit.ds.names):
        tp = TestProcess(
            kind=ProcessKind.SCORE_ADDITIVITY,
            covariate=name,
            axis=axis,
            observed=np.r_[0.0, U[:, l] * scale],
            perturbed=np.hstack([np.zeros((draws.shape[0], 1)), draws[:, :, l]]),
            sigma_ll=float(wts[l] ** 2),
        )
        entries.append(
            GofEntry(
                test=ProcessKind.SCORE_ADDITIVITY,
                covariate=name,
                statistic=float(s_l[l]),
                p_value=monte_carlo_pvalue(float(s_l[l]), sup_l[:, l], add_one),
                process=tp,
            )
        )
    entries.append(
        GofEntry(
            test=ProcessKind.SCORE_ADDITIVITY,
            covariate=ALL,
            statistic=s_all,
            p_value=monte_carlo_pvalue(s_all, sup_all, add_one),
        )
    )
    log.debug(
        "additivity: S_all=%.4f p=%.4f (B=%d, p=%d)", s_all, entries[-1].p_value, B, p
    )
    return entries


def additivity_test(
    fit: FitResult,
    l: int | str = ALL,
    B: int = 1000,
    seed: int | np.random.SeedSequence = 0,
    *,
    add_one: bool = False,
    keep_draws: int | None = None,
) -> GofEntry:
    """Supremum test of the additive structure for covariate ``l`` (index or name) or ``all``."""
    entries = additivity_entries(fit, B, seed, add_one=add_one, keep_draws=keep_draws)
    if l == ALL:
        return entries[-1]
    idx = fit.ds.names.index(l) if isinstance(l, str) else int(l)
    return entries[idx]
