from __future__ import annotations

import numpy as np

from crr_core.exceptions import InvalidProbability, RejectionBudgetExceeded, RootNotBracketed

from .config import CovariateDesign, SimConfig, SimModel

REJECTION_BUDGET = 1_000_000
T_MAX = 50.0
T_TOL = 1e-10
PROB_TOL = 1e-12


def frailty_acceptance(theta: float, rho: float) -> float:
    """P(0 < ρ + ν < 1) for ν = E - 1/θ, E ~ Exponential(rate θ)."""
    lo = max(1.0 / theta - rho, 0.0)
    hi = 1.0 / theta + 1.0 - rho
    return float(np.exp(-theta * lo) - np.exp(-theta * hi))


def draw_frailty(theta: float, rho: float, rng: np.random.Generator, batch: int = 64) -> float:
    """Demeaned exponential frailty, redrawn until 0 < ρ + ν < 1."""
    drawn = 0
    while drawn < REJECTION_BUDGET:
        nu = rng.exponential(1.0 / theta, size=batch) - 1.0 / theta
        ok = np.flatnonzero((rho + nu > 0) & (rho + nu < 1))
        if ok.size:
            return float(nu[ok[0]])
        drawn += batch
    raise RejectionBudgetExceeded(
        f"no admissible frailty in {REJECTION_BUDGET} draws (theta={theta}, rho={rho})"
    )


def draw_covariates(design: CovariateDesign, size: int, rng: np.random.Generator) -> np.ndarray:
    if design is CovariateDesign.UNIFORM:
        return rng.uniform(0.0, 1.0, size=(size, 1))
    return np.column_stack([rng.standard_normal(size), rng.binomial(1, 0.5, size=size)])


def cause1_probability(
    X: np.ndarray, nu: float, rho: float, beta1: np.ndarray, model: SimModel
) -> np.ndarray:
    """P(ε = 1 | X, ν) = F₁(∞; X, ν); unchecked."""
    eta = np.atleast_2d(X) @ np.asarray(beta1, dtype=float)
    base = 1.0 - (rho + nu)
    if SimModel(model) is SimModel.M1:
        return 1.0 - base * np.exp(-eta)
    return 1.0 - base ** np.exp(-eta)


def assign_cause(
    X: np.ndarray,
    nu: float,
    rho: float,
    beta1: np.ndarray,
    model: SimModel,
    rng: np.random.Generator,
) -> np.ndarray:
    """ε = 1 if U <= P else 2, one U per row of X."""
    P = cause1_probability(X, nu, rho, beta1, model)
    if np.any((P < -PROB_TOL) | (P > 1 + PROB_TOL)) or not np.all(np.isfinite(P)):
        raise InvalidProbability(
            f"cause-1 probability outside [0, 1]: {P.min():.4g}..{P.max():.4g}"
        )
    U = rng.uniform(size=P.shape)
    return np.where(U <= P, 1, 2)


def conditional_cdf(
    t: np.ndarray, eta: np.ndarray, p: float, eps: np.ndarray, model: SimModel
) -> np.ndarray:
    """
    F̃_ε(t) = F_ε(t)/F_ε(∞) with s = 1 - e^{-t}:

    - M1, ε=1: {1 - (1 - p s) e^{-η s}} / {1 - (1 - p) e^{-η}}
    - M2, ε=1: {1 - (1 - p s)^{exp(-η s)}} / {1 - (1 - p)^{exp(-η)}}
    - M1, ε=2: 1 - exp(-t - η s)
    - M2, ε=2: 1 - exp(-t η s); 1 - e^{-t} when η <= 0
    """
    t, eta, eps = np.broadcast_arrays(np.asarray(t, float), np.asarray(eta, float), np.asarray(eps))
    s = -np.expm1(-t)
    out = np.empty(t.shape)
    one = eps == 1
    if SimModel(model) is SimModel.M1:
        num = 1.0 - (1.0 - p * s[one]) * np.exp(-eta[one] * s[one])
        den = 1.0 - (1.0 - p) * np.exp(-eta[one])
        out[one] = num / den
        out[~one] = -np.expm1(-t[~one] - eta[~one] * s[~one])
    else:
        num = 1.0 - (1.0 - p * s[one]) ** np.exp(-eta[one] * s[one])
        den = 1.0 - (1.0 - p) ** np.exp(-eta[one])
        out[one] = num / den
        e2, t2, s2 = eta[~one], t[~one], s[~one]
        out[~one] = np.where(e2 > 0, -np.expm1(-t2 * np.maximum(e2, 0.0) * s2), -np.expm1(-t2))
    return out


def invert_cdf(
    cdf, U: np.ndarray, t_max: float = T_MAX, tol: float = T_TOL, n_grid: int = 400
) -> np.ndarray:
    """
    Generalised inverse inf{t : F(t) >= U} of a vectorised cdf(t) -> (N,) on [0, t_max].

    A geometric grid locates the first bracket where the running maximum of F reaches U;
    bisection then narrows it to ``tol``.
    """
    U = np.atleast_1d(np.asarray(U, dtype=float))
    grid = np.r_[0.0, np.geomspace(1e-8, t_max, n_grid)]
    vals = np.column_stack([cdf(np.full(U.shape, g)) for g in grid])
    running = np.maximum.accumulate(vals, axis=1)
    reached = running >= U[:, None]
    if not np.all(reached[:, -1]):
        raise RootNotBracketed(f"F(t) stays below U on [0, {t_max}]")
    j = np.argmax(reached, axis=1)
    lo, hi = grid[np.maximum(j - 1, 0)], grid[j]
    while np.any(hi - lo > tol):
        mid = 0.5 * (lo + hi)
        up = cdf(mid) >= U
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return hi


def draw_failure_time(
    X: np.ndarray,
    nu: float,
    eps: np.ndarray,
    config: SimConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """T = F̃_ε⁻¹(U) per row of X, U ~ Uniform(0, 1)."""
    X = np.atleast_2d(X)
    eps = np.asarray(eps)
    beta = np.where(
        eps[:, None] == 1, np.asarray(config.beta1)[None, :], np.asarray(config.beta2)[None, :]
    )
    eta = np.sum(X * beta, axis=1)
    p = config.rho + nu
    U = rng.uniform(size=eps.shape)
    return invert_cdf(lambda t: conditional_cdf(t, eta, p, eps, config.model), U)
