from __future__ import annotations

from typing import Iterator

import numpy as np

from crr_core.exceptions import ConfigError


def iter_perturbations(
    Q: np.ndarray,
    B: int,
    seed: int | np.random.SeedSequence | None,
    block: int = 256,
) -> Iterator[np.ndarray]:
    """
    Blocks of Ŵ = Σᵢ ξᵢ Q̂ᵢ with ξᵢ ~ N(0, 1) drawn per cluster per draw.

    Draws come from one generator in row order, so the block size does not change them.
    """
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    rng = np.random.default_rng(seed)
    n = Q.shape[0]
    flat = Q.reshape(n, -1)
    done = 0
    while done < B:
        b = min(block, B - done)
        xi = rng.standard_normal((b, n))
        yield (xi @ flat).reshape((b,) + Q.shape[1:])
        done += b


def perturb(
    Q: np.ndarray,
    B: int,
    seed: int | np.random.SeedSequence | None = None,
    multipliers: np.ndarray | None = None,
) -> np.ndarray:
    """B draws of Σᵢ ξᵢ Q̂ᵢ. ``multipliers`` (B, n) overrides the normal draws."""
    if multipliers is not None:
        xi = np.asarray(multipliers, dtype=float).reshape(B, Q.shape[0])
        return np.tensordot(xi, Q, axes=(1, 0))
    return np.concatenate(list(iter_perturbations(Q, B, seed)), axis=0)


def monte_carlo_pvalue(observed: float, draws: np.ndarray, add_one: bool = False) -> float:
    """
    Share of perturbed suprema strictly above the observed one; (1 + count)/(B + 1) with
    ``add_one``. An observed supremum of 0 gives 1.
    """
    draws = np.asarray(draws, dtype=float)
    if observed <= 0:
        return 1.0
    count = int(np.count_nonzero(draws > observed))
    if add_one:
        return (1 + count) / (draws.size + 1)
    return count / draws.size


MIN_DRAWS = 100


def check_draws(B: int) -> None:
    if B < MIN_DRAWS:
        raise ConfigError(f"p-values need at least {MIN_DRAWS} perturbation draws, got {B}")
