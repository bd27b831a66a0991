from __future__ import annotations

from dataclasses import dataclass, field

import joblib as jbl
import numpy as np
import pandas as pd
from tqdm import tqdm

from crr_core.exceptions import ConfigError, CrrError, ReplicationQualityError
from crr_core.logging import get_logger
from crr_models.censoring import WeightMode
from crr_models.fitter import fit
from crr_models.gof import ALL, additivity_test
from crr_models.simgen import SimModel, Study, StudyCell, find_cell, generate
from crr_models.variance import Clustering, sandwich

from .models import Arm

log = get_logger("crr.replicate")

MAX_FAILURE_SHARE = 0.05
Z_95 = 1.96

ARMS: dict[Arm, tuple[WeightMode, Clustering]] = {
    Arm.CRC: (WeightMode.IPCW, Clustering.BY_CLUSTER),
    Arm.CCC: (WeightMode.CC, Clustering.BY_CLUSTER),
    Arm.UCRC: (WeightMode.IPCW, Clustering.BY_INDIVIDUAL),
    Arm.UCCC: (WeightMode.CC, Clustering.BY_INDIVIDUAL),
}


@dataclass(frozen=True, eq=False)
class ReplicateOutcome:
    cell: str
    replicate: int
    censored: float = np.nan
    estimates: dict[Arm, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    p_value: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def estimation_replicate(
    cell: StudyCell, r: int, Q: int = 16, ghat_floor: float = 1e-10
) -> ReplicateOutcome:
    """One dataset, both weightings, both variance estimators."""
    censored = np.nan
    try:
        sim = generate(cell.config, replicate=r)
        censored = sim.censored_share
        fits = {m: fit(sim.dataset, 1, m, Q=Q, ghat_floor=ghat_floor) for m in WeightMode}
        estimates = {}
        for arm, (mode, clustering) in ARMS.items():
            parts = sandwich(sim.dataset, fits[mode], clustering=clustering)
            estimates[arm] = (fits[mode].beta.copy(), parts.se.copy())
    except CrrError as e:
        return ReplicateOutcome(cell.label, r, censored, error=f"{type(e).__name__}: {e}")
    return ReplicateOutcome(cell.label, r, censored, estimates=estimates)


def testing_replicate(
    cell: StudyCell,
    r: int,
    B: int = 1000,
    Q: int = 16,
    ghat_floor: float = 1e-10,
    add_one: bool = False,
) -> ReplicateOutcome:
    """One dataset, IPCW fit, overall additivity test p-value."""
    censored = np.nan
    try:
        sim = generate(cell.config, replicate=r)
        censored = sim.censored_share
        res = fit(sim.dataset, 1, WeightMode.IPCW, Q=Q, ghat_floor=ghat_floor)
        draws_seed = np.random.SeedSequence(cell.config.seed, spawn_key=(r,))
        entry = additivity_test(res, ALL, B, draws_seed, add_one=add_one, keep_draws=0)
    except CrrError as e:
        return ReplicateOutcome(cell.label, r, censored, error=f"{type(e).__name__}: {e}")
    return ReplicateOutcome(cell.label, r, censored, p_value=entry.p_value)


def run_cell(
    cell: StudyCell,
    reps: int,
    *,
    parallel: int = 1,
    draws: int = 1000,
    Q: int = 16,
    ghat_floor: float = 1e-10,
    add_one: bool = False,
    progress: bool = True,
) -> list[ReplicateOutcome]:
    """
    Run ``reps`` replicates of one cell. Every replicate draws from its own streams, so the
    outcomes do not depend on ``parallel`` or on completion order.
    """
    if cell.study is Study.TABLE3:
        tasks = (
            jbl.delayed(testing_replicate)(cell, r, draws, Q, ghat_floor, add_one)
            for r in range(reps)
        )
    else:
        tasks = (jbl.delayed(estimation_replicate)(cell, r, Q, ghat_floor) for r in range(reps))

    stream = jbl.Parallel(n_jobs=parallel, return_as="generator_unordered")(tasks)
    outcomes = list(tqdm(stream, total=reps, desc=cell.label, disable=not progress, leave=False))
    outcomes.sort(key=lambda o: o.replicate)
    for o in outcomes:
        if not o.ok:
            log.warning("%s replicate %d failed: %s", cell.label, o.replicate, o.error)
    return outcomes


def estimation_summary(cell: StudyCell, outcomes: list[ReplicateOutcome]) -> pd.DataFrame:
    """
    Per arm and covariate: E(β̂), Monte Carlo SE s(β̂), average robust SE E(ŝ) and the
    coverage of β̂ ± 1.96 ŝ. With fewer than two successful replicates s(β̂) is undefined.
    """
    ok = [o for o in outcomes if o.ok]
    truth = np.asarray(cell.config.beta1)
    names = cell.config.covariates.names
    rows = []
    for arm in ARMS:
        if ok:
            est = np.vstack([o.estimates[arm][0] for o in ok])
            se = np.vstack([o.estimates[arm][1] for o in ok])
        else:
            est = se = np.full((0, truth.size), np.nan)
        for l, name in enumerate(names):
            defined = est.shape[0] >= 2
            rows.append(
                {
                    "cell": cell.label,
                    "arm": arm.value,
                    "covariate": name,
                    "true": truth[l],
                    "mean_estimate": est[:, l].mean() if ok else np.nan,
                    "mcse": est[:, l].std(ddof=1) if defined else np.nan,
                    "aese": se[:, l].mean() if ok else np.nan,
                    "coverage": (
                        np.mean(np.abs(est[:, l] - truth[l]) <= Z_95 * se[:, l]) if ok else np.nan
                    ),
                    "mcse_defined": defined,
                    "ok": len(ok),
                    "failed": len(outcomes) - len(ok),
                }
            )
    return pd.DataFrame(rows)


def _mean_censored(outcomes: list[ReplicateOutcome]) -> float:
    shares = np.array([o.censored for o in outcomes], dtype=float)
    shares = shares[np.isfinite(shares)]
    return float(shares.mean()) if shares.size else np.nan


def testing_summary(
    cell: StudyCell, outcomes: list[ReplicateOutcome], alpha: float = 0.05
) -> pd.DataFrame:
    """Rejection rate of the overall test at level ``alpha`` and its binomial Monte Carlo SE."""
    pvals = np.array([o.p_value for o in outcomes if o.ok], dtype=float)
    R = pvals.size
    rate = float(np.mean(pvals < alpha)) if R else np.nan
    cfg = cell.config
    return pd.DataFrame(
        [
            {
                "cell": cell.label,
                "quantity": "type_i_error" if cfg.model is SimModel.M1 else "power",
                "model": cfg.model.value,
                "n": cfg.n_clusters,
                "theta": cfg.theta,
                "gamma": cfg.gamma,
                "censored": _mean_censored(outcomes),
                "rejection_rate": rate,
                "mcse": np.sqrt(rate * (1 - rate) / R) if R >= 2 else np.nan,
                "mcse_defined": R >= 2,
                "ok": R,
                "failed": len(outcomes) - R,
            }
        ]
    )


@dataclass(frozen=True, eq=False)
class ReplicationSummary:
    study: Study
    reps: int
    frame: pd.DataFrame
    total: int
    failed: int

    @property
    def failure_share(self) -> float:
        return self.failed / self.total if self.total else 0.0

    @property
    def mcse_defined(self) -> bool:
        return bool(self.frame["mcse_defined"].all()) if len(self.frame) else False


def replicate_study(
    study: Study | str,
    reps: int,
    seed: int = 0,
    *,
    cell: str | None = None,
    parallel: int = 1,
    draws: int = 1000,
    alpha: float = 0.05,
    Q: int = 16,
    ghat_floor: float = 1e-10,
    add_one: bool = False,
    progress: bool = True,
) -> ReplicationSummary:
    study = Study(study)
    if reps < 1:
        raise ConfigError(f"reps must be >= 1, got {reps}")
    try:
        cells = [c.with_seed(seed) for c in find_cell(study, cell)]
    except KeyError as e:
        raise ConfigError(e.args[0]) from e

    frames, total, failed = [], 0, 0
    for c in cells:
        outcomes = run_cell(
            c,
            reps,
            parallel=parallel,
            draws=draws,
            Q=Q,
            ghat_floor=ghat_floor,
            add_one=add_one,
            progress=progress,
        )
        if study is Study.TABLE3:
            frames.append(testing_summary(c, outcomes, alpha))
        else:
            frames.append(estimation_summary(c, outcomes))
        bad = sum(not o.ok for o in outcomes)
        total += len(outcomes)
        failed += bad
        log.info("%s: %d/%d replicates ok", c.label, len(outcomes) - bad, len(outcomes))

    summary = ReplicationSummary(study, reps, pd.concat(frames, ignore_index=True), total, failed)
    if not summary.mcse_defined:
        log.warning("Monte Carlo SE undefined with fewer than two successful replicates")
    return summary


def check_quality(summary: ReplicationSummary, limit: float = MAX_FAILURE_SHARE) -> None:
    if summary.failure_share > limit:
        raise ReplicationQualityError(
            f"{summary.failed}/{summary.total} replicates failed (limit {limit:.0%})"
        )
