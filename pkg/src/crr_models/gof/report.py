from __future__ import annotations

from typing import Sequence

from crr_models.fitter import FitResult

from .additivity import additivity_entries
from .functional_form import functional_form_test
from .types import ALL, GofEntry, GofReport


def run_gof(
    fit: FitResult,
    *,
    additivity: bool = True,
    functional_form: bool = True,
    covariates: Sequence[str] | str = ALL,
    B: int = 1000,
    seed: int = 0,
    add_one: bool = False,
    keep_draws: int | None = 50,
) -> GofReport:
    """
    Run the requested tests. Additivity rows share one draw set; the overall row is
    included only when every covariate is requested. Functional-form rows skip covariates
    with fewer than two distinct values only if they were not asked for by name.
    """
    names = list(fit.ds.names) if covariates == ALL else list(covariates)
    entries: list[GofEntry] = []

    if additivity:
        rows = additivity_entries(fit, B, seed, add_one=add_one, keep_draws=keep_draws)
        entries += [e for e in rows[:-1] if e.covariate in names]
        if covariates == ALL:
            entries.append(rows[-1])

    if functional_form:
        for name in names:
            if covariates == ALL and len(set(fit.ds.X[:, fit.ds.names.index(name)])) < 2:
                continue
            entries.append(
                functional_form_test(fit, name, B, seed, add_one=add_one, keep_draws=keep_draws)
            )

    return GofReport(entries=tuple(entries), B=B, seed=seed, add_one=add_one)
