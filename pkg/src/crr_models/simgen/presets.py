from __future__ import annotations

from dataclasses import dataclass, replace
from enum import StrEnum
from itertools import product

from .config import CovariateDesign, SimConfig, SimModel


class Study(StrEnum):
    TABLE1 = "table1"  # ~20% censoring
    TABLE2 = "table2"  # ~40% censoring
    TABLE3 = "table3"  # type I error (M1) and power (M2) of the overall additivity test


CENSORING_RATE = {Study.TABLE1: 0.35, Study.TABLE2: 0.95}
TABLE3_RATES = (0.35, 0.95, 1.65)


@dataclass(frozen=True)
class StudyCell:
    study: Study
    label: str
    config: SimConfig

    def with_seed(self, seed: int) -> "StudyCell":
        return replace(self, config=replace(self.config, seed=seed))


def _estimation_cells(study: Study) -> list[StudyCell]:
    cells = []
    for n, m, theta in product((100, 250), (10, 20), (0.7, 1.0)):
        config = SimConfig(
            n_clusters=n,
            cluster_size=m,
            rho=0.5,
            theta=theta,
            beta1=(1.0,),
            beta2=(0.2,),
            gamma=CENSORING_RATE[study],
            model=SimModel.M1,
            covariates=CovariateDesign.UNIFORM,
        )
        cells.append(StudyCell(study, f"n={n} m={m} theta={theta}", config))
    return cells


def _testing_cells() -> list[StudyCell]:
    beta1 = {SimModel.M1: (0.6, 1.0), SimModel.M2: (0.5, 1.0)}
    cells = []
    for model, n, theta, gamma in product(SimModel, (100, 150), (0.7, 1.0), TABLE3_RATES):
        config = SimConfig(
            n_clusters=n,
            cluster_size=10,
            rho=0.66,
            theta=theta,
            beta1=beta1[model],
            beta2=(0.5, 1.0),
            gamma=gamma,
            model=model,
            covariates=CovariateDesign.NORMAL_BERNOULLI,
        )
        label = f"{model.value} n={n} theta={theta} gamma={gamma}"
        cells.append(StudyCell(Study.TABLE3, label, config))
    return cells


def study_cells(study: Study | str) -> list[StudyCell]:
    study = Study(study)
    if study is Study.TABLE3:
        return _testing_cells()
    return _estimation_cells(study)


def find_cell(study: Study | str, label: str | None = None) -> list[StudyCell]:
    """All cells of ``study``, or the one whose label matches ``label``."""
    cells = study_cells(study)
    if label is None:
        return cells
    hits = [c for c in cells if c.label == label]
    if not hits:
        known = ", ".join(c.label for c in cells)
        raise KeyError(f"no cell {label!r} in {Study(study).value}; known: {known}")
    return hits
