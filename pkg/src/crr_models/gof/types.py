from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import pandas as pd


class ProcessKind(StrEnum):
    SCORE_ADDITIVITY = "score_additivity"
    FUNCTIONAL_FORM = "functional_form"


class FChoice(StrEnum):
    COVARIATE = "covariate"
    ONE = "one"


ALL = "all"


@dataclass(frozen=True, eq=False)
class TestProcess:
    """
    Observed process and its perturbed draws on a common axis.

    The axis starts with a point where every process is 0 (time 0, or a threshold below the
    smallest covariate value). ``sigma_ll`` is the {Σ̂⁻¹}ₗₗ normaliser of the score kind.
    """

    __test__ = False

    kind: ProcessKind
    covariate: str
    axis: np.ndarray
    observed: np.ndarray
    perturbed: np.ndarray
    sigma_ll: float | None = None


@dataclass(frozen=True)
class GofEntry:
    test: ProcessKind
    covariate: str
    statistic: float
    p_value: float
    process: TestProcess | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class GofReport:
    entries: tuple[GofEntry, ...]
    B: int
    seed: int
    add_one: bool = False

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "test": [e.test.value for e in self.entries],
                "covariate": [e.covariate for e in self.entries],
                "statistic": [e.statistic for e in self.entries],
                "p_value": [e.p_value for e in self.entries],
            }
        )

    def get(self, test: ProcessKind, covariate: str) -> GofEntry:
        for e in self.entries:
            if e.test is test and e.covariate == covariate:
                return e
        raise KeyError(f"{test.value}/{covariate}")
