from .types import (
    CENSORED,
    Basis,
    CauseCode,
    ClusteredDataset,
    CovariatePath,
    SubjectRecord,
    TimeGrid,
    evaluate_basis,
)
from .grid import CountingState, build_grid, counting_process
from .io import DatasetSchema, load_dataset, require_ctime, save_dataset, to_frame

__all__ = [
    "CENSORED",
    "Basis",
    "CauseCode",
    "ClusteredDataset",
    "CovariatePath",
    "SubjectRecord",
    "TimeGrid",
    "evaluate_basis",
    "CountingState",
    "build_grid",
    "counting_process",
    "DatasetSchema",
    "load_dataset",
    "require_ctime",
    "save_dataset",
    "to_frame",
]
