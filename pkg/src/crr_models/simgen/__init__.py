from .config import CovariateDesign, SimConfig, SimModel
from .draws import (
    assign_cause,
    cause1_probability,
    conditional_cdf,
    draw_covariates,
    draw_failure_time,
    draw_frailty,
    frailty_acceptance,
    invert_cdf,
)
from .generate import SimDataset, cluster_rng, generate
from .presets import Study, StudyCell, find_cell, study_cells

__all__ = [
    "CovariateDesign",
    "SimConfig",
    "SimDataset",
    "SimModel",
    "Study",
    "StudyCell",
    "assign_cause",
    "cause1_probability",
    "cluster_rng",
    "conditional_cdf",
    "draw_covariates",
    "draw_failure_time",
    "draw_frailty",
    "find_cell",
    "frailty_acceptance",
    "generate",
    "invert_cdf",
    "study_cells",
]
