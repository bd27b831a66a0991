from .types import ALL, FChoice, GofEntry, GofReport, ProcessKind, TestProcess
from .perturb import check_draws, iter_perturbations, monte_carlo_pvalue, perturb
from .influence import cluster_influence, weighted_residual_process
from .additivity import additivity_entries, additivity_test, score_influence
from .functional_form import form_influence, functional_form_test, thresholds
from .export import export_test_process
from .report import run_gof

__all__ = [
    "ALL",
    "FChoice",
    "GofEntry",
    "GofReport",
    "ProcessKind",
    "TestProcess",
    "check_draws",
    "iter_perturbations",
    "monte_carlo_pvalue",
    "perturb",
    "cluster_influence",
    "weighted_residual_process",
    "additivity_entries",
    "additivity_test",
    "score_influence",
    "form_influence",
    "functional_form_test",
    "thresholds",
    "export_test_process",
    "run_gof",
]
