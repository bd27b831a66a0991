from .sandwich import (
    Clustering,
    SandwichParts,
    censoring_psi,
    censoring_q,
    coefficient_table,
    sandwich,
)
from .cif import CifPrediction, bootstrap_cif_band, predict_cif, predict_cif_table

__all__ = [
    "Clustering",
    "SandwichParts",
    "censoring_psi",
    "censoring_q",
    "coefficient_table",
    "sandwich",
    "CifPrediction",
    "bootstrap_cif_band",
    "predict_cif",
    "predict_cif_table",
]
