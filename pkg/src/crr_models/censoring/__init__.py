from .km import CensoringModel, fit_censoring_km, km_table
from .weights import WeightMatrix, WeightMode, cc_weight, ipcw_weight

__all__ = [
    "CensoringModel",
    "fit_censoring_km",
    "km_table",
    "WeightMatrix",
    "WeightMode",
    "cc_weight",
    "ipcw_weight",
]
