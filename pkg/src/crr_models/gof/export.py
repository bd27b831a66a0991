from __future__ import annotations

import pandas as pd

from .types import TestProcess


def export_test_process(tp: TestProcess, n_draws_to_plot: int = 50) -> pd.DataFrame:
    """Plot-ready trace: axis, observed and the first ``n_draws_to_plot`` perturbed draws."""
    m = max(0, min(n_draws_to_plot, tp.perturbed.shape[0]))
    frame = pd.DataFrame({"axis": tp.axis, "observed": tp.observed})
    for d in range(m):
        frame[f"draw_{d + 1}"] = tp.perturbed[d]
    return frame
