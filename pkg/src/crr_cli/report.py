from __future__ import annotations

import json
import math
from typing import Any, Sequence

import numpy as np
import pandas as pd

from crr_models.fitter import FitResult
from crr_models.gof import ALL, GofReport, ProcessKind
from crr_models.variance import SandwichParts

from .manifest import RunManifest

JSON_MARKER = "--- json ---"


def _plain(value: Any) -> Any:
    """numpy scalars/arrays to JSON-safe Python; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def frame_records(frame: pd.DataFrame) -> list[dict[str, Any]]:
    return _plain(frame.to_dict(orient="records"))


def _fmt(frame: pd.DataFrame) -> str:
    return frame.to_string(index=False, float_format=lambda v: f"{v:.4f}", na_rep="NA")


def render_document(
    title: str,
    sections: Sequence[tuple[str, pd.DataFrame]],
    payload: dict[str, Any],
    manifest: RunManifest,
) -> str:
    """Human-readable tables followed by one JSON block holding the payload and the manifest."""
    parts = [f"# {title}", ""]
    for heading, frame in sections:
        parts += [f"## {heading}", _fmt(frame), ""]
    block = {"manifest": manifest.to_dict(), **payload}
    parts += [JSON_MARKER, json.dumps(_plain(block), indent=2, sort_keys=True), ""]
    return "\n".join(parts)


def parse_payload(document: str) -> dict[str, Any]:
    """JSON block of a rendered document."""
    _, _, tail = document.partition(JSON_MARKER)
    return json.loads(tail)


def model_table(coef: pd.DataFrame, gof: GofReport | None = None) -> pd.DataFrame:
    """
    Application layout: Estimate and Robust SE per covariate, plus the additivity
    Test Statistic and p-Value when a report is attached, and an Overall row.
    """
    frame = pd.DataFrame(
        {
            "Covariate": coef["covariate"],
            "Estimate": coef["estimate"],
            "Robust SE": coef["robust_se"],
        }
    )
    if gof is None:
        return frame

    additive = {e.covariate: e for e in gof.entries if e.test is ProcessKind.SCORE_ADDITIVITY}
    frame["Test Statistic"] = [
        additive[c].statistic if c in additive else np.nan for c in frame["Covariate"]
    ]
    frame["p-Value"] = [
        additive[c].p_value if c in additive else np.nan for c in frame["Covariate"]
    ]
    if ALL in additive:
        overall = pd.DataFrame(
            {
                "Covariate": ["Overall"],
                "Estimate": [np.nan],
                "Robust SE": [np.nan],
                "Test Statistic": [additive[ALL].statistic],
                "p-Value": [additive[ALL].p_value],
            }
        )
        frame = pd.concat([frame, overall], ignore_index=True)
    return frame


def fit_payload(res: FitResult, parts: SandwichParts, coef: pd.DataFrame) -> dict[str, Any]:
    return {
        "cause": res.cause,
        "mode": res.mode.value,
        "clustering": parts.clustering.value,
        "tau": res.ds.tau,
        "n_clusters": res.ds.n,
        "n_subjects": res.ds.N,
        "coefficients": frame_records(coef),
        "sigma": parts.Sigma,
        "baseline": frame_records(res.baseline_curve()),
    }


def gof_payload(report: GofReport) -> dict[str, Any]:
    return {
        "draws": report.B,
        "seed": report.seed,
        "add_one": report.add_one,
        "tests": frame_records(report.to_frame()),
    }
