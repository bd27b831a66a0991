from __future__ import annotations

import io
import json
from pathlib import Path
from typing import IO, Any, Mapping, TypedDict

import numpy as np
import pandas as pd

from crr_core.exceptions import (
    CensoringTimeUnavailable,
    DataError,
    EmptyCluster,
    MissingColumn,
    NonFiniteValue,
    NonPositiveTime,
    UnknownCauseCode,
)
from crr_core.logging import get_logger

from .types import Basis, ClusteredDataset

log = get_logger("crr.dataset")

TRUTH_COLUMNS = ("true_time", "true_cause", "frailty")
BASIS_SEP = "@"

Source = str | Path | bytes | IO[str] | IO[bytes]


class DatasetSchema(TypedDict, total=False):
    cluster: str
    time: str
    status: str
    ctime: str
    covariates: list[str]
    basis: dict[str, str]


DEFAULT_SCHEMA: DatasetSchema = {
    "cluster": "cluster",
    "time": "time",
    "status": "status",
    "ctime": "ctime",
}


def _split_header(col: str) -> tuple[str, Basis]:
    if BASIS_SEP in col:
        name, tag = col.rsplit(BASIS_SEP, 1)
        try:
            return name, Basis(tag)
        except ValueError as e:
            raise DataError(f"Unknown time basis {tag!r} on column {col!r}") from e
    return col, Basis.CONST


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8")
    raw = source.read()
    return raw.decode("utf-8") if isinstance(raw, bytes) else raw


def _read_frame(source: Source, sep: str, cluster_col: str) -> tuple[pd.DataFrame, dict[str, str]]:
    """Data frame plus the ``# key: value`` lines leading the file."""
    text = _read_text(source)
    meta: dict[str, str] = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        key, _, value = line[1:].partition(":")
        meta[key.strip()] = value.strip()
    df = pd.read_csv(io.StringIO(text), sep=sep, comment="#", dtype={cluster_col: str})
    return df, meta


def _finite(df: pd.DataFrame, cols: list[str]) -> np.ndarray:
    try:
        arr = df[cols].to_numpy(dtype=float)
    except (TypeError, ValueError) as e:
        raise NonFiniteValue(f"non-numeric value in columns {cols}") from e
    bad = ~np.isfinite(arr)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise NonFiniteValue(f"non-finite value in column {cols[col]!r} at row {row + 1}")
    return arr


def load_dataset(
    source: Source,
    schema: DatasetSchema | None = None,
    tau: float | None = None,
    *,
    K: int | None = None,
    sep: str = ",",
) -> ClusteredDataset:
    """
    Parse a delimited table into a validated ClusteredDataset.

    - Covariates are every column except cluster/time/status/ctime and ground-truth columns,
      unless ``schema["covariates"]`` lists them.
    - A ``name@exp-decay`` header (or ``schema["basis"]``) declares the time basis of a covariate.
    - K defaults to the largest status code; τ to the largest observed failure time.
    """
    sch: DatasetSchema = {**DEFAULT_SCHEMA, **(schema or {})}
    df, meta = _read_frame(source, sep, sch["cluster"])
    if K is None and "K" in meta:
        K = int(meta["K"])
    if tau is None and "tau" in meta:
        tau = float(meta["tau"])

    for key in ("cluster", "time", "status"):
        if sch[key] not in df.columns:
            raise MissingColumn(f"Missing column: {sch[key]}")

    reserved = {sch["cluster"], sch["time"], sch["status"], sch["ctime"], *TRUTH_COLUMNS}
    if "covariates" in sch:
        cov_cols = []
        for name in sch["covariates"]:
            match = [c for c in df.columns if _split_header(c)[0] == name]
            if not match:
                raise MissingColumn(f"Missing covariate column: {name}")
            cov_cols.append(match[0])
    else:
        cov_cols = [c for c in df.columns if c not in reserved]
    if not cov_cols:
        raise MissingColumn("No covariate columns found")

    names, basis = [], []
    for col in cov_cols:
        name, b = _split_header(col)
        if name in sch.get("basis", {}):
            b = Basis(sch["basis"][name])
        names.append(name)
        basis.append(b)

    raw_cluster = df[sch["cluster"]]
    blank = raw_cluster.isna() | (raw_cluster.astype(str).str.strip() == "")
    if blank.any():
        raise EmptyCluster(f"blank cluster id at row {int(np.flatnonzero(blank)[0]) + 1}")
    codes, labels = pd.factorize(raw_cluster.astype(str).str.strip(), sort=False)

    time = _finite(df, [sch["time"]])[:, 0]
    status_f = _finite(df, [sch["status"]])[:, 0]
    X = _finite(df, cov_cols)

    if np.any(time <= 0):
        row = int(np.flatnonzero(time <= 0)[0])
        raise NonPositiveTime(f"time must be > 0, got {time[row]} at row {row + 1}")
    if np.any(status_f != np.round(status_f)) or np.any(status_f < 0):
        raise UnknownCauseCode("status must be a non-negative integer code")
    status = status_f.astype(np.int64)

    k_decl = int(status.max()) if K is None else int(K)
    k_decl = max(k_decl, 1)
    if status.max() > k_decl:
        raise UnknownCauseCode(f"status {int(status.max())} exceeds declared K={k_decl}")

    ctime = None
    if sch["ctime"] in df.columns:
        ctime = _finite(df, [sch["ctime"]])[:, 0]
        if np.any(ctime <= 0):
            raise NonPositiveTime("ctime must be > 0")
        if np.any(ctime < time):
            raise DataError("ctime earlier than the observed time")

    if tau is None:
        failed = time[status != 0]
        tau = float(failed.max()) if failed.size else float(time.max())

    ds = ClusteredDataset(
        cluster=codes,
        time=time,
        status=status,
        X=X,
        basis=tuple(basis),
        names=tuple(names),
        tau=tau,
        K=k_decl,
        cluster_labels=tuple(labels),
        ctime=ctime,
    )
    log.debug(
        "loaded %d subjects in %d clusters (p=%d, K=%d, tau=%.6g)", ds.N, ds.n, ds.p, ds.K, ds.tau
    )
    return ds


def require_ctime(ds: ClusteredDataset) -> np.ndarray:
    if ds.ctime is None:
        raise CensoringTimeUnavailable("censoring-complete mode needs a ctime column")
    return ds.ctime


def to_frame(ds: ClusteredDataset, truth: Mapping[str, np.ndarray] | None = None) -> pd.DataFrame:
    cols: dict[str, Any] = {
        "cluster": [str(ds.cluster_labels[c]) for c in ds.cluster],
        "time": ds.time,
        "status": ds.status,
    }
    for j, (name, b) in enumerate(zip(ds.names, ds.basis)):
        header = name if b is Basis.CONST else f"{name}{BASIS_SEP}{b.value}"
        cols[header] = ds.X[:, j]
    if ds.ctime is not None:
        cols["ctime"] = ds.ctime
    for key, values in (truth or {}).items():
        if key == "ctime":
            continue
        cols[key] = np.asarray(values)
    return pd.DataFrame(cols)


def save_dataset(
    ds: ClusteredDataset,
    target: str | Path | IO[str],
    truth: Mapping[str, np.ndarray] | None = None,
    manifest: Mapping[str, Any] | None = None,
) -> None:
    """Inverse of load_dataset; τ, K and the manifest go into leading comment lines."""
    frame = to_frame(ds, truth)
    header = f"# tau: {ds.tau:.17g}\n# K: {ds.K}\n"
    if manifest:
        header += "# manifest: " + json.dumps(manifest, sort_keys=True, default=str) + "\n"

    body = frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")
    if isinstance(target, (str, Path)):
        Path(target).write_text(header + body, encoding="utf-8")
    else:
        target.write(header + body)
