from __future__ import annotations

from enum import StrEnum

import numpy as np

from crr_core.exceptions import CensoringTimeUnavailable, DivisionByZeroGhat
from crr_models.dataset import CENSORED, ClusteredDataset, SubjectRecord, TimeGrid
from crr_models.dataset.io import require_ctime

from .km import CensoringModel


class WeightMode(StrEnum):
    IPCW = "ipcw"
    CC = "cc"


def ipcw_weight(model: CensoringModel, record: SubjectRecord, t: float) -> float:
    """ω̂(t) = r(t) Ĝ(t) / Ĝ(Z ∧ t); r(t) = 0 once a censored subject has left follow-up."""
    if record.cause == CENSORED and t > record.time:
        return 0.0
    denom = float(model.G(min(record.time, t)))
    if denom <= model.floor:
        raise DivisionByZeroGhat(f"G({min(record.time, t):.6g}) = {denom:.3g}")
    return float(model.G(t)) / denom


def cc_weight(record: SubjectRecord, t: float) -> int:
    """I(C > t) with the recorded potential censoring time C."""
    if record.ctime is None:
        raise CensoringTimeUnavailable("record has no censoring time")
    return int(record.ctime > t)


class WeightMatrix:
    """
    ω̂ Y^k on the time grid for every subject, kept compact.

    Per subject only the knot index of Z, the competing-risk flag and 1/Ĝ(Z) are stored;
    dense row blocks are materialised on demand:

    - ``interval(rows)`` is the weight on the open interval (starts[a], knots[a])
    - ``knot(rows)`` is the weight at knots[a] itself (used for dN integrals and S^(r)(t_a))
    """

    def __init__(
        self,
        ds: ClusteredDataset,
        grid: TimeGrid,
        k: int,
        mode: WeightMode,
        cm: CensoringModel | None = None,
    ) -> None:
        self.mode = WeightMode(mode)
        self.L = grid.size
        self.knots = grid.knots
        self.starts = grid.starts
        self.zi = np.searchsorted(grid.knots, ds.time, side="left")
        self.zi[ds.time > grid.tau] = self.L
        self.competing = (ds.status != CENSORED) & (ds.status != k)
        self.event = (ds.status == k) & (self.zi < self.L)

        if self.mode is WeightMode.IPCW:
            if cm is None:
                raise ValueError("IPCW weights need a censoring model")
            g_z = cm.G(ds.time)
            if np.any(g_z[self.competing] <= cm.floor):
                raise DivisionByZeroGhat("G(Z) at or below floor for a competing-risk subject")
            self.inv_gz = np.where(self.competing, 1.0 / np.maximum(g_z, cm.floor), 0.0)
            self.g_start = cm.G(self.starts)
            self.g_knot = cm.G(self.knots)
            self.ctime = None
        else:
            self.ctime = require_ctime(ds)
            self.inv_gz = None

    def _before(self, rows: np.ndarray) -> np.ndarray:
        return np.arange(self.L)[None, :] <= self.zi[rows, None]

    def interval(self, rows: np.ndarray | slice) -> np.ndarray:
        rows = np.arange(self.zi.size)[rows]
        before = self._before(rows)
        beyond = ~before & self.competing[rows, None]
        if self.mode is WeightMode.IPCW:
            return before + beyond * (self.g_start[None, :] * self.inv_gz[rows, None])
        alive = self.ctime[rows, None] > self.starts[None, :]
        return (before | (beyond & alive)).astype(float)

    def knot(self, rows: np.ndarray | slice) -> np.ndarray:
        rows = np.arange(self.zi.size)[rows]
        before = self._before(rows)
        beyond = ~before & self.competing[rows, None]
        if self.mode is WeightMode.IPCW:
            return before + beyond * (self.g_knot[None, :] * self.inv_gz[rows, None])
        alive = self.ctime[rows, None] > self.knots[None, :]
        return ((before | beyond) & alive).astype(float)

    def at_risk(self, rows: np.ndarray | slice) -> np.ndarray:
        """Unweighted observable risk indicator: a <= zi or a competing failure."""
        rows = np.arange(self.zi.size)[rows]
        return (self._before(rows) | self.competing[rows, None]).astype(float)

    def chunks(self, size: int | None = None):
        """Row slices covering all subjects in bounded dense blocks."""
        n = self.zi.size
        size = size or max(1, 2_000_000 // max(self.L, 1))
        for lo in range(0, n, size):
            yield slice(lo, min(lo + size, n))
