from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import StrEnum
from typing import Hashable, NewType, Sequence

import numpy as np

from crr_core.exceptions import TauBeyondFollowUp, TooFewClusters, UnknownCauseCode

# 0 = censored, 1..K = failure causes
CauseCode = NewType("CauseCode", int)

CENSORED = CauseCode(0)


class Basis(StrEnum):
    CONST = "const"
    EXP_DECAY = "exp-decay"

    def evaluate(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self is Basis.CONST:
            return np.ones_like(t)
        return np.exp(-t)

    @property
    def is_constant(self) -> bool:
        return self is Basis.CONST


def _frozen(arr: np.ndarray | None, dtype=float) -> np.ndarray | None:
    if arr is None:
        return None
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def evaluate_basis(basis: Sequence[Basis], t: np.ndarray | float) -> np.ndarray:
    """Basis values with shape ``t.shape + (p,)``."""
    t = np.asarray(t, dtype=float)
    return np.stack([b.evaluate(t) for b in basis], axis=-1)


@dataclass(frozen=True, eq=False)
class CovariatePath:
    """X(t) = base ⊙ basis(t), one declared basis per coordinate."""

    base: np.ndarray
    basis: tuple[Basis, ...]

    def __post_init__(self) -> None:
        base = np.atleast_1d(np.asarray(self.base, dtype=float))
        basis = tuple(Basis(b) for b in self.basis)
        if base.ndim != 1 or base.size != len(basis):
            raise ValueError(f"base has {base.size} entries but {len(basis)} bases declared")
        object.__setattr__(self, "base", _frozen(base))
        object.__setattr__(self, "basis", basis)

    @classmethod
    def constant(cls, base: Sequence[float]) -> "CovariatePath":
        base = np.atleast_1d(np.asarray(base, dtype=float))
        return cls(base, tuple(Basis.CONST for _ in range(base.size)))

    @property
    def p(self) -> int:
        return int(self.base.size)

    def at(self, t: np.ndarray | float) -> np.ndarray:
        return self.base * evaluate_basis(self.basis, t)


@dataclass(frozen=True)
class SubjectRecord:
    cluster_id: Hashable
    time: float
    cause: CauseCode
    covariates: CovariatePath
    ctime: float | None = None

    @property
    def failed(self) -> bool:
        return self.cause != CENSORED


@dataclass(frozen=True, eq=False)
class ClusteredDataset:
    """
    Column-oriented store of validated subjects.

    ``cluster`` holds integer codes 0..n-1 indexing ``cluster_labels``. Arrays are read-only.
    ``ctime`` is the recorded potential censoring time (censoring-complete data) or None.
    """

    cluster: np.ndarray
    time: np.ndarray
    status: np.ndarray
    X: np.ndarray
    basis: tuple[Basis, ...]
    names: tuple[str, ...]
    tau: float
    K: int
    cluster_labels: tuple[Hashable, ...]
    ctime: np.ndarray | None = None
    _sizes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        object.__setattr__(self, "cluster", _frozen(self.cluster, dtype=np.intp))
        object.__setattr__(self, "time", _frozen(self.time))
        object.__setattr__(self, "status", _frozen(self.status, dtype=np.int64))
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "ctime", _frozen(self.ctime))
        object.__setattr__(self, "basis", tuple(Basis(b) for b in self.basis))
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "cluster_labels", tuple(self.cluster_labels))
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "K", int(self.K))

        if self.K < 1:
            raise UnknownCauseCode(f"K must be >= 1, got {self.K}")
        if self.status.size and (self.status.min() < 0 or self.status.max() > self.K):
            raise UnknownCauseCode(f"status outside 0..{self.K}")
        if len(self.basis) != self.X.shape[1] or len(self.names) != self.X.shape[1]:
            raise ValueError("covariate names/basis do not match X columns")

        sizes = np.bincount(self.cluster, minlength=len(self.cluster_labels))
        if len(self.cluster_labels) < 2:
            raise TooFewClusters(f"need at least 2 clusters, got {len(self.cluster_labels)}")
        sizes.setflags(write=False)
        object.__setattr__(self, "_sizes", sizes)

        if self.tau > float(self.time.max()):
            raise TauBeyondFollowUp(f"tau={self.tau} exceeds max observed time {self.time.max()}")

    # --- shape ---------------------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.cluster_labels)

    @property
    def N(self) -> int:
        return int(self.time.size)

    @property
    def p(self) -> int:
        return int(self.X.shape[1])

    @property
    def cluster_sizes(self) -> np.ndarray:
        return self._sizes

    @property
    def censoring_observed(self) -> bool:
        return self.ctime is not None

    @property
    def all_constant(self) -> bool:
        return all(b.is_constant for b in self.basis)

    # --- record views --------------------------------------------------------------------

    def record(self, idx: int) -> SubjectRecord:
        return SubjectRecord(
            cluster_id=self.cluster_labels[self.cluster[idx]],
            time=float(self.time[idx]),
            cause=CauseCode(int(self.status[idx])),
            covariates=CovariatePath(self.X[idx], self.basis),
            ctime=None if self.ctime is None else float(self.ctime[idx]),
        )

    @property
    def subjects(self) -> list[SubjectRecord]:
        return [self.record(i) for i in range(self.N)]

    def events_before(self, k: int, tau: float | None = None) -> int:
        tau = self.tau if tau is None else tau
        return int(np.count_nonzero((self.status == k) & (self.time <= tau)))

    # --- derived datasets ----------------------------------------------------------------

    def with_tau(self, tau: float) -> "ClusteredDataset":
        return replace(self, tau=tau)

    def by_individual(self) -> "ClusteredDataset":
        """Same subjects, each one its own cluster."""
        labels = tuple(range(self.N))
        return replace(self, cluster=np.arange(self.N), cluster_labels=labels)

    def take_clusters(self, indices: Sequence[int], tau: float | None = None) -> "ClusteredDataset":
        """
        Stack the given clusters (repeats allowed) into a new dataset. Repeated clusters
        become distinct clusters; τ is kept unless overridden.
        """
        indices = np.asarray(indices, dtype=np.intp)
        order = np.argsort(self.cluster, kind="stable")
        bounds = np.r_[0, np.cumsum(self._sizes)]
        rows = [order[bounds[c]:bounds[c + 1]] for c in indices]
        codes = np.concatenate([np.full(r.size, new, dtype=np.intp) for new, r in enumerate(rows)])
        rows_all = np.concatenate(rows)
        labels = tuple(f"{self.cluster_labels[c]}#{new}" for new, c in enumerate(indices))
        new_tau = self.tau if tau is None else tau
        return replace(
            self,
            cluster=codes,
            time=self.time[rows_all],
            status=self.status[rows_all],
            X=self.X[rows_all],
            ctime=None if self.ctime is None else self.ctime[rows_all],
            cluster_labels=labels,
            tau=min(new_tau, float(self.time[rows_all].max())),
        )


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """
    Knots t_1 < ... < t_L = τ; interval a is (starts[a], knots[a]] with starts[0] = 0.

    Per-interval moments are trapezoid integrals over Q panels:
      I1[a, l]    = ∫ b_l(u) du
      I2[a, l, m] = ∫ b_l(u) b_m(u) du
    and BK[a, l] = b_l(knots[a]).
    """

    knots: np.ndarray
    Q: int
    basis: tuple[Basis, ...]
    I1: np.ndarray = field(init=False, repr=False)
    I2: np.ndarray = field(init=False, repr=False)
    BK: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=float)
        if knots.ndim != 1 or knots.size == 0 or np.any(np.diff(knots) <= 0) or knots[0] <= 0:
            raise ValueError("knots must be positive and strictly increasing")
        object.__setattr__(self, "knots", _frozen(knots))
        object.__setattr__(self, "basis", tuple(Basis(b) for b in self.basis))
        I1, I2 = self.moments(self.starts, self.knots)
        object.__setattr__(self, "I1", _frozen(I1))
        object.__setattr__(self, "I2", _frozen(I2))
        object.__setattr__(self, "BK", _frozen(evaluate_basis(self.basis, self.knots)))

    @property
    def starts(self) -> np.ndarray:
        return np.r_[0.0, self.knots[:-1]]

    @property
    def tau(self) -> float:
        return float(self.knots[-1])

    @property
    def size(self) -> int:
        return int(self.knots.size)

    def moments(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Trapezoid moments over [lo, hi] per row, Q panels each."""
        from scipy.integrate import trapezoid

        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        frac = np.linspace(0.0, 1.0, self.Q + 1)
        nodes = lo[:, None] + (hi - lo)[:, None] * frac[None, :]  # (L, Q+1)
        vals = evaluate_basis(self.basis, nodes)  # (L, Q+1, p)
        I1 = trapezoid(vals, nodes[:, :, None], axis=1)
        prod = vals[:, :, :, None] * vals[:, :, None, :]
        I2 = trapezoid(prod, nodes[:, :, None, None], axis=1)
        return I1, I2

    def locate(self, t: float) -> int:
        """Index of the interval containing t (0 for t <= first knot)."""
        return int(np.searchsorted(self.knots, t, side="left"))

    def truncated(self, t: float) -> tuple[int, np.ndarray, np.ndarray, bool]:
        """
        Moments of [0, t] split as: number of full intervals, I1/I2 of the partial interval
        and whether knot a itself (the interval's right end) is reached.
        """
        if t <= 0:
            p = len(self.basis)
            return 0, np.zeros(p), np.zeros((p, p)), False
        a = min(self.locate(t), self.size - 1)
        t = min(t, self.tau)
        I1, I2 = self.moments(np.array([self.starts[a]]), np.array([t]))
        reached = bool(t >= self.knots[a])
        return a, I1[0], I2[0], reached
