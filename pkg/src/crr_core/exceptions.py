from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar


class CrrError(Exception):
    """Base of every error raised by clustered-crr."""

    exit_code: ClassVar[int] = 1


class ConfigError(CrrError):
    """Configuration error (bad environment value, invalid simulation config, etc.)."""

    exit_code: ClassVar[int] = 2


class DataError(CrrError):
    """Input data rejected during loading or validation."""

    exit_code: ClassVar[int] = 2


class NumericError(CrrError):
    """Estimation failed for numerical reasons (singular design, empty risk set, ...)."""

    exit_code: ClassVar[int] = 3


class ReplicationQualityError(CrrError):
    """Too many failed replicates in a simulation study."""

    exit_code: ClassVar[int] = 4


# --- dataset -------------------------------------------------------------------------------


class MissingColumn(DataError):
    ...


class NonPositiveTime(DataError):
    ...


class NonFiniteValue(DataError):
    ...


class UnknownCauseCode(DataError):
    ...


class EmptyCluster(DataError):
    ...


class TooFewClusters(DataError):
    ...


class TauBeyondFollowUp(DataError):
    ...


class CensoringTimeUnavailable(DataError):
    ...


class DegenerateCovariate(DataError):
    ...


# --- estimation ----------------------------------------------------------------------------


class GhatZeroBeforeTau(NumericError):
    """Ĝ(τ) hit the floor: the IPCW weights are undefined."""


class DivisionByZeroGhat(NumericError):
    ...


class NoEventsForCause(NumericError):
    ...


@dataclass(frozen=True)
class SingularDesign(NumericError):
    """
    Â(τ) is not invertible.
    - condition=inf: a centred covariate vanishes on every risk set
    """
    condition: float
    detail: str = ""

    def __str__(self) -> str:
        base = f"SingularDesign(condition={self.condition:.3g})"
        return base if not self.detail else f"{base} {self.detail}"


@dataclass(frozen=True)
class BootstrapFitFailure(NumericError):
    failed: int
    total: int

    def __str__(self) -> str:
        return f"BootstrapFitFailure({self.failed}/{self.total} resamples failed to fit)"


# --- simulation ----------------------------------------------------------------------------


class SimConfigError(ConfigError):
    ...


class RejectionBudgetExceeded(NumericError):
    ...


class InvalidProbability(NumericError):
    ...


class RootNotBracketed(NumericError):
    ...
