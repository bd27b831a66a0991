import logging

import pytest

from crr_core.config import Settings
from crr_core.exceptions import (
    BootstrapFitFailure,
    ConfigError,
    CrrError,
    DataError,
    GhatZeroBeforeTau,
    NumericError,
    ReplicationQualityError,
    SimConfigError,
    SingularDesign,
    TooFewClusters,
)
from crr_core.logging import get_logger

ENV_KEYS = (
    "CRR_ENV",
    "CRR_LOG_LEVEL",
    "CRR_PARALLEL",
    "CRR_GHAT_FLOOR",
    "CRR_QUADRATURE",
    "CRR_DRAWS",
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in ENV_KEYS:
        monkeypatch.delenv(key, raising=False)


def test_defaults_without_environment():
    s = Settings.from_env()
    assert s.parallel == 1
    assert s.ghat_floor == 1e-10
    assert s.quadrature == 16
    assert s.draws == 1000
    assert s.log_level == "INFO"


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("CRR_PARALLEL", "4")
    monkeypatch.setenv("CRR_QUADRATURE", " 8 ")
    monkeypatch.setenv("CRR_GHAT_FLOOR", "1e-6")
    monkeypatch.setenv("CRR_DRAWS", "250")
    s = Settings.from_env()
    assert (s.parallel, s.quadrature, s.ghat_floor, s.draws) == (4, 8, 1e-6, 250)


def test_blank_value_falls_back_to_default(monkeypatch):
    monkeypatch.setenv("CRR_PARALLEL", "   ")
    assert Settings.from_env().parallel == 1


@pytest.mark.parametrize(
    "key, value",
    [
        ("CRR_PARALLEL", "two"),
        ("CRR_PARALLEL", "0"),
        ("CRR_GHAT_FLOOR", "1.5"),
        ("CRR_GHAT_FLOOR", "nope"),
        ("CRR_QUADRATURE", "0"),
    ],
)
def test_bad_environment_values(monkeypatch, key, value):
    monkeypatch.setenv(key, value)
    with pytest.raises(ConfigError):
        Settings.from_env()


def test_exit_codes_follow_the_category():
    assert CrrError.exit_code == 1
    assert ConfigError.exit_code == 2
    assert SimConfigError.exit_code == 2
    assert DataError.exit_code == TooFewClusters.exit_code == 2
    assert NumericError.exit_code == GhatZeroBeforeTau.exit_code == 3
    assert ReplicationQualityError.exit_code == 4


def test_structured_error_messages():
    assert str(SingularDesign(float("inf"), "no variation in: x")) == (
        "SingularDesign(condition=inf) no variation in: x"
    )
    assert "3/200" in str(BootstrapFitFailure(failed=3, total=200))
    assert isinstance(SingularDesign(1e13), NumericError)


def test_get_logger_level():
    log = get_logger("crr.test", "debug")
    assert log.level == logging.DEBUG
    assert get_logger("crr.test").name == "crr.test"


def test_logs_follow_the_current_stderr(capsys):
    get_logger("crr.test").warning("first message")
    assert "first message" in capsys.readouterr().err
    get_logger("crr.test").warning("second message")
    assert "second message" in capsys.readouterr().err
