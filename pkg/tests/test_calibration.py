import numpy as np
import pytest
from scipy import stats

from crr_cli.models import Arm
from crr_cli.replicate import estimation_summary, run_cell, testing_summary
from crr_models.simgen import Study, find_cell

pytestmark = pytest.mark.slow

WORKERS = -1


def _cell(study, label, seed):
    return find_cell(study, label)[0].with_seed(seed)


def _binomial_tol(p, reps):
    """Three binomial Monte Carlo SEs around a nominal proportion."""
    return 3 * np.sqrt(p * (1 - p) / reps)


def _estimation(study, label, reps, seed):
    cell = _cell(study, label, seed)
    outcomes = run_cell(cell, reps, parallel=WORKERS, progress=False)
    frame = estimation_summary(cell, outcomes)
    return frame.set_index("arm"), sum(o.ok for o in outcomes)


def _rejections(label, reps, seed):
    cell = _cell(Study.TABLE3, label, seed)
    outcomes = run_cell(cell, reps, parallel=WORKERS, draws=1000, progress=False)
    pvals = np.array([o.p_value for o in outcomes if o.ok], dtype=float)
    return testing_summary(cell, outcomes).iloc[0], pvals


@pytest.fixture(scope="module")
def low_censoring():
    return _estimation(Study.TABLE1, "n=100 m=10 theta=0.7", 300, 2024)


@pytest.fixture(scope="module")
def high_censoring():
    return _estimation(Study.TABLE2, "n=250 m=20 theta=1.0", 200, 2025)


def test_cluster_robust_ipcw_is_calibrated(low_censoring):
    frame, R = low_censoring
    assert R >= 0.95 * 300
    crc = frame.loc[Arm.CRC.value]
    drift = 3 * crc["mcse"] / np.sqrt(R)
    assert 0.97 - drift <= crc["mean_estimate"] <= 1.06 + drift
    assert abs(crc["coverage"] - 0.95) <= _binomial_tol(0.95, R)
    ratio_tol = 0.1 + 3 / np.sqrt(2 * R)
    assert abs(crc["aese"] / crc["mcse"] - 1) <= ratio_tol


def test_ignoring_clusters_undercovers(low_censoring):
    frame, R = low_censoring
    crc, ucrc = frame.loc[Arm.CRC.value], frame.loc[Arm.UCRC.value]
    tol = _binomial_tol(0.88, R)
    assert 0.84 - tol <= ucrc["coverage"] <= 0.92 + tol
    assert ucrc["coverage"] < crc["coverage"]
    assert ucrc["aese"] < crc["aese"]


def test_ipcw_agrees_with_censoring_complete(low_censoring):
    frame, _ = low_censoring
    crc, ccc = frame.loc[Arm.CRC.value], frame.loc[Arm.CCC.value]
    assert abs(crc["mean_estimate"] - ccc["mean_estimate"]) <= 0.01
    assert abs(crc["coverage"] - ccc["coverage"]) <= 0.02


def test_calibration_under_heavier_censoring(high_censoring):
    frame, R = high_censoring
    assert R >= 0.95 * 200
    crc, ucrc = frame.loc[Arm.CRC.value], frame.loc[Arm.UCRC.value]
    drift = 3 * crc["mcse"] / np.sqrt(R)
    assert 0.97 - drift <= crc["mean_estimate"] <= 1.05 + drift
    assert abs(crc["coverage"] - 0.95) <= _binomial_tol(0.95, R)
    tol = _binomial_tol(0.89, R)
    assert 0.85 - tol <= ucrc["coverage"] <= 0.93 + tol


def test_overall_test_size_and_null_p_values():
    R = 300
    summary, pvals = _rejections("m1 n=100 theta=0.7 gamma=0.35", R, 7)
    assert pvals.size >= 0.95 * R
    assert abs(summary["rejection_rate"] - 0.05) <= _binomial_tol(0.05, pvals.size)
    assert stats.kstest(pvals, "uniform").pvalue > 0.01


def test_power_falls_as_censoring_grows():
    R = 200
    rates = [
        _rejections(f"m2 n=150 theta=0.7 gamma={gamma}", R, 11)[0]["rejection_rate"]
        for gamma in (0.35, 0.95, 1.65)
    ]
    assert rates[0] >= 0.85 - _binomial_tol(0.85, R)
    assert rates[0] >= rates[1] >= rates[2]
    assert rates[0] > rates[2]
