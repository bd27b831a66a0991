import numpy as np
import pytest

from crr_core.exceptions import CensoringTimeUnavailable, GhatZeroBeforeTau
from crr_models.censoring import (
    WeightMatrix,
    WeightMode,
    cc_weight,
    fit_censoring_km,
    ipcw_weight,
    km_table,
)
from crr_models.dataset import CovariatePath, SubjectRecord, build_grid, counting_process
from crr_models.fitter import fit

from conftest import make_dataset


def _three_subjects():
    return make_dataset([0, 1, 1], [1.0, 2.0, 3.0], [1, 0, 2], [0.0, 1.0, 0.5])


def _brute_force_km(time, status, t):
    """Product over censoring times u <= t of 1 - d(u)/#{Z >= u}."""
    out = 1.0
    for u in np.unique(time[status == 0]):
        if u > t:
            break
        d = np.sum((time == u) & (status == 0))
        r = np.sum(time >= u)
        out *= 1.0 - d / r
    return out


def test_km_small_example():
    cm = fit_censoring_km(_three_subjects())
    assert cm.G(1.5) == pytest.approx(1.0)
    assert cm.G(2.0) == pytest.approx(0.5)
    assert cm.G(0.0) == pytest.approx(1.0)
    table = km_table(cm)
    assert list(table["time"]) == [0.0, 2.0]
    assert list(table["G"]) == [1.0, 0.5]


def test_no_censoring_means_g_is_one(uncensored_ds):
    cm = fit_censoring_km(uncensored_ds)
    np.testing.assert_array_equal(cm.G(np.linspace(0, 5, 11)), 1.0)


def test_everyone_censored_hits_the_floor():
    ds = make_dataset([0, 0, 1, 1], [1.0, 2.0, 3.0, 4.0], [0, 0, 0, 0], [0, 1, 0, 1])
    with pytest.raises(GhatZeroBeforeTau):
        fit_censoring_km(ds)


@pytest.mark.parametrize("seed", range(5))
def test_matches_brute_force_product_limit(seed):
    rng = np.random.default_rng(seed)
    N = 20
    time = rng.integers(1, 8, N).astype(float)
    status = rng.integers(0, 3, N)
    status[0] = 1
    ds = make_dataset(np.arange(N) % 5, time, status, rng.normal(size=N))
    cm = fit_censoring_km(ds)
    for t in np.arange(0.0, ds.tau + 0.5, 0.5):
        assert cm.G(t) == pytest.approx(_brute_force_km(time, status, t), abs=1e-12)


def test_close_to_exp_of_cumulative_hazard(sim_ds):
    cm = fit_censoring_km(sim_ds)
    t = cm.km_times[cm.risk_totals >= 10]
    lam = cm.cumulative_hazard(t)
    assert np.all(np.abs(cm.G(t) - np.exp(-lam)) <= lam**2 + 1e-12)


def test_hazard_jump_and_risk(tiny_ds):
    cm = fit_censoring_km(tiny_ds)
    # censoring at 2 with 5 subjects still observed
    np.testing.assert_allclose(cm.hazard_jump([1.0, 2.0, 2.5]), [0.0, 0.2, 0.0])
    assert cm.at_risk(2.0) == 5
    assert cm.pi(2.0) == pytest.approx(5 / 3)
    assert cm.G(2.0) == pytest.approx(0.8)


def _rec(time, cause, ctime=None):
    return SubjectRecord("c", time, cause, CovariatePath.constant([0.0]), ctime=ctime)


def test_ipcw_weight_examples():
    cm = fit_censoring_km(_three_subjects())
    # competing failure at 1, G(1) = 1 -> weight G(2)/G(1)
    assert ipcw_weight(cm, _rec(1.0, 2), 2.0) == pytest.approx(0.5)
    assert ipcw_weight(cm, _rec(3.0, 1), 2.0) == pytest.approx(1.0)
    assert ipcw_weight(cm, _rec(1.0, 0), 2.0) == 0.0


def test_cc_weight_examples():
    assert cc_weight(_rec(1.0, 1, ctime=5.0), 3.0) == 1
    assert cc_weight(_rec(1.0, 1, ctime=2.0), 3.0) == 0
    assert cc_weight(_rec(1.0, 1, ctime=3.0), 3.0) == 0
    with pytest.raises(CensoringTimeUnavailable):
        cc_weight(_rec(1.0, 1), 3.0)


def test_knot_weights_agree_with_subject_weights(tiny_ds):
    cm = fit_censoring_km(tiny_ds)
    grid = build_grid(tiny_ds)
    W = WeightMatrix(tiny_ds, grid, 1, WeightMode.IPCW, cm)
    knot = W.knot(slice(None))
    for i, rec in enumerate(tiny_ds.subjects):
        for a, t in enumerate(grid.knots):
            expected = ipcw_weight(cm, rec, t) * counting_process(rec, 1, t).Y
            assert knot[i, a] == pytest.approx(expected)


def test_interval_weights_agree_with_subject_weights(tiny_ds):
    cm = fit_censoring_km(tiny_ds)
    grid = build_grid(tiny_ds)
    W = WeightMatrix(tiny_ds, grid, 1, WeightMode.IPCW, cm)
    interval = W.interval(slice(None))
    mids = 0.5 * (grid.starts + grid.knots)
    for i, rec in enumerate(tiny_ds.subjects):
        for a, t in enumerate(mids):
            expected = ipcw_weight(cm, rec, t) * counting_process(rec, 1, t).Y
            assert interval[i, a] == pytest.approx(expected)


def test_cc_weights_follow_recorded_censoring(tiny_ds):
    ds = make_dataset(
        tiny_ds.cluster,
        tiny_ds.time,
        tiny_ds.status,
        tiny_ds.X,
        ctime=[9.0, 2.0, 3.5, 9.0, 9.0, 6.0],
    )
    grid = build_grid(ds)
    W = WeightMatrix(ds, grid, 1, WeightMode.CC)
    knot = W.knot(slice(None))
    # competing failure at 3, censored at 3.5: counts at knot 3 only
    np.testing.assert_array_equal(knot[2, grid.knots > 3.0], 0.0)
    assert knot[2, np.searchsorted(grid.knots, 3.0)] == 1.0
    for i, rec in enumerate(ds.subjects):
        for a, t in enumerate(grid.knots):
            expected = cc_weight(rec, t) * counting_process(rec, 1, t).Y
            assert knot[i, a] == expected


def test_cc_weights_need_ctime(tiny_ds):
    with pytest.raises(CensoringTimeUnavailable):
        WeightMatrix(tiny_ds, build_grid(tiny_ds), 1, WeightMode.CC)


def test_failure_tied_with_censoring_at_tau_counts_only_under_ipcw():
    # every subject censored administratively at τ = 3; the last failure is at τ itself
    ds = make_dataset(
        [0, 0, 1, 1, 2, 2],
        [0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        [1, 2, 1, 2, 1, 1],
        [0.3, 1.2, 0.7, 0.1, 0.9, 0.4],
        ctime=np.full(6, 3.0),
    )
    grid = build_grid(ds)
    assert grid.knots[-1] == ds.tau == 3.0
    ipcw = WeightMatrix(ds, grid, 1, WeightMode.IPCW, fit_censoring_km(ds))
    cc = WeightMatrix(ds, grid, 1, WeightMode.CC)

    np.testing.assert_array_equal(cc.knot(slice(None))[:, :-1], ipcw.knot(slice(None))[:, :-1])
    np.testing.assert_array_equal(cc.interval(slice(None)), ipcw.interval(slice(None)))
    np.testing.assert_array_equal(cc.knot(slice(None))[:, -1], 0.0)
    assert ipcw.knot(slice(None))[5, -1] == 1.0
    assert cc_weight(ds.subjects[5], 3.0) == 0

    assert fit(ds, 1, WeightMode.IPCW).aggregates.events[-1] == 1.0
    assert fit(ds, 1, WeightMode.CC).aggregates.events[-1] == 0.0
