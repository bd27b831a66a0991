import numpy as np
import pytest

from crr_core.exceptions import ConfigError, DegenerateCovariate
from crr_models.fitter import fit
from crr_models.gof import (
    ALL,
    FChoice,
    ProcessKind,
    additivity_test,
    check_draws,
    cluster_influence,
    export_test_process,
    form_influence,
    functional_form_test,
    monte_carlo_pvalue,
    perturb,
    run_gof,
    score_influence,
    thresholds,
    weighted_residual_process,
)
from crr_models.simgen import CovariateDesign, SimConfig, generate


@pytest.fixture(scope="module")
def sim_fit(sim_ds):
    return fit(sim_ds, 1)


@pytest.fixture(scope="module")
def two_covariate_fit():
    config = SimConfig(
        n_clusters=40,
        cluster_size=5,
        rho=0.66,
        beta1=(0.6, 1.0),
        beta2=(0.5, 1.0),
        covariates=CovariateDesign.NORMAL_BERNOULLI,
        seed=2,
    )
    return fit(generate(config).dataset, 1)


@pytest.mark.parametrize("f_choice", list(FChoice))
@pytest.mark.parametrize("t_share", [0.3, 1.0])
def test_influence_sums_to_the_observed_process(two_covariate_fit, f_choice, t_share):
    res = two_covariate_fit
    t = t_share * res.ds.tau
    x = np.array([0.2, np.inf])
    Q = cluster_influence(res, t, x, f_choice)
    W = weighted_residual_process(res, t, x, f_choice)
    assert Q.shape == (res.ds.n, W.size)
    np.testing.assert_allclose(Q.sum(axis=0), W, atol=1e-9)


def test_influence_vanishes_below_every_covariate(sim_fit):
    Q = cluster_influence(sim_fit, sim_fit.ds.tau, -np.inf, FChoice.COVARIATE)
    np.testing.assert_array_equal(Q, 0.0)


def test_process_with_unit_f_at_tau_is_the_residual_total(sim_fit):
    W = weighted_residual_process(sim_fit, sim_fit.ds.tau, np.inf, FChoice.ONE)
    assert W[0] == pytest.approx(sim_fit.increments.resid.sum(), abs=1e-9)


def test_score_influence_matches_general_form(sim_fit):
    Q, U, eta = score_influence(sim_fit)
    for a in (0, sim_fit.grid.size // 2, sim_fit.grid.size - 1):
        t = sim_fit.grid.knots[a]
        general = cluster_influence(sim_fit, t, np.inf, FChoice.COVARIATE)
        np.testing.assert_allclose(Q[:, a, :], general, atol=1e-9)
    np.testing.assert_allclose(U[-1], 0.0, atol=1e-9)
    np.testing.assert_allclose(Q[:, -1, :], 0.0, atol=1e-9)


def test_form_influence_matches_general_form(two_covariate_fit):
    res = two_covariate_fit
    thr, Q, W = form_influence(res, 0)
    for j in (0, thr.size // 2, thr.size - 1):
        x = np.array([thr[j], np.inf])
        general = cluster_influence(res, res.ds.tau, x, FChoice.ONE)
        np.testing.assert_allclose(Q[:, j], general[:, 0], atol=1e-9)
    np.testing.assert_allclose(Q.sum(axis=0), W, atol=1e-9)


def test_perturb_with_fixed_multipliers():
    Q = np.arange(12.0).reshape(3, 2, 2)
    np.testing.assert_array_equal(perturb(Q, 1, multipliers=np.zeros((1, 3))), 0.0)
    np.testing.assert_array_equal(perturb(Q, 1, multipliers=[[1.0, 0.0, 0.0]])[0], Q[0])
    np.testing.assert_array_equal(perturb(Q, 1, multipliers=[[1.0, 1.0, 1.0]])[0], Q.sum(axis=0))


def test_perturbed_variance_matches_influence_outer_product():
    rng = np.random.default_rng(1)
    Q = rng.normal(size=(20, 1))
    draws = perturb(Q, 100_000, seed=4)
    assert draws.var() == pytest.approx(float(np.sum(Q**2)), rel=0.03)


def test_perturb_is_seeded():
    Q = np.ones((5, 3))
    np.testing.assert_array_equal(perturb(Q, 300, seed=9), perturb(Q, 300, seed=9))
    assert not np.array_equal(perturb(Q, 10, seed=9), perturb(Q, 10, seed=10))


def test_monte_carlo_pvalue():
    draws = np.array([1.0, 2.0, 3.0])
    assert monte_carlo_pvalue(2.0, draws) == pytest.approx(1 / 3)
    assert monte_carlo_pvalue(2.0, draws, add_one=True) == pytest.approx(0.5)
    assert monte_carlo_pvalue(0.0, draws) == 1.0
    assert monte_carlo_pvalue(5.0, draws) == 0.0


def test_too_few_draws():
    with pytest.raises(ConfigError):
        check_draws(99)
    check_draws(100)


def test_additivity_needs_enough_draws(sim_fit):
    with pytest.raises(ConfigError):
        additivity_test(sim_fit, ALL, B=50)


def test_additivity_entry(sim_fit):
    entry = additivity_test(sim_fit, "x", B=200, seed=1, keep_draws=10)
    assert entry.test is ProcessKind.SCORE_ADDITIVITY
    assert entry.statistic > 0
    assert 0.0 <= entry.p_value <= 1.0
    tp = entry.process
    assert tp.axis[0] == 0.0 and tp.observed[0] == 0.0
    assert tp.perturbed.shape == (10, tp.axis.size)
    # U(β̂, τ) = 0 at the estimate
    assert tp.observed[-1] == pytest.approx(0.0, abs=1e-9)
    again = additivity_test(sim_fit, 0, B=200, seed=1, keep_draws=10)
    assert again.p_value == entry.p_value


def test_functional_form_entry(two_covariate_fit):
    entry = functional_form_test(two_covariate_fit, "x1", B=200, seed=3, keep_draws=5)
    assert entry.test is ProcessKind.FUNCTIONAL_FORM
    assert 0.0 <= entry.p_value <= 1.0
    tp = entry.process
    assert tp.observed[0] == 0.0
    assert np.all(np.diff(tp.axis) > 0)
    assert tp.perturbed.shape == (5, tp.axis.size)


def test_thresholds():
    np.testing.assert_array_equal(thresholds(np.array([3.0, 1.0, 3.0, 2.0])), [1.0, 2.0, 3.0])
    assert thresholds(np.arange(1000.0), cap=10).size == 10
    with pytest.raises(DegenerateCovariate):
        thresholds(np.ones(5))


def test_export_columns(sim_fit):
    entry = additivity_test(sim_fit, "x", B=100, seed=0, keep_draws=3)
    frame = export_test_process(entry.process, 3)
    assert list(frame.columns) == ["axis", "observed", "draw_1", "draw_2", "draw_3"]
    assert (frame.iloc[0, 1:] == 0.0).all()
    assert frame["axis"].is_monotonic_increasing
    assert list(export_test_process(entry.process, 0).columns) == ["axis", "observed"]


def test_run_gof_report(two_covariate_fit):
    report = run_gof(two_covariate_fit, B=100, seed=5, keep_draws=0)
    frame = report.to_frame()
    assert list(frame.columns) == ["test", "covariate", "statistic", "p_value"]
    # additivity for x1, x2, all; functional form for x1 and the binary x2
    assert len(frame) == 5
    assert frame["p_value"].between(0.0, 1.0).all()
    overall = report.get(ProcessKind.SCORE_ADDITIVITY, ALL)
    assert overall.process is None
    with pytest.raises(KeyError):
        report.get(ProcessKind.FUNCTIONAL_FORM, ALL)


def test_run_gof_single_covariate(two_covariate_fit):
    report = run_gof(two_covariate_fit, functional_form=False, covariates=["x2"], B=100)
    assert [e.covariate for e in report.entries] == ["x2"]
