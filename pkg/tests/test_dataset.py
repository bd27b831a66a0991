import io

import numpy as np
import pytest

from crr_core.exceptions import (
    DataError,
    EmptyCluster,
    MissingColumn,
    NonFiniteValue,
    NonPositiveTime,
    TauBeyondFollowUp,
    TooFewClusters,
    UnknownCauseCode,
)
from crr_models.dataset import (
    Basis,
    CovariatePath,
    SubjectRecord,
    build_grid,
    counting_process,
    load_dataset,
    save_dataset,
)

from conftest import make_dataset

SMALL = "cluster,time,status,x\nA,1.0,1,0.5\nA,2.0,0,1.0\nB,3.0,2,0.0\n"


def test_load_small_table():
    ds = load_dataset(io.StringIO(SMALL))
    assert ds.n == 2
    assert ds.N == 3
    assert list(ds.cluster_sizes) == [2, 1]
    assert ds.K == 2
    assert ds.names == ("x",)
    assert ds.basis == (Basis.CONST,)
    assert ds.tau == 3.0
    assert ds.cluster_labels == ("A", "B")
    assert not ds.censoring_observed


def test_basis_from_header_and_schema():
    text = "cluster,time,status,x@exp-decay,z\n1,1,1,0.2,1\n2,2,0,0.4,0\n"
    ds = load_dataset(io.StringIO(text))
    assert ds.names == ("x", "z")
    assert ds.basis == (Basis.EXP_DECAY, Basis.CONST)

    ds = load_dataset(io.StringIO(text), {"covariates": ["z"], "basis": {"z": "exp-decay"}})
    assert ds.names == ("z",)
    assert ds.basis == (Basis.EXP_DECAY,)


def test_custom_cluster_column():
    text = SMALL.replace("cluster", "hospital")
    ds = load_dataset(io.StringIO(text), {"cluster": "hospital"})
    assert ds.n == 2


@pytest.mark.parametrize(
    "text, error",
    [
        ("cluster,time,status,x\nA,-1,1,0\nB,2,1,1\n", NonPositiveTime),
        ("cluster,time,status,x\nA,0,1,0\nB,2,1,1\n", NonPositiveTime),
        ("cluster,time,x\nA,1,0\nB,2,1\n", MissingColumn),
        ("cluster,time,status\nA,1,1\nB,2,1\n", MissingColumn),
        ("cluster,time,status,x\nA,1,1,0\n,2,1,1\n", EmptyCluster),
        ("cluster,time,status,x\nA,1,1,nan\nB,2,1,1\n", NonFiniteValue),
        ("cluster,time,status,x\nA,1,1.5,0\nB,2,1,1\n", UnknownCauseCode),
        ("cluster,time,status,x\nA,1,1,0\nA,2,1,1\n", TooFewClusters),
        ("cluster,time,status,x,ctime\nA,2,1,0,1\nB,2,1,1,3\n", DataError),
    ],
)
def test_rejects_bad_input(text, error):
    with pytest.raises(error):
        load_dataset(io.StringIO(text))


def test_status_above_declared_k():
    text = "cluster,time,status,x\nA,1,3,0\nB,2,1,1\n"
    with pytest.raises(UnknownCauseCode):
        load_dataset(io.StringIO(text), K=2)


def test_tau_beyond_follow_up():
    with pytest.raises(TauBeyondFollowUp):
        load_dataset(io.StringIO(SMALL), tau=10.0)


def test_save_then_load_keeps_everything(tmp_path):
    rng = np.random.default_rng(0)
    ds = make_dataset(
        cluster=np.repeat(np.arange(4), 3),
        time=rng.uniform(0.1, 3.0, 12),
        status=rng.integers(0, 3, 12),
        X=rng.normal(size=(12, 2)),
        basis=(Basis.CONST, Basis.EXP_DECAY),
        names=("age", "dose"),
        ctime=np.full(12, 5.0),
        tau=0.9,
    )
    path = tmp_path / "data.csv"
    save_dataset(ds, path, manifest={"command": "test"})
    back = load_dataset(path)

    assert path.read_text().startswith("# tau: ")
    assert back.tau == ds.tau
    assert back.K == ds.K
    assert back.names == ds.names
    assert back.basis == ds.basis
    assert back.cluster_labels == ds.cluster_labels
    np.testing.assert_array_equal(back.cluster, ds.cluster)
    np.testing.assert_array_equal(back.time, ds.time)
    np.testing.assert_array_equal(back.status, ds.status)
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.ctime, ds.ctime)


def test_truth_columns_are_not_covariates():
    ds = make_dataset([0, 1], [1.0, 2.0], [1, 2], [0.1, 0.2])
    buf = io.StringIO()
    save_dataset(ds, buf, truth={"true_time": np.array([1.0, 2.5]), "frailty": np.zeros(2)})
    back = load_dataset(io.StringIO(buf.getvalue()))
    assert back.names == ("x1",)


def test_arrays_are_read_only(tiny_ds):
    with pytest.raises(ValueError):
        tiny_ds.time[0] = 10.0


def test_take_clusters_repeats_become_distinct(tiny_ds):
    boot = tiny_ds.take_clusters([0, 0, 2])
    assert boot.n == 3
    assert boot.N == 6
    assert len(set(boot.cluster_labels)) == 3
    np.testing.assert_array_equal(boot.time, [1.0, 2.0, 1.0, 2.0, 5.0, 6.0])


def test_by_individual(tiny_ds):
    flat = tiny_ds.by_individual()
    assert flat.n == flat.N == 6
    assert list(flat.cluster_sizes) == [1] * 6


def test_grid_knots_and_constant_quadrature():
    ds = make_dataset([0, 0, 1, 1], [2.0, 1.0, 2.0, 5.0], [1, 1, 0, 1], [0, 1, 0, 1], tau=4.0)
    grid = build_grid(ds, Q=8)
    np.testing.assert_array_equal(grid.knots, [1.0, 2.0, 4.0])
    assert grid.Q == 1
    np.testing.assert_allclose(grid.I1[:, 0], [1.0, 1.0, 2.0])
    assert grid.locate(0.5) == 0
    assert grid.locate(2.0) == 1
    assert grid.locate(3.0) == 2


def test_grid_adds_recorded_censoring_times():
    ds = make_dataset(
        [0, 0, 1, 1], [1.0, 2.0, 3.0, 4.0], [1, 1, 1, 1], [0, 1, 0, 1], ctime=[1.5, 9, 9, 9]
    )
    np.testing.assert_array_equal(build_grid(ds).knots, [1.0, 1.5, 2.0, 3.0, 4.0])


def test_time_varying_quadrature():
    ds = make_dataset(
        [0, 0, 1, 1], [1.0, 2.0, 3.0, 4.0], [1, 1, 1, 1], [0, 1, 0, 1], basis=(Basis.EXP_DECAY,)
    )
    grid = build_grid(ds, Q=4)
    assert grid.Q == 4
    assert grid.I1[0, 0] == pytest.approx(1 - np.exp(-1.0), abs=0.01)
    assert grid.I2[0, 0, 0] == pytest.approx((1 - np.exp(-2.0)) / 2, abs=0.02)
    np.testing.assert_allclose(grid.BK[:, 0], np.exp(-grid.knots))


def test_grid_rejects_bad_quadrature(tiny_ds):
    with pytest.raises(ValueError):
        build_grid(tiny_ds, Q=0)


def test_covariate_path():
    X = CovariatePath(np.array([2.0]), (Basis.EXP_DECAY,))
    assert X.at(0.0)[0] == pytest.approx(2.0)
    assert X.at(1.0)[0] == pytest.approx(2.0 * np.exp(-1.0))
    with pytest.raises(ValueError):
        CovariatePath(np.array([1.0, 2.0]), (Basis.CONST,))


def _record(time, cause):
    return SubjectRecord("c", time, cause, CovariatePath.constant([0.0]))


@pytest.mark.parametrize(
    "time, cause, k, t, N, Y",
    [
        (3.0, 1, 1, 2.0, 0, 1),
        (3.0, 1, 1, 3.0, 1, 1),
        (3.0, 1, 1, 4.0, 1, 0),
        (2.0, 2, 1, 5.0, 0, 1),
        (2.0, 0, 1, 5.0, 0, 1),
    ],
)
def test_counting_process(time, cause, k, t, N, Y):
    state = counting_process(_record(time, cause), k, t)
    assert (state.N, state.Y) == (N, Y)


def test_subdistribution_risk_set_shrinks(tiny_ds):
    totals = [
        sum(counting_process(r, 1, t).Y for r in tiny_ds.subjects) for t in np.linspace(0, 7, 29)
    ]
    assert all(b <= a for a, b in zip(totals, totals[1:]))
