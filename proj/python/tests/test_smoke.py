import os
from pathlib import Path

import numpy as np
import pytest

import warmopf

DATA = Path(os.environ.get("WARMOPF_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


@pytest.fixture(scope="module")
def case9():
    return warmopf.load_case(DATA / "case9.m")


def test_case_shape(case9):
    assert case9.num_buses == 9
    assert case9.num_gens == 3
    assert len(warmopf.feature_names(case9)) == 18
    assert warmopf.target_names(case9)[:2] == ["vm@1", "vm@2"]


def test_solve_reference_objective(case9):
    flat = warmopf.solve(case9)
    assert flat["status"] == "Converged"
    assert flat["objective"] == pytest.approx(5296.686203991808, rel=1e-4)
    dc = warmopf.solve(case9, start="dc", profile="fragile")
    assert dc["status"] == "Converged"
    assert len(dc["violation_trace"]) == dc["iterations"] + 1


def test_learned_start_from_optimum(case9):
    flat = warmopf.solve(case9)
    learned = warmopf.solve(case9, start="learned", prediction=flat["vm"] + flat["pg"])
    assert learned["status"] == "Converged"
    assert learned["iterations"] <= flat["iterations"]


def test_pipeline(case9, tmp_path):
    ds = warmopf.generate(case9, 30, seed=5)
    warmopf.split(ds, 0.8, seed=5)
    assert len(ds) == 30 and len(ds.train) == 24 and len(ds.test) == 6
    assert ds.X.shape == (30, 18) and ds.T.shape == (30, 12)
    assert max(warmopf.row_mismatch(case9, ds, 0)) < 1e-6

    warmopf.save_dataset(ds, tmp_path / "ds")
    again = warmopf.load_dataset(tmp_path / "ds")
    assert again.hash == ds.hash
    np.testing.assert_array_equal(again.X, ds.X)

    model = warmopf.fit_forest_on(ds, warmopf.Hyperparams(n_estimators=20, seed=3))
    assert model.n_trees == 20
    pred = model.predict(ds.X[ds.test])
    err = warmopf.relative_error(pred, ds.T[ds.test], case9.num_buses)
    assert err["voltage_mean"] < 0.01

    model.save(tmp_path / "model.json")
    loaded = warmopf.load_model(tmp_path / "model.json")
    np.testing.assert_array_equal(loaded.predict(ds.X), model.predict(ds.X))
    assert warmopf.predict_start(loaded, case9)["status"] == "Converged"


def test_forest_overfit_and_determinism():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(50, 3))
    T = X @ rng.uniform(size=(3, 2))
    p = warmopf.Hyperparams(n_estimators=1, bootstrap=False)
    np.testing.assert_array_equal(warmopf.fit_forest(X, T, p).predict(X), T)
    q = warmopf.Hyperparams(n_estimators=10, seed=4)
    a = warmopf.fit_forest(X, T, q, threads=1).predict(X)
    b = warmopf.fit_forest(X, T, q, threads=3).predict(X)
    np.testing.assert_array_equal(a, b)
    assert np.min(warmopf.r2_per_target(T, a)) > 0.8


def test_errors_carry_a_code(case9):
    with pytest.raises(warmopf.WarmopfError) as info:
        warmopf.parse_case("mpc.baseMVA = 100;\n")
    assert info.value.code == "MissingBlock"
    with pytest.raises(warmopf.WarmopfError) as info:
        warmopf.solve(case9, start="learned", prediction=[1.0])
    assert info.value.code == "SchemaMismatch"
    with pytest.raises(ValueError):
        warmopf.solve(case9, start="warm")
