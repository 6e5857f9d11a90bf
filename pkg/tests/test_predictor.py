import numpy as np
import pytest

from ahb.data import Dataset
from ahb.errors import MethodUnavailableError, ParseError, ValidationError
from ahb.predictor import EnsembleConfig, ExternalModel, OracleModel, fit_builtin, unit_predictions

from conftest import Linear


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(300, 3))
    T = rng.integers(0, 2, 300)
    Y = X[:, 0] * 2 + T + rng.normal(0, 0.1, 300)
    return Dataset(X, T, Y), fit_builtin(Dataset(X, T, Y), EnsembleConfig(n_trees=30, seed=1))


def test_builtin_matches_sklearn_exactly(fitted):
    data, model = fitted
    Xq = np.random.default_rng(5).uniform(-0.5, 1.5, size=(500, 3))
    for t in (0, 1):
        forest = model.forests[t]
        per_tree = np.stack([e.predict(Xq.astype(np.float32)) for e in forest.estimators_])
        assert np.array_equal(model.ensemble_predict(Xq, t), per_tree)
        assert np.allclose(model.predict(Xq, t), forest.predict(Xq), rtol=0, atol=1e-12)


def test_builtin_learns_effect(fitted):
    data, model = fitted
    f0, f1 = unit_predictions(model, data)
    assert abs(np.mean(f1 - f0) - 1) < 0.2
    assert model.has_ensemble and model.evaluable


def test_builtin_single_point(fitted):
    _, model = fitted
    x = np.array([0.3, 0.3, 0.3])
    assert isinstance(model.predict(x, 0), float)
    assert model.ensemble_predict(x, 1).shape == (30,)


def test_builtin_is_seeded():
    rng = np.random.default_rng(1)
    d = Dataset(rng.uniform(size=(60, 2)), [0, 1] * 30, rng.normal(size=60))
    a = fit_builtin(d, EnsembleConfig(n_trees=5, seed=7))
    b = fit_builtin(d, EnsembleConfig(n_trees=5, seed=7))
    assert np.array_equal(a.predict(d.X, 0), b.predict(d.X, 0))


def test_builtin_needs_both_arms():
    d = Dataset(np.zeros((4, 1)), [0, 0, 0, 1], np.zeros(4))
    with pytest.raises(ValidationError):
        fit_builtin(d)


def test_oracle():
    m = OracleModel(Linear([1.0, 0.0]), Linear([0.0, 2.0]))
    X = np.array([[1.0, 1.0], [2.0, 3.0]])
    assert m.predict(X, 0).tolist() == [1.0, 2.0]
    assert m.predict(X, 1).tolist() == [3.0, 8.0]
    with pytest.raises(MethodUnavailableError):
        m.ensemble_predict(X, 0)


def test_external(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("id,f0,f1,f0_draw_1,f1_draw_1,f0_draw_2,f1_draw_2\na,1,2,1.1,2.1,0.9,1.9\nb,3,4,3,4,3,4\n")
    m = ExternalModel.from_csv(path)
    d = Dataset(np.zeros((2, 1)), [0, 1], unit_ids=("b", "a"))
    assert m.predict_units(d, 1).tolist() == [4.0, 2.0]
    assert m.ensemble_predict_units(d, 0).tolist() == [[3.0, 1.1], [3.0, 0.9]]
    assert m.predict_id("a", 0) == 1.0
    assert not m.evaluable
    with pytest.raises(MethodUnavailableError):
        m.predict(d.X, 0)
    with pytest.raises(KeyError):
        m.predict_units(Dataset(np.zeros((1, 1)), [0], unit_ids=("zz",)), 0)


def test_external_bad_files(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("id,f0\na,1\n")
    with pytest.raises(ParseError):
        ExternalModel.from_csv(p)
    p.write_text("id,f0,f1\na,1,x\n")
    with pytest.raises(ParseError):
        ExternalModel.from_csv(p)
