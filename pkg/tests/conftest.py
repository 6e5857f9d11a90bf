import numpy as np
import pytest

from ahb.data import Dataset
from ahb.predictor import OracleModel


class Linear:
    """Picklable linear surface ``X @ coef + intercept``."""

    def __init__(self, coef, intercept=0.0):
        self.coef = np.asarray(coef, dtype=float)
        self.intercept = intercept

    def __call__(self, X):
        return np.asarray(X, dtype=float) @ self.coef + self.intercept


class Const:
    def __init__(self, value=0.0):
        self.value = value

    def __call__(self, X):
        return np.full(np.asarray(X).shape[0], float(self.value))


class Step:
    """``height * 1{x_j > cut}``."""

    def __init__(self, j=0, cut=0.5, height=1.0):
        self.j, self.cut, self.height = j, cut, height

    def __call__(self, X):
        return self.height * (np.asarray(X, dtype=float)[:, self.j] > self.cut)


def make_data(X, T, Y=None, kinds=()):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return Dataset(X, np.asarray(T), None if Y is None else np.asarray(Y, dtype=float), kinds=kinds)


def random_instance(rng, n=None, p=None):
    """Small mixed continuous/binary instance with a random linear oracle."""
    n = n or int(rng.integers(4, 16))
    p = p or int(rng.integers(1, 4))
    kinds = tuple(rng.choice(["continuous", "binary"], size=p))
    X = np.empty((n, p))
    for j, kind in enumerate(kinds):
        if kind == "binary":
            X[:, j] = rng.integers(0, 2, n)
        else:
            # coarse values so duplicate coordinates occur
            X[:, j] = np.round(rng.uniform(0, 1, n), int(rng.integers(1, 3)))
    T = rng.integers(0, 2, n)
    T[rng.integers(0, n)] = 0
    model = OracleModel(Linear(rng.normal(size=p)), Linear(rng.normal(size=p), 1.0))
    return make_data(X, T, kinds=kinds), model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One summary line per acceptance criterion, printed at the end of the run.
_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        detail = dict(report.user_properties).get("detail", "")
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in _acceptance:
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict} {name}: {detail}")
