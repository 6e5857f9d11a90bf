"""Outcome models supplying the surrogate response surfaces f0 and f1.

Three implementations share one small interface:

* :class:`BaggedTrees` -- the built-in bagged regression-tree ensemble, one
  forest per treatment arm.
* :class:`OracleModel` -- exact response surfaces, for simulations.
* :class:`ExternalModel` -- predictions read from a CSV produced elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.ensemble import RandomForestRegressor

from ahb.errors import MethodUnavailableError, ParseError, ValidationError


class OutcomeModel:
    """Base interface. Subclasses override :meth:`predict` and friends."""

    #: ``"point"`` is always present; ``"ensemble"`` iff member draws exist;
    #: ``"evaluable"`` iff the model can be queried at arbitrary covariates.
    capabilities = frozenset({"point", "evaluable"})

    @property
    def has_ensemble(self):
        return "ensemble" in self.capabilities

    @property
    def evaluable(self):
        return "evaluable" in self.capabilities

    def predict(self, X, t):
        raise NotImplementedError

    def ensemble_predict(self, X, t):
        raise MethodUnavailableError(f"{type(self).__name__} has no ensemble draws")

    def predict_units(self, data, t):
        """Point predictions of ``f_t`` for every row of ``data``."""
        return np.asarray(self.predict(data.X, t), dtype=float)

    def ensemble_predict_units(self, data, t):
        """Member predictions, shape ``(B, data.n)``."""
        return np.asarray(self.ensemble_predict(data.X, t), dtype=float)


def _as_matrix(X):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    return (X.reshape(1, -1) if single else X), single


class _StackedTrees:
    """All trees of one fitted forest laid out as padded complete binary trees.

    Evaluating many small batches through sklearn's ``predict`` is dominated
    by per-call overhead; walking stacked arrays in numpy is far cheaper and
    reproduces the forest's routing exactly (float32 feature compare). A leaf
    above the bottom level routes left forever (threshold ``+inf``), so every
    walk takes exactly ``depth`` steps.
    """

    def __init__(self, estimators):
        depth = max(1, max(est.tree_.max_depth for est in estimators))
        width = 1 << depth
        B = len(estimators)
        feature = np.zeros((B, width), dtype=np.int64)
        threshold = np.full((B, width), np.inf)
        value = np.zeros((B, width))
        for t, est in enumerate(estimators):
            tree = est.tree_
            left, right = tree.children_left, tree.children_right
            vals = tree.value[:, 0, 0]
            stack = [(0, 1, 0)]
            while stack:
                node, pos, d = stack.pop()
                if left[node] == -1:
                    value[t, (pos << (depth - d)) - width] = vals[node]
                    continue
                feature[t, pos] = tree.feature[node]
                threshold[t, pos] = tree.threshold[node]
                stack.append((left[node], 2 * pos, d + 1))
                stack.append((right[node], 2 * pos + 1, d + 1))
        self.depth = depth
        self.width = width
        self.feature = feature.ravel()
        self.threshold = threshold.ravel()
        self.value = value.ravel()
        self.offsets = (np.arange(B, dtype=np.int64) * width)[:, None]

    def members(self, X):
        X32 = np.asarray(X, dtype=np.float32).astype(np.float64)
        m, p = X32.shape
        flatX = X32.ravel()
        base = (np.arange(m, dtype=np.int64) * p)[None, :]
        pos = np.ones((self.offsets.shape[0], m), dtype=np.int64)
        for _ in range(self.depth):
            flat = pos + self.offsets
            xv = flatX[base + self.feature[flat]]
            pos = 2 * pos + (xv > self.threshold[flat])
        return self.value[pos - self.width + self.offsets]


@dataclass(frozen=True)
class EnsembleConfig:
    n_trees: int = 100
    max_depth: int = 6
    min_leaf: int = 5
    seed: int = 0


class BaggedTrees(OutcomeModel):
    """Two bagged regression-tree forests, one per treatment arm."""

    capabilities = frozenset({"point", "ensemble", "evaluable"})

    def __init__(self, forests, config):
        self.forests = forests
        self.config = config
        self._stacked = {t: _StackedTrees(f.estimators_) for t, f in forests.items()}

    def ensemble_predict(self, X, t):
        X, single = _as_matrix(X)
        draws = self._stacked[int(t)].members(X)
        return draws[:, 0] if single else draws

    def predict(self, X, t):
        X, single = _as_matrix(X)
        out = self._stacked[int(t)].members(X).mean(axis=0)
        return float(out[0]) if single else out


def fit_builtin(train, config=None):
    """Fit one bagged forest on treated and one on control training units.

    Args:
        train: a :class:`~ahb.data.Dataset` with outcomes.
        config: :class:`EnsembleConfig`; defaults to 100 trees, depth 6,
            min leaf 5.
    """
    config = config or EnsembleConfig()
    if train.Y is None:
        raise ValidationError("training data has no outcomes")
    forests = {}
    for t in (0, 1):
        rows = train.T == t
        if rows.sum() < 2:
            raise ValidationError(f"arm t={t} has {int(rows.sum())} training units; need at least 2")
        forest = RandomForestRegressor(
            n_estimators=config.n_trees,
            max_depth=config.max_depth,
            min_samples_leaf=config.min_leaf,
            max_features=1.0,
            bootstrap=True,
            random_state=config.seed + t,
        )
        forest.fit(train.X[rows], train.Y[rows])
        forests[t] = forest
    return BaggedTrees(forests, config)


class OracleModel(OutcomeModel):
    """Exact surfaces: ``f0 = g`` and ``f1 = g + h``.

    ``g`` and ``h`` take an ``(m, p)`` array and return ``m`` values. They must
    be picklable (module-level callables) for multi-process solving.
    """

    def __init__(self, g, h):
        self.g = g
        self.h = h

    def predict(self, X, t):
        X, single = _as_matrix(X)
        out = np.asarray(self.g(X), dtype=float)
        if int(t) == 1:
            out = out + np.asarray(self.h(X), dtype=float)
        return float(out[0]) if single else out


class ExternalModel(OutcomeModel):
    """Predictions supplied per unit id (e.g. from BART run elsewhere).

    The CSV has columns ``id, f0, f1`` and optionally ``f0_draw_1..B`` and
    ``f1_draw_1..B``. Only listed unit ids can be queried.
    """

    def __init__(self, ids, f0, f1, draws0=None, draws1=None):
        self.index = {str(u): i for i, u in enumerate(ids)}
        self.f = {0: np.asarray(f0, dtype=float), 1: np.asarray(f1, dtype=float)}
        self.draws = None
        if draws0 is not None:
            self.draws = {0: np.asarray(draws0, dtype=float), 1: np.asarray(draws1, dtype=float)}
            self.capabilities = frozenset({"point", "ensemble"})
        else:
            self.capabilities = frozenset({"point"})

    @classmethod
    def from_csv(cls, path):
        try:
            frame = pd.read_csv(path, dtype={"id": str})
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise ParseError(f"cannot parse predictions file {path}: {exc}") from exc
        for col in ("id", "f0", "f1"):
            if col not in frame.columns:
                raise ParseError(f"predictions file {path} lacks column {col!r}")
        if frame["id"].duplicated().any():
            raise ParseError(f"predictions file {path} repeats unit ids")
        d0 = sorted((c for c in frame.columns if c.startswith("f0_draw_")), key=lambda c: int(c.rsplit("_", 1)[1]))
        d1 = sorted((c for c in frame.columns if c.startswith("f1_draw_")), key=lambda c: int(c.rsplit("_", 1)[1]))
        if len(d0) != len(d1):
            raise ParseError(f"predictions file {path} has {len(d0)} f0 draws but {len(d1)} f1 draws")
        try:
            f0 = frame["f0"].to_numpy(dtype=float)
            f1 = frame["f1"].to_numpy(dtype=float)
            draws0 = frame[d0].to_numpy(dtype=float).T if d0 else None
            draws1 = frame[d1].to_numpy(dtype=float).T if d1 else None
        except ValueError as exc:
            raise ParseError(f"non-numeric prediction in {path}: {exc}") from exc
        return cls(frame["id"].tolist(), f0, f1, draws0, draws1)

    def _rows(self, ids):
        try:
            return np.array([self.index[str(u)] for u in ids], dtype=int)
        except KeyError as exc:
            raise KeyError(f"unit id {exc.args[0]!r} not in predictions file") from None

    def predict_id(self, unit_id, t):
        return float(self.f[int(t)][self._rows([unit_id])[0]])

    def predict(self, X, t):
        raise MethodUnavailableError("external predictions can only be looked up by unit id")

    def predict_units(self, data, t):
        return self.f[int(t)][self._rows(data.unit_ids)]

    def ensemble_predict_units(self, data, t):
        if self.draws is None:
            return super().ensemble_predict(data.X, t)
        return self.draws[int(t)][:, self._rows(data.unit_ids)]


def unit_predictions(model, data):
    """``(f0, f1)`` arrays of point predictions for every row of ``data``."""
    return model.predict_units(data, 0), model.predict_units(data, 1)
