"""Dataset container, CSV ingestion, categorical binarization and splitting."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ahb.errors import ConfigError, ParseError, SchemaError, ValidationError

CONTINUOUS = "continuous"
BINARY = "binary"


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariates, treatment indicators and (optionally) outcomes.

    Attributes:
        X: ``(n, p)`` float covariate matrix.
        T: length-``n`` integer treatment indicators in {0, 1}.
        Y: length-``n`` observed outcomes, or ``None`` for match-only sets.
        columns: covariate names.
        kinds: per-column ``"continuous"`` or ``"binary"``.
        unit_ids: unique string identifiers, one per row.
        provenance: for indicator columns produced by binarization, maps the
            column name to ``(source_column, level)``.
    """

    X: np.ndarray
    T: np.ndarray
    Y: np.ndarray | None = None
    columns: tuple = ()
    kinds: tuple = ()
    unit_ids: tuple = ()
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValidationError("X must be a 2-D matrix")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValidationError(f"dataset needs n >= 1 and p >= 1, got n={n}, p={p}")
        if not np.all(np.isfinite(X)):
            raise ValidationError("X contains missing or non-finite entries")

        T = np.asarray(self.T)
        if T.shape != (n,):
            raise ValidationError(f"T has shape {T.shape}, expected ({n},)")
        if not np.all((T == 0) | (T == 1)):
            bad = int(np.flatnonzero((T != 0) & (T != 1))[0])
            raise ValidationError(f"treatment must be 0/1; row {bad} has {T[bad]!r}")
        T = T.astype(np.int8)

        Y = self.Y
        if Y is not None:
            Y = np.asarray(Y, dtype=float)
            if Y.shape != (n,):
                raise ValidationError(f"Y has shape {Y.shape}, expected ({n},)")
            if not np.all(np.isfinite(Y)):
                raise ValidationError("Y contains missing or non-finite entries")

        columns = tuple(self.columns) or tuple(f"x{j}" for j in range(p))
        if len(columns) != p:
            raise ValidationError(f"{len(columns)} column names for {p} covariates")
        if self.kinds:
            kinds = tuple(self.kinds)
        else:
            kinds = tuple(
                BINARY if np.all((X[:, j] == 0) | (X[:, j] == 1)) else CONTINUOUS
                for j in range(p)
            )
        if len(kinds) != p or any(k not in (CONTINUOUS, BINARY) for k in kinds):
            raise ValidationError(f"invalid column kinds {kinds!r}")
        for j, kind in enumerate(kinds):
            if kind == BINARY and not np.all((X[:, j] == 0) | (X[:, j] == 1)):
                raise ValidationError(f"column {columns[j]!r} is tagged binary but has non-0/1 values")

        unit_ids = tuple(str(u) for u in self.unit_ids) or tuple(str(i) for i in range(n))
        if len(unit_ids) != n:
            raise ValidationError(f"{len(unit_ids)} unit ids for {n} rows")
        if len(set(unit_ids)) != n:
            raise ValidationError("unit ids are not unique")

        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "T", _frozen(T))
        object.__setattr__(self, "Y", None if Y is None else _frozen(Y))
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "unit_ids", unit_ids)
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def has_outcomes(self):
        return self.Y is not None

    def index_of(self, unit_id):
        try:
            return self._id_index[str(unit_id)]
        except KeyError:
            raise KeyError(f"unknown unit id {unit_id!r}") from None

    @property
    def _id_index(self):
        cache = self.__dict__.get("_id_cache")
        if cache is None:
            cache = {u: i for i, u in enumerate(self.unit_ids)}
            object.__setattr__(self, "_id_cache", cache)
        return cache

    def subset(self, rows):
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            X=self.X[rows],
            T=self.T[rows],
            Y=None if self.Y is None else self.Y[rows],
            columns=self.columns,
            kinds=self.kinds,
            unit_ids=tuple(self.unit_ids[i] for i in rows),
            provenance=self.provenance,
        )

    def without_outcomes(self):
        return Dataset(self.X, self.T, None, self.columns, self.kinds, self.unit_ids, self.provenance)

    def to_frame(self):
        frame = pd.DataFrame(self.X, columns=list(self.columns))
        frame.insert(0, "id", list(self.unit_ids))
        frame["t"] = self.T.astype(int)
        if self.Y is not None:
            frame["y"] = self.Y
        return frame


@dataclass(frozen=True)
class Schema:
    """Column roles for CSV ingestion.

    ``covariates`` may be empty, in which case every column not claimed by
    another role is a covariate. ``categorical`` maps a column to its ordered
    level list; the first level is the reference (all-zero indicators).
    """

    treatment: str
    outcome: str | None = None
    covariates: tuple = ()
    id_column: str | None = None
    outcome_optional: bool = False
    binary: tuple = ()
    categorical: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        known = {"treatment", "outcome", "covariates", "id_column", "outcome_optional", "binary", "categorical"}
        extra = set(d) - known
        if extra:
            raise SchemaError(f"unknown schema keys: {sorted(extra)}")
        if "treatment" not in d:
            raise SchemaError("schema must name a treatment column")
        return cls(
            treatment=d["treatment"],
            outcome=d.get("outcome"),
            covariates=tuple(d.get("covariates", ())),
            id_column=d.get("id_column"),
            outcome_optional=bool(d.get("outcome_optional", False)),
            binary=tuple(d.get("binary", ())),
            categorical={k: list(v) for k, v in d.get("categorical", {}).items()},
        )

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {
            "treatment": self.treatment,
            "outcome": self.outcome,
            "covariates": list(self.covariates),
            "id_column": self.id_column,
            "outcome_optional": self.outcome_optional,
            "binary": list(self.binary),
            "categorical": {k: list(v) for k, v in self.categorical.items()},
        }


def _to_float(series, name, row_offset=2):
    # row numbers are reported 1-based counting the header as row 1
    values = np.empty(len(series))
    for r, cell in enumerate(series):
        try:
            values[r] = float(cell)
        except (TypeError, ValueError):
            raise ParseError(f"non-numeric value {cell!r} in column {name!r}, row {r + row_offset}") from None
        if not np.isfinite(values[r]):
            raise ParseError(f"missing value in column {name!r}, row {r + row_offset}")
    return values


def binarize_categoricals(raw, levels, *, treatment, outcome=None, covariates=None, id_column=None, binary=()):
    """Build a :class:`Dataset` from a string-valued table.

    Each column in ``levels`` with ``k`` declared levels becomes ``k - 1``
    indicator columns named ``<col>=<level>``; the first declared level is the
    reference. Other covariates are parsed as numbers.
    """
    if covariates is None:
        claimed = {treatment, outcome, id_column}
        covariates = [c for c in raw.columns if c not in claimed]
    columns, blocks, kinds, provenance = [], [], [], {}
    for col in covariates:
        if col not in raw.columns:
            raise SchemaError(f"missing covariate column {col!r}")
        if col in levels:
            declared = [str(v) for v in levels[col]]
            if len(declared) < 2 or len(set(declared)) != len(declared):
                raise SchemaError(f"categorical column {col!r} needs >= 2 distinct levels")
            cells = raw[col].astype(str).to_numpy()
            unseen = sorted(set(cells) - set(declared))
            if unseen:
                raise ValidationError(f"column {col!r} has undeclared levels {unseen}")
            for level in declared[1:]:
                name = f"{col}={level}"
                columns.append(name)
                blocks.append((cells == level).astype(float))
                kinds.append(BINARY)
                provenance[name] = (col, level)
        else:
            values = _to_float(raw[col], col)
            columns.append(col)
            blocks.append(values)
            is01 = bool(np.all((values == 0) | (values == 1)))
            if col in binary and not is01:
                raise ValidationError(f"column {col!r} declared binary but has non-0/1 values")
            kinds.append(BINARY if is01 else CONTINUOUS)
    if not columns:
        raise SchemaError("no covariate columns")

    if treatment not in raw.columns:
        raise SchemaError(f"missing treatment column {treatment!r}")
    t_values = _to_float(raw[treatment], treatment)
    bad = np.flatnonzero((t_values != 0) & (t_values != 1))
    if bad.size:
        raise ValidationError(f"treatment column {treatment!r} must be 0/1; row {int(bad[0]) + 2} has {t_values[bad[0]]:g}")

    y = None
    if outcome is not None:
        y = _to_float(raw[outcome], outcome)
    ids = ()
    if id_column is not None:
        if id_column not in raw.columns:
            raise SchemaError(f"missing id column {id_column!r}")
        ids = tuple(raw[id_column].astype(str))

    return Dataset(
        X=np.column_stack(blocks),
        T=t_values.astype(np.int8),
        Y=y,
        columns=tuple(columns),
        kinds=tuple(kinds),
        unit_ids=ids,
        provenance=provenance,
    )


def load_dataset(path, schema):
    """Read a headered UTF-8 CSV into a :class:`Dataset` according to ``schema``.

    ``schema`` is a :class:`Schema`, a dict accepted by :meth:`Schema.from_dict`,
    or a path to a JSON file holding one.
    """
    if isinstance(schema, (str, os.PathLike)):
        schema = Schema.from_json(schema)
    elif isinstance(schema, dict):
        schema = Schema.from_dict(schema)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot parse {path}: {exc}") from exc
    raw.columns = [c.strip() for c in raw.columns]

    outcome = schema.outcome
    if outcome is not None and outcome not in raw.columns:
        if not schema.outcome_optional:
            raise SchemaError(f"missing outcome column {outcome!r}")
        outcome = None
    covariates = list(schema.covariates) or None
    return binarize_categoricals(
        raw,
        schema.categorical,
        treatment=schema.treatment,
        outcome=outcome,
        covariates=covariates,
        id_column=schema.id_column,
        binary=schema.binary,
    )


def levels_in_box(data, lower, upper):
    """Map a box's bounds on indicator columns back to original levels.

    Returns ``{source_column: [levels whose indicator pattern lies in the box]}``
    for every binarized source column in ``data``.
    """
    sources = {}
    for j, name in enumerate(data.columns):
        if name in data.provenance:
            src, level = data.provenance[name]
            sources.setdefault(src, []).append((j, level))
    out = {}
    for src, members in sources.items():
        idx = [j for j, _ in members]
        allowed = []
        # reference level: all indicators zero
        if all(lower[j] <= 0 <= upper[j] for j in idx):
            allowed.append(None)
        for j, level in members:
            if lower[j] <= 1 <= upper[j] and all(lower[k] <= 0 <= upper[k] for k in idx if k != j):
                allowed.append(level)
        out[src] = allowed
    return out


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    validation_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if not 0 <= self.validation_fraction < 1:
            raise ConfigError("validation_fraction must lie in [0, 1)")
        if self.train_fraction + self.validation_fraction >= 1:
            raise ConfigError("train + validation fractions must sum to < 1")


def split(data, spec):
    """Shuffle and partition ``data`` into (train, validation, test).

    The validation set is empty (``None``) when ``validation_fraction`` is 0.
    """
    n = data.n
    n_train = int(round(spec.train_fraction * n))
    n_val = int(round(spec.validation_fraction * n))
    n_test = n - n_train - n_val
    if n_train < 1:
        raise ConfigError(f"train split is empty for n={n}")
    if spec.validation_fraction > 0 and n_val < 1:
        raise ConfigError(f"validation split is empty for n={n}")
    if n_test < 1:
        raise ConfigError(f"test split is empty for n={n}")
    order = np.random.default_rng(spec.seed).permutation(n)
    train = data.subset(np.sort(order[:n_train]))
    val = data.subset(np.sort(order[n_train:n_train + n_val])) if n_val else None
    test = data.subset(np.sort(order[n_train + n_val:]))
    return train, val, test
