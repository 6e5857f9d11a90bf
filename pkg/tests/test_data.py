import json

import numpy as np
import pytest

from ahb.data import (
    Dataset,
    Schema,
    SplitSpec,
    binarize_categoricals,
    levels_in_box,
    load_dataset,
    split,
)
from ahb.errors import ConfigError, ParseError, SchemaError, ValidationError


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


SCHEMA = {"treatment": "t", "outcome": "y", "id_column": "id"}


def test_load_basic(tmp_path):
    path = write(tmp_path, "id,a,b,t,y\nu1,0.5,1,1,3.0\nu2,0.1,0,0,1.0\n")
    d = load_dataset(path, SCHEMA)
    assert d.n == 2 and d.p == 2
    assert d.columns == ("a", "b")
    assert d.kinds == ("continuous", "binary")
    assert d.unit_ids == ("u1", "u2")
    assert d.T.tolist() == [1, 0]
    assert d.Y.tolist() == [3.0, 1.0]


def test_arrays_are_read_only(tmp_path):
    d = load_dataset(write(tmp_path, "id,a,t,y\n1,0.5,1,3\n"), SCHEMA)
    with pytest.raises(ValueError):
        d.X[0, 0] = 9


def test_bad_treatment_value_names_row(tmp_path):
    path = write(tmp_path, "id,a,t,y\n1,0.5,1,3\n2,0.5,2,3\n")
    with pytest.raises(ValidationError, match="row 3"):
        load_dataset(path, SCHEMA)


def test_non_numeric_names_row_and_column(tmp_path):
    path = write(tmp_path, "id,a,t,y\n1,0.5,1,3\n2,abc,0,3\n")
    with pytest.raises(ParseError, match="'a', row 3"):
        load_dataset(path, SCHEMA)


def test_missing_value_is_parse_error(tmp_path):
    path = write(tmp_path, "id,a,t,y\n1,,1,3\n")
    with pytest.raises(ParseError, match="row 2"):
        load_dataset(path, SCHEMA)


def test_missing_outcome_column(tmp_path):
    path = write(tmp_path, "id,a,t\n1,0.5,1\n")
    with pytest.raises(SchemaError):
        load_dataset(path, SCHEMA)
    d = load_dataset(path, {**SCHEMA, "outcome_optional": True})
    assert d.Y is None and not d.has_outcomes


def test_unknown_schema_key():
    with pytest.raises(SchemaError):
        Schema.from_dict({"treatment": "t", "bogus": 1})


def test_schema_roundtrip(tmp_path):
    s = Schema.from_dict({**SCHEMA, "categorical": {"c": ["x", "y"]}})
    path = tmp_path / "s.json"
    path.write_text(json.dumps(s.to_dict()))
    assert Schema.from_json(path) == s


def test_categorical_binarization(tmp_path):
    path = write(tmp_path, "id,c,t,y\n1,lo,1,1\n2,mid,0,2\n3,hi,0,3\n")
    d = load_dataset(path, {**SCHEMA, "categorical": {"c": ["lo", "mid", "hi"]}})
    assert d.columns == ("c=mid", "c=hi")
    assert d.X.tolist() == [[0, 0], [1, 0], [0, 1]]
    assert d.kinds == ("binary", "binary")
    # a box spanning the mid indicator only, hi fixed at 0
    assert levels_in_box(d, [0, 0], [1, 0]) == {"c": [None, "mid"]}
    assert levels_in_box(d, [0, 1], [0, 1]) == {"c": ["hi"]}


def test_undeclared_level(tmp_path):
    path = write(tmp_path, "id,c,t,y\n1,lo,1,1\n2,zz,0,2\n")
    with pytest.raises(ValidationError, match="undeclared"):
        load_dataset(path, {**SCHEMA, "categorical": {"c": ["lo", "mid"]}})


def test_declared_binary_checked():
    import pandas as pd

    raw = pd.DataFrame({"a": ["0", "2"], "t": ["1", "0"]})
    with pytest.raises(ValidationError):
        binarize_categoricals(raw, {}, treatment="t", binary=("a",))


def test_dataset_validation():
    with pytest.raises(ValidationError):
        Dataset(np.zeros((2, 1)), [0, 2])
    with pytest.raises(ValidationError):
        Dataset(np.array([[np.nan], [1.0]]), [0, 1])
    with pytest.raises(ValidationError):
        Dataset(np.zeros((2, 1)), [0, 1], unit_ids=("a", "a"))
    with pytest.raises(ValidationError):
        Dataset(np.array([[0.5], [1.0]]), [0, 1], kinds=("binary",))


def test_subset_and_index():
    d = Dataset(np.arange(8.0).reshape(4, 2), [0, 1, 0, 1], [1.0, 2, 3, 4], unit_ids=("a", "b", "c", "d"))
    s = d.subset([3, 1])
    assert s.unit_ids == ("d", "b")
    assert s.index_of("b") == 1
    with pytest.raises(KeyError):
        s.index_of("a")


def test_split_partition_and_determinism():
    d = Dataset(np.arange(20.0).reshape(10, 2), [0, 1] * 5, np.arange(10.0))
    tr, va, te = split(d, SplitSpec(0.5, 0.2, seed=3))
    ids = tr.unit_ids + va.unit_ids + te.unit_ids
    assert sorted(ids, key=int) == list(d.unit_ids)
    assert (tr.n, va.n, te.n) == (5, 2, 3)
    again = split(d, SplitSpec(0.5, 0.2, seed=3))
    assert again[0].unit_ids == tr.unit_ids
    assert split(d, SplitSpec(0.5))[1] is None


def test_split_rejects_empty_parts():
    d = Dataset(np.zeros((2, 1)), [0, 1], [0.0, 1.0])
    with pytest.raises(ConfigError):
        split(d, SplitSpec(0.9))
    with pytest.raises(ConfigError):
        SplitSpec(0.7, 0.3)
