import json
import math

import numpy as np
import pytest

from kdiff.datasets import (
    Dataset,
    GmmComponent,
    GmmSpec,
    load_builtin,
    load_dataset,
    load_gmm_spec,
    sample_gmm,
    standardize,
    subsample,
)
from kdiff.errors import ValidationError


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_iris_metadata():
    ds = load_builtin("iris")
    assert (ds.n, ds.d, ds.num_classes) == (150, 4, 3)
    # string labels re-encoded in first-appearance order
    assert list(ds.labels[[0, 50, 100]]) == [0, 1, 2]


def test_load_named_label_column(tmp_path):
    p = write(tmp_path, "a,cls,b\n1,x,2\n3,y,4\n5,x,6\n")
    ds = load_dataset(p, "cls")
    assert ds.points.tolist() == [[1, 2], [3, 4], [5, 6]]
    assert ds.labels.tolist() == [0, 1, 0]


def test_load_without_header_by_index(tmp_path):
    p = write(tmp_path, "1,2,7\n3,4,9\n")
    ds = load_dataset(p, -1)
    assert ds.points.tolist() == [[1, 2], [3, 4]]
    assert ds.labels.tolist() == [0, 1]


def test_load_unlabelled(tmp_path):
    ds = load_dataset(write(tmp_path, "x,y\n1,2\n"))
    assert ds.labels is None and ds.d == 2


@pytest.mark.parametrize(
    "text,label,match",
    [
        ("a,b,c\n", "c", "empty dataset"),
        ("", None, "empty dataset"),
        ("a,b,c\n1,zz,0\n", "c", "non-numeric"),
        ("a,b,c\n1,2,0\n", "label", "absent"),
        ("1,2\n3\n", None, "expected 2 cells"),
    ],
)
def test_load_errors(tmp_path, text, label, match):
    with pytest.raises(ValidationError, match=match):
        load_dataset(write(tmp_path, text), label)


def test_load_missing_file(tmp_path):
    with pytest.raises(ValidationError, match="no such file"):
        load_dataset(tmp_path / "nope.csv")


def test_dataset_invariants():
    with pytest.raises(ValidationError):
        Dataset(np.empty((0, 2)))
    with pytest.raises(ValidationError):
        Dataset(np.array([[1.0, np.nan]]))
    with pytest.raises(ValidationError):
        Dataset(np.ones((2, 1)), np.array([0, -1]))
    with pytest.raises(ValidationError):
        Dataset(np.ones((2, 1)), np.array([0]))
    ds = Dataset(np.ones((2, 1)))
    with pytest.raises(ValueError):
        ds.points[0, 0] = 3.0


def test_standardize_population_sd():
    # population sd of [1, 2, 3] is sqrt(2/3), so the ends map to -/+ sqrt(3/2)
    ds = standardize(Dataset(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])))
    s = math.sqrt(1.5)
    np.testing.assert_allclose(ds.points[:, 0], [-s, 0.0, s], atol=1e-15)
    assert ds.points[:, 1].tolist() == [0.0, 0.0, 0.0]


def test_standardize_idempotent(rng):
    ds = Dataset(rng.normal(3.0, 7.0, size=(200, 5)), rng.integers(0, 3, 200))
    once = standardize(ds)
    twice = standardize(once)
    np.testing.assert_allclose(twice.points, once.points, atol=1e-12, rtol=0)
    np.testing.assert_allclose(once.points.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(once.points.std(axis=0), 1.0, atol=1e-12)
    assert np.array_equal(once.labels, ds.labels)


def test_gmm_single_component_mean():
    n = 10_000
    ds = sample_gmm(GmmSpec([GmmComponent(1.0, (0.0, 0.0), 1.0)], n, seed=3))
    assert np.all(np.abs(ds.points.mean(axis=0)) < 4 / math.sqrt(n))


def test_gmm_component_counts():
    n = 10_000
    spec = GmmSpec([GmmComponent(0.5, (0.0,), 1.0), GmmComponent(0.5, (5.0,), 2.0)], n, seed=11)
    counts = np.bincount(sample_gmm(spec).labels, minlength=2)
    assert np.all(np.abs(counts - 5000) <= 4 * math.sqrt(n * 0.25))


def test_gmm_deterministic():
    spec = GmmSpec([GmmComponent(0.3, (0.0, 1.0), 1.0), GmmComponent(0.7, (2.0, 2.0), 0.5)], 500, seed=9)
    a, b = sample_gmm(spec), sample_gmm(spec)
    assert a.points.tobytes() == b.points.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()


@pytest.mark.parametrize(
    "comps",
    [
        [GmmComponent(0.5, (0.0,), 1.0), GmmComponent(0.4, (1.0,), 1.0)],
        [GmmComponent(1.0, (0.0,), 0.0)],
        [GmmComponent(1.0, (0.0,), -1.0)],
    ],
)
def test_gmm_spec_errors(comps):
    with pytest.raises(ValidationError):
        GmmSpec(comps, 10)


def test_gmm_spec_json_roundtrip(tmp_path):
    spec = GmmSpec([GmmComponent(0.25, (0.0, 1.0), 1.0), GmmComponent(0.75, (2.0, 2.0), 0.5)], 40, seed=2)
    p = tmp_path / "gmm.json"
    p.write_text(json.dumps(spec.to_dict()))
    assert load_gmm_spec(p) == spec


def test_subsample(rng):
    ds = Dataset(rng.normal(size=(50, 2)), np.arange(50) % 3)
    sub = subsample(ds, 20, seed=1)
    assert sub.n == 20
    assert np.array_equal(sub.points, subsample(ds, 20, seed=1).points)
    with pytest.raises(ValidationError):
        subsample(ds, 51)
