import math

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from kdiff.datasets import Dataset
from kdiff.errors import ValidationError
from kdiff.kernels import KERNEL_FLOOR, KernelSpec, kernel_matrix, is_symmetric

from .conftest import line


def test_symmetric_gaussian_two_points():
    km = kernel_matrix(line(0, 1), KernelSpec("symmetric-gaussian", eps=2.0, h=0.5)).matrix.toarray()
    e2 = math.exp(-2.0)
    np.testing.assert_allclose(km, [[1.0, e2], [e2, 1.0]], rtol=1e-15)
    assert km[0, 1] == pytest.approx(0.1353352832, rel=1e-9)


@pytest.mark.parametrize(
    "spec",
    [
        KernelSpec("symmetric-gaussian", eps=1.0, h=0.5),
        KernelSpec("asymmetric-gaussian", k=1, h=0.3),
    ],
)
def test_zero_distance_gives_one(spec):
    ds = Dataset(np.array([[0.0, 0.0], [0.0, 0.0], [4.0, 4.0]]))
    km = kernel_matrix(ds, spec).matrix.toarray()
    assert km[0, 1] == 1.0 and km[1, 0] == 1.0


def test_indicator_isolation():
    km = kernel_matrix(line(0, 1, 2.5), KernelSpec("indicator-ball", eps=0.5))
    assert np.array_equal(km.matrix.toarray(), np.eye(3))
    assert is_symmetric(km)


def test_symmetric_equals_product_of_parts(rng):
    ds = Dataset(rng.normal(size=(60, 3)))
    eps, h = 1.2, 0.5
    km = kernel_matrix(ds, KernelSpec("symmetric-gaussian", eps=eps, h=h)).matrix.toarray()
    dist = cdist(ds.points, ds.points)
    expected = np.exp(-dist**2 / h) * (dist <= eps)
    np.testing.assert_allclose(km, expected, rtol=1e-12, atol=0)
    assert is_symmetric(kernel_matrix(ds, KernelSpec("symmetric-gaussian", eps=eps, h=h)))


def test_asymmetric_rows_and_symmetry(rng):
    ds = Dataset(rng.normal(size=(50, 2)))
    km = kernel_matrix(ds, KernelSpec("asymmetric-gaussian", k=4, h=0.5))
    assert np.all(np.diff(km.matrix.indptr) == 4)
    assert np.all(km.matrix.diagonal() == 0)
    assert np.all((km.matrix.data > 0) & (km.matrix.data <= 1))


def test_asymmetric_not_symmetric():
    # nearest neighbour of 3 is 1, but 1's nearest neighbour is 0
    km = kernel_matrix(line(0, 1, 3), KernelSpec("asymmetric-gaussian", k=1, h=0.5))
    assert not is_symmetric(km)


def test_floor_keeps_support():
    km = kernel_matrix(line(0, 100), KernelSpec("symmetric-gaussian", eps=200.0, h=0.5))
    assert km.matrix.nnz == 4
    assert km.matrix[0, 1] == KERNEL_FLOOR


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(family="gaussian", eps=1.0),
        dict(family="indicator-ball"),
        dict(family="symmetric-gaussian", eps=-1.0),
        dict(family="asymmetric-gaussian"),
        dict(family="asymmetric-gaussian", k=0),
        dict(family="asymmetric-gaussian", k=3, h=0.0),
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValidationError):
        KernelSpec(**kwargs)


def test_asymmetric_k_too_large():
    with pytest.raises(ValidationError):
        kernel_matrix(line(0, 1, 2), KernelSpec("asymmetric-gaussian", k=3))
