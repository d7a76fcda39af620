import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nestedgp.kernels import SqeInputKernel, SqeIterKernel, input_kernel_matrix, iter_kernel_matrix


def test_single_point_gives_unit_matrix():
    np.testing.assert_array_equal(input_kernel_matrix([3.0, 2.0], [[0.1, 0.2]]), [[1.0]])


def test_scalar_evaluation():
    k = input_kernel_matrix([1.0], [[0.0], [math.sqrt(math.log(2.0))]])
    assert k[0, 1] == pytest.approx(0.5, rel=1e-14)


def test_matches_entry_loop(rng):
    q = np.array([3.0, 0.7])
    pts = rng.random((6, 2))
    k = input_kernel_matrix(q, pts)
    for i in range(6):
        for j in range(6):
            expected = math.exp(-sum(q[c] * (pts[i, c] - pts[j, c]) ** 2 for c in range(2)))
            assert k[i, j] == pytest.approx(expected, rel=1e-13)


def test_kernel_objects_agree(rng):
    pts = rng.random((4, 2))
    ell = np.array([0.5, 2.0])
    np.testing.assert_allclose(SqeInputKernel.from_length_scales(ell).matrix(pts),
                               input_kernel_matrix(1.0 / ell, pts))
    np.testing.assert_allclose(SqeIterKernel(2.0, 1.5).matrix(5), iter_kernel_matrix(2.0, 1.5, 5))


def test_non_finite_points_rejected():
    with pytest.raises(ValueError):
        input_kernel_matrix([1.0], [[0.0], [np.nan]])


def test_iter_kernel_examples():
    np.testing.assert_array_equal(iter_kernel_matrix(0.7, 3.0, 1), [[0.7]])
    np.testing.assert_allclose(iter_kernel_matrix(1.0, 1e12, 4), np.ones((4, 4)), rtol=1e-12)
    assert iter_kernel_matrix(2.0, 1.0, 3)[0, 2] == pytest.approx(2.0 * math.exp(-2.0), rel=1e-14)


@settings(max_examples=50)
@given(st.integers(1, 8), st.lists(st.floats(0.01, 100.0), min_size=2, max_size=2), st.integers(0, 9999))
def test_input_kernel_is_symmetric_with_unit_diagonal(n, q, seed):
    pts = np.random.default_rng(seed).random((n, 2))
    k = input_kernel_matrix(q, pts)
    np.testing.assert_array_equal(k, k.T)
    np.testing.assert_array_equal(np.diag(k), np.ones(n))
    assert np.all((k >= 0) & (k <= 1))
    assert np.linalg.eigvalsh(k).min() > -1e-10
