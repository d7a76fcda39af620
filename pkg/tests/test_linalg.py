import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nestedgp.linalg import JitterPolicy, NotPositiveDefinite, apply_factor, cholesky, solve_triangular
from conftest import random_spd


def test_identity_factor():
    f = cholesky(np.eye(3))
    np.testing.assert_array_equal(f.L, np.eye(3))
    assert f.log_det == 0.0
    assert f.jitter == 0.0


def test_hand_factorisation():
    f = cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
    np.testing.assert_allclose(f.L, [[2.0, 0.0], [1.0, math.sqrt(2.0)]], rtol=1e-15)
    assert f.log_det == pytest.approx(math.log(8.0), rel=1e-14)


def test_negative_eigenvalue_raises():
    m = np.diag([1.0, 2.0, -1e-3])
    with pytest.raises(NotPositiveDefinite):
        cholesky(m)


def test_asymmetric_input_is_rejected():
    with pytest.raises(ValueError):
        cholesky(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_jitter_rescues_singular_matrix():
    m = np.ones((3, 3))
    f = cholesky(m)
    assert f.jitter > 0
    np.testing.assert_allclose(f.L @ f.L.T, m + f.jitter * np.eye(3), atol=1e-12)


def test_jitter_levels_escalate():
    levels = list(JitterPolicy().levels())
    assert levels[0] == 1e-10
    assert len(levels) == 7
    assert levels[-1] == pytest.approx(1e-4)
    assert all(b > a for a, b in zip(levels, levels[1:]))


def test_solve_triangular_examples(rng):
    t = rng.standard_normal((3, 2))
    np.testing.assert_array_equal(solve_triangular(cholesky(np.eye(3)), t, 0), t)
    f = cholesky(np.diag([4.0, 4.0]))
    np.testing.assert_allclose(solve_triangular(f, np.array([4.0, 6.0]), 0), [2.0, 3.0])


def test_solve_matches_explicit_inverse(rng):
    s = random_spd(rng, 3)
    f = cholesky(s)
    t = rng.standard_normal((3, 2))
    np.testing.assert_allclose(solve_triangular(f, t, 0), np.linalg.inv(f.L) @ t, rtol=1e-10)
    t2 = rng.standard_normal((2, 3))
    np.testing.assert_allclose(solve_triangular(f, t2, 1), t2 @ np.linalg.inv(f.L).T, rtol=1e-10)


@settings(max_examples=50)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_factor_reconstructs_and_inverts(m, seed):
    r = np.random.default_rng(seed)
    s = random_spd(r, m)
    f = cholesky(s)
    np.testing.assert_allclose(f.L @ f.L.T, s, rtol=1e-10, atol=1e-12)
    assert f.log_det == pytest.approx(np.linalg.slogdet(s)[1], rel=1e-9, abs=1e-10)
    x = r.standard_normal((m, 2))
    np.testing.assert_allclose(apply_factor(f, solve_triangular(f, x, 0), 0), x, atol=1e-9)
