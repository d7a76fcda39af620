import numpy as np
import pytest

from nestedgp.likelihood import empirical_covariance
from nestedgp.synth import GALACTIC_BOX, synthesize


def test_shapes_metadata_and_design_box():
    r = synthesize((2, 10, 64), (3800.0, 72.0), seed=1)
    assert r.data.shape == (2, 10, 64) and r.points.shape == (64, 2)
    assert r.meta["q"] == [3800.0, 72.0] and r.meta["seed"] == 1
    for c, (lo, hi) in enumerate(GALACTIC_BOX):
        assert np.all((r.points[:, c] >= lo) & (r.points[:, c] <= hi))


def test_seeded_generation_is_reproducible():
    a = synthesize((2, 3, 4), (2.0,), seed=5)
    b = synthesize((2, 3, 4), (2.0,), seed=5)
    np.testing.assert_array_equal(a.data, b.data)


def test_test_slice_is_returned_separately():
    r = synthesize((2, 3, 8), (30.0, 3.0), seed=1, with_test=True, s_test=[2.0, 0.5])
    assert r.test_slice.shape == (2, 3, 1)
    np.testing.assert_array_equal(r.s_test, [2.0, 0.5])


def test_invalid_dims():
    with pytest.raises(ValueError):
        synthesize((4,), (1.0,))


def test_two_regime_correlogram():
    """Neighbouring slices correlate strongly in the smooth regime only."""
    pts = np.column_stack([np.linspace(0, 2, 200), np.zeros(200)])
    r = synthesize((2, 20, 200), (40.0, 1.0), seed=3, points=pts, discontinuity="two-regime",
                   rough_factor=400.0)
    assert set(np.unique(r.regimes)) == {0, 1}
    resid = r.data - r.mean

    def lag1(idx):
        x, y = resid[..., idx[:-1]].ravel(), resid[..., idx[1:]].ravel()
        return np.corrcoef(x, y)[0, 1]

    smooth = lag1(np.flatnonzero(r.regimes == 0))
    rough = lag1(np.flatnonzero(r.regimes == 1))
    assert smooth > 0.9
    assert rough < 0.5
    cross = np.corrcoef(resid[..., 99].ravel(), resid[..., 100].ravel())[0, 1]
    assert abs(cross) < 0.5
    assert empirical_covariance(r.data, 1).shape == (20, 20)
