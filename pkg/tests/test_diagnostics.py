import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import gaussian_kde

from nestedgp.diagnostics import (
    HpdInterval,
    PosteriorSummary,
    galactic_convert,
    geweke_z,
    histogram_mode,
    hpd,
    hpd_table,
    summarize,
)
from nestedgp.sampler import RunReport, trace_columns


def brute_force_hpd(samples, mass):
    x = sorted(samples)
    n = len(x)
    k = math.ceil(mass * n - 1e-9)
    best = None
    for i in range(n - k + 1):
        w = x[i + k - 1] - x[i]
        if best is None or w < best[0]:
            best = (w, i)
    return best[1], best[1] + k - 1


def fake_report(values, d=1):
    n = len(values)
    cols = {name: np.full(n, np.nan) for name in trace_columns(d)}
    cols["iter"] = np.arange(1, n + 1, dtype=float)
    cols["loglik"] = np.zeros(n)
    cols["q_1"] = np.asarray(values, dtype=float)
    cols["ell_1"] = 1.0 / cols["q_1"]
    cols["accept_block1"] = np.ones(n)
    return RunReport(columns=cols, d=d, seed=0, config_hash="x", model="nonnested")


def test_constant_samples_give_point_interval():
    iv = hpd(np.full(50, 3.5))
    assert (iv.lo, iv.hi) == (3.5, 3.5)


def test_integer_samples_window():
    iv = hpd(np.arange(1, 101), 0.95)
    assert iv.hi - iv.lo == 94
    assert (iv.lo_index, iv.hi_index) == brute_force_hpd(list(range(1, 101)), 0.95)


def test_standard_normal_quantiles():
    x = np.random.default_rng(1).standard_normal(100_000)
    iv = hpd(x, 0.95)
    assert iv.lo == pytest.approx(-1.96, abs=0.05)
    assert iv.hi == pytest.approx(1.96, abs=0.05)


def test_too_few_samples():
    with pytest.raises(ValueError):
        hpd(np.arange(5.0))


def test_interval_helpers():
    a, b = HpdInterval(0.0, 1.0), HpdInterval(0.5, 2.0)
    assert a.overlaps(b) and b.overlaps(a)
    assert not a.overlaps(HpdInterval(1.5, 2.0))
    assert a.contains(1.0) and not a.contains(1.01)
    assert b.width == 1.5


@settings(max_examples=100)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=20, max_size=200),
       st.sampled_from([0.5, 0.8, 0.9, 0.95, 0.99]))
def test_hpd_matches_all_windows_oracle(samples, mass):
    iv = hpd(samples, mass)
    assert (iv.lo_index, iv.hi_index) == brute_force_hpd(samples, mass)
    inside = sum(iv.lo <= s <= iv.hi for s in samples)
    assert inside >= math.ceil(mass * len(samples) - 1e-9)


def test_summary_of_constant_trace():
    s = summarize(fake_report([2.0] * 100))
    p = s["q_1"]
    assert p.mode == p.mean == 2.0
    assert s.acceptance["accept_block1"] == 1.0
    assert s.n_used == 50


def test_bimodal_mode_matches_kde_peak():
    r = np.random.default_rng(5)
    x = np.concatenate([r.normal(0.0, 1.0, 14000), r.normal(5.0, 1.0, 6000)])
    grid = np.linspace(-4, 9, 2601)
    peak = grid[np.argmax(gaussian_kde(x)(grid))]
    assert histogram_mode(x) == pytest.approx(peak, abs=0.3)
    assert abs(histogram_mode(x)) < 1.0


def test_geweke_separates_stationary_from_drifting():
    r = np.random.default_rng(2)
    assert abs(geweke_z(r.standard_normal(5000))) < 3
    assert abs(geweke_z(np.linspace(0, 10, 5000) + r.standard_normal(5000))) > 10


def test_summary_csv_roundtrip(tmp_path):
    s = summarize(fake_report(np.random.default_rng(0).gamma(4.0, size=400)))
    s.to_csv(tmp_path / "s.csv")
    back = PosteriorSummary.from_csv(tmp_path / "s.csv")
    for name, p in s.params.items():
        q = back[name]
        assert (q.mode, q.mean, q.interval.lo, q.interval.hi) == (p.mode, p.mean, p.interval.lo, p.interval.hi)


def test_hpd_table_layout():
    s = summarize(fake_report(np.linspace(1, 2, 100)))
    text = hpd_table({"using only training data": s})
    lines = text.splitlines()
    assert lines[0].startswith("Parameters")
    assert "q_1" in lines[2] and "[" in lines[2]


def test_galactic_examples():
    g = galactic_convert(2.0, (0.0421, 1.2052))
    assert g.length_unit_kpc == 4.0
    assert g.omega_bar == 55.0
    assert g.bar_angle_deg == pytest.approx((2.41, 69.05), abs=0.01)
    g8 = galactic_convert(8.0, (0.0, 0.0))
    assert (g8.length_unit_kpc, g8.omega_bar) == (1.0, 220.0)
    with pytest.raises(ValueError):
        galactic_convert(0.0, (0.0, 1.0))
