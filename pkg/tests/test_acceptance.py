"""Acceptance criteria 1-9.

Each test records ``(passed, detail)`` in ``RESULTS``; the pytest terminal
summary prints one PASS/FAIL line per criterion.  Run alone with
``pytest tests/test_acceptance.py -v``.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import kstest, multivariate_normal, truncnorm

from nestedgp.cli import main
from nestedgp.diagnostics import galactic_convert, hpd, summarize
from nestedgp.io import read_dataset
from nestedgp.likelihood import Empirical, Sigma1Params, TensorNormalModel, log_likelihood
from nestedgp.prediction import AugmentedData, ModalSnapshot, model_check_slice, predict_from_modal, predict_joint
from nestedgp.sampler import Priors, ProposalConfig, SamplerConfig, Target, run_chain
from nestedgp.synth import synthesize
from nestedgp.tensor import vectorize

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

RESULTS = {}
STRATS = ["direct", "empirical", "kernel"]
Q_TRUE = (3800.0, 72.0)
BOUNDS = [(1.7, 2.3), (0.0, 1.5708)]


def record(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def fit_cfg(seed, n_iter=5000, model="nonnested", **kw):
    """Sampler settings shared by the synthetic recovery experiments.

    The length scales start within a factor of two of the generating values
    (log-uniform, drawn from ``seed``); the unit-scale default seed would
    leave the chain to find the posterior from orders of magnitude away.
    """
    ell_true = 1.0 / np.asarray(Q_TRUE)
    ell0 = ell_true * np.exp(np.random.default_rng(seed).uniform(-math.log(2), math.log(2), 2))
    return SamplerConfig(
        model=model, n_iter=n_iter, seed=seed, ell0=ell0.tolist(), sigma0=[1.0, 1.0, 0.0],
        proposal=ProposalConfig(v_ell=((0.05 * ell_true) ** 2).tolist(), v_sigma=[1e-4] * 3),
        adapt=True, **kw,
    )


def synth_via_cli(tmp_path, seed, *extra):
    path = tmp_path / f"synth_{seed}.csv"
    assert main(["synth", "--dims", "2x10x64", "--q", "3800,72", "--seed", str(seed),
                 "--out", str(path), *extra]) == 0
    return read_dataset(path)


def test_criterion_1_kronecker_oracle():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        k = int(rng.choice([2, 3]))
        dims = tuple(int(m) for m in rng.choice([2, 3, 4, 5], size=k))
        covs = []
        for m in dims:
            w = rng.standard_normal((m, m))
            covs.append(w @ w.T / m + 0.5 * np.eye(m))
        mean = rng.standard_normal(dims)
        data = mean + rng.standard_normal(dims)
        big = covs[-1]
        for c in reversed(covs[:-1]):
            big = np.kron(big, c)
        oracle = multivariate_normal(vectorize(mean), big).logpdf(vectorize(data))
        got = log_likelihood(TensorNormalModel(mean, [Empirical(c) for c in covs]), data)
        worst = max(worst, abs(got - oracle))
    elapsed = time.perf_counter() - start
    record(1, worst < 1e-8 and elapsed < 10, f"max |error| {worst:.2e} over 50 models, {elapsed:.2f} s")


def test_criterion_2_prior_recovery():
    start = time.perf_counter()
    r = synthesize((2, 3, 10), (30.0, 3.0), seed=0, with_test=True)
    target = Target(r.data, r.points, STRATS, test_slice=r.test_slice, flat=True)
    prior_mean = {"ell": [1.0, 0.5], "a": [0.5, 0.5], "delta": [2.0, 2.0], "sigma": [1.0, 1.0, 0.3]}
    prior_var = {"ell": [1.0, 0.25], "a": [1.0, 1.0], "delta": [4.0, 4.0], "sigma": [1.0, 1.0, 0.25]}
    thin, keep, burn = 10, 5000, 5000
    cfg = SamplerConfig(
        model="nested", t0=10, n_iter=burn + thin * keep, seed=1, burnin_frac=burn / (burn + thin * keep),
        ell0=prior_mean["ell"], a0=prior_mean["a"], delta0=prior_mean["delta"], sigma0=prior_mean["sigma"],
        proposal=ProposalConfig(v_ell=[1.0, 1.0], v_a=[1.0, 1.0], v_delta=[4.0, 4.0],
                                v_sigma=[1.0, 1.0, 0.25], v_s=[0.04, 0.3]),
        priors=Priors(ell_var=prior_var["ell"], a_var=prior_var["a"], delta_var=prior_var["delta"],
                      sigma="gaussian", sigma_var=prior_var["sigma"], s_bounds=BOUNDS),
        flat_likelihood=True,
    )
    rep = run_chain(target, cfg)

    def tn(mean, var, lo=0.0, hi=np.inf):
        sd = math.sqrt(var)
        return truncnorm((lo - mean) / sd, (hi - mean) / sd, loc=mean, scale=sd).cdf

    checks = {}
    for c in (1, 2):
        checks[f"ell_{c}"] = tn(prior_mean["ell"][c - 1], prior_var["ell"][c - 1])
        checks[f"a_{c}"] = tn(prior_mean["a"][c - 1], prior_var["a"][c - 1])
        checks[f"delta_{c}"] = tn(prior_mean["delta"][c - 1], prior_var["delta"][c - 1])
        lo, hi = BOUNDS[c - 1]
        checks[f"s{c}_test"] = lambda x, lo=lo, hi=hi: np.clip((x - lo) / (hi - lo), 0, 1)
    checks["sigma11"] = tn(1.0, 1.0)
    checks["sigma22"] = tn(1.0, 1.0)
    checks["rho"] = tn(0.3, 0.25, -1.0, 1.0)
    pvals = {}
    for name, cdf in checks.items():
        x = rep.columns[name][burn:][::thin]
        assert x.size == keep
        pvals[name] = kstest(x, cdf).pvalue
    elapsed = time.perf_counter() - start
    worst = min(pvals, key=pvals.get)
    ok = all(p > 0.01 for p in pvals.values()) and elapsed < 30
    record(2, ok, f"{len(pvals)} marginals, smallest KS p = {pvals[worst]:.3f} ({worst}), {elapsed:.1f} s")


def test_criterion_3_inverse_crime_recovery(tmp_path):
    start = time.perf_counter()
    hits = np.zeros(2, dtype=int)
    for seed in range(20):
        ds = synth_via_cli(tmp_path, seed)
        target = Target(ds.data, ds.points, STRATS)
        s = summarize(run_chain(target, fit_cfg(100 + seed)))
        hits += [s[f"q_{c}"].interval.contains(Q_TRUE[c - 1]) for c in (1, 2)]
    elapsed = time.perf_counter() - start
    ok = np.all(hits >= 18) and elapsed < 600
    record(3, ok, f"q_1 covered {hits[0]}/20, q_2 covered {hits[1]}/20, {elapsed:.0f} s")


def test_criterion_4_nested_contraction(tmp_path):
    start = time.perf_counter()
    wins = 0
    ratios = []
    for seed in range(20):
        ds = synth_via_cli(tmp_path, seed, "--discontinuity", "two-regime")
        target = Target(ds.data, ds.points, STRATS)
        widths = {}
        for model in ("nonnested", "nested"):
            s = summarize(run_chain(target, fit_cfg(100 + seed, model=model, t0=100)))
            widths[model] = s["q_1"].interval.width
        wins += widths["nested"] < widths["nonnested"]
        ratios.append(widths["nested"] / widths["nonnested"])
    elapsed = time.perf_counter() - start
    ok = wins >= 15 and elapsed < 1200
    record(4, ok, f"nested narrower in {wins}/20 pairs, median width ratio {np.median(ratios):.3f}, "
                  f"{elapsed:.0f} s")


def test_criterion_5_t0_sensitivity(tmp_path):
    start = time.perf_counter()
    ds = synth_via_cli(tmp_path, 7)
    target = Target(ds.data, ds.points, STRATS)
    # 15000 sweeps: the hyper block accepts ~25% of proposals, so a 3000-draw
    # half-chain gives sd estimates too noisy to order three runs reliably
    reports = {t0: run_chain(target, fit_cfg(11, n_iter=15000, model="nested", t0=t0)) for t0 in (50, 100, 200)}
    sums = {t0: summarize(rep) for t0, rep in reports.items()}
    overlap = all(
        sums[a][f"ell_{c}"].interval.overlaps(sums[b][f"ell_{c}"].interval)
        for c in (1, 2) for a in sums for b in sums
    )
    # fluctuation amplitude: post-burn-in standard deviation of each trace
    stds = {}
    for name in ("a_1", "a_2", "delta_1", "delta_2"):
        stds[name] = [float(np.std(rep.columns[name][rep.n_iter // 2:])) for rep in reports.values()]
    monotone = all(v[0] >= v[1] >= v[2] for v in stds.values())
    elapsed = time.perf_counter() - start
    detail = ", ".join(f"{k} sd {v[0]:.3g}/{v[1]:.3g}/{v[2]:.3g}" for k, v in stds.items())
    record(5, overlap and monotone and elapsed < 1800,
           f"ell HPDs overlap: {overlap}; t0=50/100/200: {detail}; {elapsed:.0f} s")


def test_criterion_6_model_check(tmp_path):
    """Paper-shaped data (2 x 50 x 216) and the slices 190, 200, 210 used in the paper."""
    start = time.perf_counter()
    path = tmp_path / "paper_shape.csv"
    assert main(["synth", "--dims", "2x50x216", "--q", "3800,72", "--seed", "21", "--out", str(path)]) == 0
    ds = read_dataset(path)
    target = Target(ds.data, ds.points, STRATS)
    snap = ModalSnapshot.from_summary(summarize(run_chain(target, fit_cfg(5, n_iter=3000))), "mode")
    lines, ok = [], True
    for q in (190, 200, 210):
        t = time.perf_counter()
        rep = model_check_slice(ds.data, ds.points, STRATS, q - 1, snap, n_iter=20_000, seed=q)
        dt = time.perf_counter() - t
        ok &= rep.pearson_r > 0.9 and 0.8 <= rep.slope <= 1.2 and dt < 300
        lines.append(f"slice {q}: r={rep.pearson_r:.3f} slope={rep.slope:.3f} ({dt:.1f} s)")
    record(6, ok, "; ".join(lines) + f"; total {time.perf_counter() - start:.0f} s")


def test_criterion_7_inverse_prediction():
    start = time.perf_counter()
    both_cover = overlap = 0
    for seed in range(20):
        r = synthesize((2, 10, 64), Q_TRUE, seed=seed, with_test=True)
        aug = AugmentedData(r.data, r.points, r.test_slice, tuple(STRATS))
        train = summarize(run_chain(Target(r.data, r.points, STRATS), fit_cfg(200 + seed, n_iter=3000)))
        snap = ModalSnapshot.from_summary(train, "mode")
        # the s_test posterior can be multimodal on the galactic box; 3000
        # sweeps left random-walk chains sitting in a single mode
        cfg = fit_cfg(300 + seed, n_iter=15000, priors=Priors(s_bounds=BOUNDS))
        joint = summarize(predict_joint(aug, cfg))
        modal = summarize(predict_from_modal(aug, snap, cfg))
        ivs = [(joint[f"s{c}_test"].interval, modal[f"s{c}_test"].interval) for c in (1, 2)]
        overlap += all(a.overlaps(b) for a, b in ivs)
        both_cover += all(a.contains(r.s_test[c]) and b.contains(r.s_test[c]) for c, (a, b) in enumerate(ivs))
    g = galactic_convert(2.0, (0.0, 1.0))
    elapsed = time.perf_counter() - start
    ok = overlap == 20 and both_cover >= 18 and g.omega_bar == 55.0 and 48.11 <= g.omega_bar <= 57.73
    record(7, ok, f"HPDs overlap in {overlap}/20, planted point in both HPDs in {both_cover}/20, "
                  f"Omega_bar(s1=2) = {g.omega_bar}, {elapsed:.0f} s")


def test_criterion_8_hpd_oracle():
    rng = np.random.default_rng(8)
    start = time.perf_counter()
    agree = 0
    for _ in range(100):
        n = int(rng.integers(20, 400))
        x = np.round(rng.standard_gamma(2.0, n), int(rng.integers(1, 4)))
        mass = float(rng.choice([0.5, 0.9, 0.95, 0.99]))
        xs = np.sort(x)
        k = math.ceil(mass * n - 1e-9)
        best_i, best_w = 0, math.inf
        for i in range(n - k + 1):
            w = xs[i + k - 1] - xs[i]
            if w < best_w:
                best_i, best_w = i, w
        iv = hpd(x, mass)
        agree += (iv.lo_index, iv.hi_index) == (best_i, best_i + k - 1)
    elapsed = time.perf_counter() - start
    record(8, agree == 100 and elapsed < 1, f"{agree}/100 exact index agreement, {elapsed:.2f} s")


def test_criterion_9_determinism(tmp_path):
    data = tmp_path / "d.csv"
    assert main(["synth", "--dims", "2x5x20", "--q", "30,3", "--seed", "2", "--out", str(data)]) == 0
    same = []
    for model in ("nonnested", "nested"):
        traces = []
        for run in ("a", "b"):
            out = tmp_path / f"{model}_{run}"
            assert main(["train", "--data", str(data), "--model", model, "--t0", "20", "--iters", "300",
                         "--seed", "13", "--out", str(out)]) == 0
            traces.append((out / "trace.csv").read_bytes())
        same.append(traces[0] == traces[1])
    record(9, all(same), f"byte-identical trace CSVs: nonnested {same[0]}, nested {same[1]}")
