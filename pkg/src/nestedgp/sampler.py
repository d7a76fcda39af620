"""Metropolis-within-Gibbs for the nonnested and nested tensor-variate GP.

One sweep updates, in this fixed order:

1. (nested, ``t >= t0``) the scalar-GP hyperparameters ``a_c, delta_c``;
2. the length scales ``ell_c`` of the input-space kernel;
3. the directly learnt covariance elements ``sigma11, sigma22, rho``;
4. (joint prediction only) the unknown test design point ``s_test``.

Every block is a joint random-walk proposal followed by one accept/reject.
"""

import hashlib
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from .likelihood import (
    DirectMCMC,
    Empirical,
    KernelParametrised,
    RejectedProposal,
    Sigma1Params,
    empirical_covariance,
    empirical_mean,
    log_normaliser,
    whiten,
)
from .kernels import input_kernel_matrix
from .linalg import DEFAULT_JITTER, JitterPolicy, NotPositiveDefinite, cholesky
from .nested import LookbackBuffer, ScalarGpHyper, lookback_log_prior
from .tensor import frobenius_sq

__all__ = [
    "ChainState",
    "Priors",
    "ProposalConfig",
    "RunReport",
    "SamplerConfig",
    "Target",
    "init_state",
    "merge_reports",
    "run_chain",
    "run_chains",
    "step_nested",
    "step_nonnested",
]

MODELS = ("nonnested", "nested")
STRATEGIES = ("direct", "empirical", "kernel")
ADAPT_WINDOW = 50


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ProposalConfig:
    """Random-walk proposal variances; ``None`` entries take the defaults."""

    v_ell: list | None = None
    v_a: list | None = None
    v_delta: list | None = None
    v_sigma: list | None = None
    v_s: list | None = None


@dataclass
class Priors:
    """Prior settings.

    Gaussian priors are centred on the seed values; their variances default
    to ``(100 * seed)^2``.  ``sigma`` is ``"jeffreys"`` or ``"gaussian"``.
    """

    ell_var: list | None = None
    a_var: list | None = None
    delta_var: list | None = None
    sigma: str = "jeffreys"
    sigma_var: list | None = None
    s_bounds: list | None = None


@dataclass
class SamplerConfig:
    model: str = "nonnested"
    t0: int = 100
    n_iter: int = 1000
    seed: int = 0
    ell0: list | None = None
    a0: list | None = None
    delta0: list | None = None
    sigma0: list | None = None
    s0: list | None = None
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    priors: Priors = field(default_factory=Priors)
    burnin_frac: float = 0.5
    adapt: bool = False
    flat_likelihood: bool = False
    jitter: JitterPolicy = DEFAULT_JITTER

    def validate(self, d, sigma_size, has_test=False, ell_default=None):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.t0 < 1:
            raise ValueError("t0 must be >= 1")
        if not 0 <= self.burnin_frac < 1:
            raise ValueError("burnin_frac must lie in [0, 1)")
        if self.priors.sigma not in ("jeffreys", "gaussian"):
            raise ValueError(f"unknown sigma prior {self.priors.sigma!r}")
        for name, size in [("ell0", d), ("a0", d), ("delta0", d), ("s0", d)]:
            val = getattr(self, name)
            if val is not None and len(val) != size:
                raise ValueError(f"{name} needs {size} values, got {len(val)}")
        if self.sigma0 is not None and sigma_size and len(self.sigma0) != (1 if sigma_size == 1 else 3):
            raise ValueError("sigma0 must hold 1 value (size-1 mode) or 3 values (sigma11, sigma22, rho)")
        if has_test:
            b = self.priors.s_bounds
            if b is None or len(b) != d:
                raise ValueError(f"joint prediction needs {d} prior bounds for s_test")
            for lo, hi in b:
                if not lo <= hi:
                    raise ValueError(f"invalid s_test bounds [{lo}, {hi}]")
        resolved = self.resolved(d, sigma_size, ell_default)
        for name, vals in resolved.items():
            if name.startswith("v_") and vals is not None and np.any(np.asarray(vals) < 0):
                raise ValueError(f"proposal variances {name} must be >= 0")
        return resolved

    def resolved(self, d, sigma_size, ell_default=None):
        """Fill every unset seed, prior and proposal setting with its default.

        ``ell_default`` (e.g. :meth:`Target.default_ell`) replaces the unit
        seed for the length scales.
        """
        ones = [1.0] * d
        ell0 = list(self.ell0 or (ell_default if ell_default is not None else ones))
        pc = self.proposal
        # a is the random-walk variance of ell, so it starts at the fixed one
        v_ell = list(pc.v_ell or [(0.05 * x) ** 2 for x in ell0])
        a0 = list(self.a0 or v_ell)
        delta0 = list(self.delta0 or [max(1.0, self.t0 / 10.0)] * d)
        if sigma_size == 0:
            sigma0 = []
        elif self.sigma0 is not None:
            sigma0 = list(self.sigma0)
        else:
            sigma0 = [1.0] if sigma_size == 1 else [1.0, 1.0, 0.0]
        pr = self.priors
        ell_var = list(pr.ell_var or [(100.0 * x) ** 2 for x in ell0])
        a_var = list(pr.a_var or [(100.0 * x) ** 2 for x in a0])
        delta_var = list(pr.delta_var or [(100.0 * x) ** 2 for x in delta0])
        sigma_var = list(pr.sigma_var or [(100.0 * max(abs(x), 1.0)) ** 2 for x in sigma0])
        bounds = [tuple(b) for b in pr.s_bounds] if pr.s_bounds is not None else None
        if self.s0 is not None:
            s0 = list(self.s0)
        elif bounds is not None:
            s0 = [0.5 * (lo + hi) for lo, hi in bounds]
        else:
            s0 = None
        out = {
            "ell0": ell0,
            "a0": a0,
            "delta0": delta0,
            "sigma0": sigma0,
            "s0": s0,
            "ell_var": ell_var,
            "a_var": a_var,
            "delta_var": delta_var,
            "sigma_var": sigma_var,
            "s_bounds": bounds,
            "v_ell": v_ell,
            "v_a": list(pc.v_a or [(0.25 * x) ** 2 for x in a0]),
            "v_delta": list(pc.v_delta or [(0.1 * x) ** 2 for x in delta0]),
            "v_sigma": list(pc.v_sigma or [(0.05 * max(abs(x), 0.1)) ** 2 for x in sigma0]),
            "v_s": list(pc.v_s or ([(0.1 * (hi - lo)) ** 2 for lo, hi in bounds] if bounds else [])),
        }
        return out

    def to_dict(self):
        return asdict(self)

    def digest(self):
        """SHA-256 of the canonical serialisation."""
        from .io import config_to_text

        return hashlib.sha256(config_to_text(self).encode()).hexdigest()


# ---------------------------------------------------------------------------
# posterior target


class Target:
    """Training (optionally augmented) data plus everything frozen before sampling.

    ``strategies`` names the covariance strategy of every mode; the last mode
    must be ``"kernel"`` and carries the design points.  When ``test_slice``
    is given it is appended on the design-point mode and its design point is
    an extra unknown.
    """

    def __init__(self, data, points, strategies, test_slice=None, flat=False,
                 jitter=DEFAULT_JITTER):
        data = np.asarray(data, dtype=float)
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        strategies = [s.lower() for s in strategies]
        k = data.ndim
        if len(strategies) != k:
            raise ValueError(f"need {k} covariance strategies, got {len(strategies)}")
        if strategies[-1] != "kernel" or "kernel" in strategies[:-1]:
            raise ValueError("exactly the last mode must be kernel-parametrised")
        bad = [s for s in strategies if s not in STRATEGIES]
        if bad:
            raise ValueError(f"unknown covariance strategies {bad}")
        direct = [i for i, s in enumerate(strategies) if s == "direct"]
        if len(direct) > 1:
            raise ValueError("at most one directly learnt covariance mode is supported")
        if points.shape[0] != data.shape[-1]:
            raise ValueError(
                f"{points.shape[0]} design points for a design-point mode of size {data.shape[-1]}"
            )
        self.direct_mode = direct[0] if direct else None
        self.sigma_size = data.shape[self.direct_mode] if direct else 0
        if self.sigma_size > 2:
            raise ValueError("directly learnt covariance mode must have size 1 or 2")
        self.strategies = strategies
        self.points = points
        self.d = points.shape[1]
        self.flat = flat
        self.jitter = jitter
        self.training = data
        self.has_test = test_slice is not None
        if self.has_test:
            test_slice = np.asarray(test_slice, dtype=float)
            if test_slice.shape[:-1] != data.shape[:-1]:
                test_slice = test_slice.reshape(data.shape[:-1] + (1,))
            data = np.concatenate([data, test_slice.reshape(data.shape[:-1] + (1,))], axis=-1)
        self.data = data
        self.dims = data.shape
        self.mean = empirical_mean(data, sample_mode=-1)
        residual = data - self.mean

        # empirical modes are frozen: whiten along them once
        emp_factors = [None] * k
        self.empirical = {}
        for mode, s in enumerate(strategies):
            if s == "empirical":
                cov = empirical_covariance(data, mode, sample_mode=-1)
                self.empirical[mode] = cov
                emp_factors[mode] = cholesky(cov, jitter)
        self._frozen_log_dets = {m: f.log_det for m, f in enumerate(emp_factors) if f is not None}
        self.residual = residual
        self._partial = whiten(residual, emp_factors)
        self._kernel_cache = {}
        self._direct_cache = {}

    # -- factor caches ---------------------------------------------------
    def default_ell(self):
        """Per-coordinate median of the nonzero squared design-point differences."""
        out = []
        for c in range(self.d):
            x = self.points[:, c]
            diff = (x[:, None] - x[None, :])[np.triu_indices(x.size, 1)] ** 2
            diff = diff[diff > 0]
            out.append(float(np.median(diff)) if diff.size else 1.0)
        return out

    def _kernel_factor(self, q, s_test):
        key = (q.tobytes(), None if s_test is None else np.asarray(s_test, float).tobytes())
        f = self._kernel_cache.get(key)
        if f is None:
            pts = self.points
            if self.has_test:
                pts = np.vstack([pts, np.asarray(s_test, dtype=float)[None, :]])
            try:
                f = cholesky(input_kernel_matrix(q, pts), self.jitter)
            except NotPositiveDefinite as exc:
                raise RejectedProposal(str(exc)) from exc
            if len(self._kernel_cache) > 8:
                self._kernel_cache.clear()
            self._kernel_cache[key] = f
        return f

    def _direct_factor(self, sigma):
        key = sigma.as_vector().tobytes()
        f = self._direct_cache.get(key)
        if f is None:
            try:
                f = cholesky(sigma.matrix(), self.jitter)
            except NotPositiveDefinite as exc:
                raise RejectedProposal(str(exc)) from exc
            if len(self._direct_cache) > 8:
                self._direct_cache.clear()
            self._direct_cache[key] = f
        return f

    def loglik(self, ell, sigma=None, s_test=None):
        """Tensor-normal log-likelihood at length scales ``ell`` (``q = 1/ell``)."""
        if self.flat:
            return 0.0
        q = 1.0 / np.asarray(ell, dtype=float)
        factors = [None] * len(self.dims)
        factors[-1] = self._kernel_factor(q, s_test)
        if self.direct_mode is not None:
            factors[self.direct_mode] = self._direct_factor(sigma)
        z = whiten(self._partial, factors)
        log_dets = []
        for mode in range(len(self.dims)):
            if factors[mode] is not None:
                log_dets.append(factors[mode].log_det)
            else:
                log_dets.append(self._frozen_log_dets.get(mode, 0.0))
        return log_normaliser(self.dims, log_dets) - 0.5 * frobenius_sq(z)

    def model(self, ell, sigma=None, s_test=None):
        """The equivalent :class:`~nestedgp.likelihood.TensorNormalModel`."""
        from .likelihood import TensorNormalModel

        pts = self.points
        if self.has_test:
            pts = np.vstack([pts, np.asarray(s_test, dtype=float)[None, :]])
        covs = []
        for mode, s in enumerate(self.strategies):
            if s == "kernel":
                covs.append(KernelParametrised(pts, 1.0 / np.asarray(ell, dtype=float)))
            elif s == "empirical":
                covs.append(Empirical(self.empirical[mode]))
            else:
                covs.append(DirectMCMC(sigma))
        return TensorNormalModel(self.mean, covs)


# ---------------------------------------------------------------------------
# chain state


@dataclass
class ChainState:
    """All unknowns at iteration ``t`` plus lookback buffers and the RNG."""

    t: int
    ell: np.ndarray
    a: np.ndarray
    delta: np.ndarray
    sigma: Sigma1Params | None
    s_test: np.ndarray | None
    lookbacks: list
    rng: np.random.Generator
    loglik: float = float("nan")
    accepted: dict = field(default_factory=dict)

    def snapshot(self):
        """Values only (no RNG, no buffers) for comparisons and dumps."""
        return {
            "t": self.t,
            "ell": self.ell.tolist(),
            "a": self.a.tolist(),
            "delta": self.delta.tolist(),
            "sigma": None if self.sigma is None else self.sigma.as_vector().tolist(),
            "s_test": None if self.s_test is None else self.s_test.tolist(),
            "loglik": self.loglik,
        }


def make_rng(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


def init_state(target, cfg):
    """Iteration-0 state with all unknowns at their seed values."""
    r = cfg.validate(target.d, target.sigma_size, target.has_test, target.default_ell())
    ell = np.array(r["ell0"], dtype=float)
    if np.any(ell <= 0):
        raise ValueError("seed length scales must be positive")
    sigma = Sigma1Params.from_vector(r["sigma0"]) if target.sigma_size else None
    if sigma is not None and not sigma.is_valid():
        raise ValueError(f"seed covariance {sigma} is not positive definite")
    s_test = np.array(r["s0"], dtype=float) if target.has_test else None
    buffers = [LookbackBuffer(cfg.t0, [x]) for x in ell]
    state = ChainState(
        t=0,
        ell=ell,
        a=np.array(r["a0"], dtype=float),
        delta=np.array(r["delta0"], dtype=float),
        sigma=sigma,
        s_test=s_test,
        lookbacks=buffers,
        rng=make_rng(cfg.seed),
    )
    state.loglik = 0.0 if cfg.flat_likelihood else target.loglik(state.ell, state.sigma, state.s_test)
    return state


# ---------------------------------------------------------------------------
# log priors


def _gauss_logpdf(x, mean, var):
    x, mean, var = (np.asarray(v, dtype=float) for v in (x, mean, var))
    return float(np.sum(-0.5 * (x - mean) ** 2 / var))


def _log_prior_positive(x, mean, var):
    """Gaussian centred on the seed, truncated to positive values."""
    if np.any(np.asarray(x) <= 0):
        return -math.inf
    return _gauss_logpdf(x, mean, var)


def _log_prior_sigma(sigma, r, kind):
    if not sigma.is_valid():
        return -math.inf
    if kind == "gaussian":
        return _gauss_logpdf(sigma.as_vector(), r["sigma0"], r["sigma_var"])
    # Jeffreys |Sigma|^{-(p+1)/2} on (sigma11, sigma22, sigma12), times the
    # Jacobian sqrt(sigma11 sigma22) of sigma12 = rho sqrt(sigma11 sigma22)
    if sigma.size == 1:
        return -math.log(sigma.sigma11)
    prod = sigma.sigma11 * sigma.sigma22
    det = prod * (1.0 - sigma.rho ** 2)
    return -1.5 * math.log(det) + 0.5 * math.log(prod)


def _log_prior_s(s, bounds):
    for x, (lo, hi) in zip(s, bounds):
        if not lo <= x <= hi:
            return -math.inf
    return 0.0


def _truncnorm_left0(rng, mean, var):
    """Draw from N(mean, var) truncated to (0, inf), vectorised over components."""
    sd = np.sqrt(var)
    lo = ndtr(-mean / sd)
    u = rng.random(mean.shape)
    p = lo + u * (1.0 - lo)
    draw = mean + sd * ndtri(np.clip(p, 1e-300, 1.0 - 1e-16))
    return np.maximum(draw, np.finfo(float).tiny)


def _accept(rng, log_r):
    """Metropolis test; one uniform is consumed whether or not ``log_r`` is finite."""
    u = rng.random()
    if log_r == -math.inf:
        return False
    return u == 0.0 or math.log(u) < log_r


# ---------------------------------------------------------------------------
# blocks


class _Context:
    """Resolved configuration and adaptive proposal scales for one chain."""

    def __init__(self, target, cfg):
        self.target = target
        self.cfg = cfg
        self.r = cfg.validate(target.d, target.sigma_size, target.has_test, target.default_ell())
        self.scale = {"ell": 1.0, "hyper": 1.0, "sigma": 1.0, "s": 1.0}
        self.flat = cfg.flat_likelihood or target.flat

    def var(self, name, block):
        return np.asarray(self.r[name], dtype=float) * self.scale[block]


def _loglik_or_reject(ctx, ell, sigma, s_test):
    if ctx.flat:
        return 0.0
    try:
        val = ctx.target.loglik(ell, sigma, s_test)
    except RejectedProposal:
        return None
    if math.isnan(val):
        raise FloatingPointError("log-likelihood is NaN")
    return val


def _ell_block(state, ctx, variance):
    rng = state.rng
    r = ctx.r
    prop = state.ell + np.sqrt(variance) * rng.standard_normal(state.ell.shape)
    log_r = -math.inf
    lp_new = _log_prior_positive(prop, r["ell0"], r["ell_var"])
    ll_new = None
    if np.isfinite(lp_new):
        ll_new = _loglik_or_reject(ctx, prop, state.sigma, state.s_test)
        if ll_new is not None:
            lp_old = _log_prior_positive(state.ell, r["ell0"], r["ell_var"])
            log_r = ll_new + lp_new - state.loglik - lp_old
    ok = _accept(rng, log_r)
    if ok:
        state.ell = prop
        state.loglik = ll_new
    state.accepted["ell"] = ok


def _hyper_block(state, ctx):
    rng = state.rng
    r = ctx.r
    v_a = ctx.var("v_a", "hyper")
    v_delta = ctx.var("v_delta", "hyper")
    a_new = _truncnorm_left0(rng, state.a, v_a)
    delta_new = state.delta + np.sqrt(v_delta) * rng.standard_normal(state.delta.shape)
    log_r = -math.inf
    lp_new = _log_prior_positive(a_new, r["a0"], r["a_var"]) + _log_prior_positive(
        delta_new, r["delta0"], r["delta_var"]
    )
    if np.isfinite(lp_new):
        lp_old = _log_prior_positive(state.a, r["a0"], r["a_var"]) + _log_prior_positive(
            state.delta, r["delta0"], r["delta_var"]
        )
        # MH correction for the left-truncated proposal: q(old|new) / q(new|old)
        sd = np.sqrt(v_a)
        correction = float(np.sum(log_ndtr(state.a / sd) - log_ndtr(a_new / sd)))
        try:
            if ctx.flat:
                lb_new = lb_old = 0.0
            else:
                lb_new = lb_old = 0.0
                for c, buf in enumerate(state.lookbacks):
                    lb_new += lookback_log_prior(buf, ScalarGpHyper(a_new[c], delta_new[c]), ctx.cfg.jitter)
                    lb_old += lookback_log_prior(buf, ScalarGpHyper(state.a[c], state.delta[c]), ctx.cfg.jitter)
            log_r = lb_new + lp_new - lb_old - lp_old + correction
        except RejectedProposal:
            log_r = -math.inf
    ok = _accept(rng, log_r)
    if ok:
        state.a = a_new
        state.delta = delta_new
    state.accepted["hyper"] = ok


def _sigma_block(state, ctx):
    if state.sigma is None:
        return
    rng = state.rng
    r = ctx.r
    cur = state.sigma.as_vector()
    prop_vec = cur + np.sqrt(ctx.var("v_sigma", "sigma")) * rng.standard_normal(cur.shape)
    prop = Sigma1Params.from_vector(prop_vec)
    kind = ctx.cfg.priors.sigma
    log_r = -math.inf
    lp_new = _log_prior_sigma(prop, r, kind)
    ll_new = None
    if np.isfinite(lp_new):
        ll_new = _loglik_or_reject(ctx, state.ell, prop, state.s_test)
        if ll_new is not None:
            log_r = ll_new + lp_new - state.loglik - _log_prior_sigma(state.sigma, r, kind)
    ok = _accept(rng, log_r)
    if ok:
        state.sigma = prop
        state.loglik = ll_new
    state.accepted["sigma"] = ok


def _s_block(state, ctx):
    if state.s_test is None:
        return
    rng = state.rng
    prop = state.s_test + np.sqrt(ctx.var("v_s", "s")) * rng.standard_normal(state.s_test.shape)
    log_r = -math.inf
    ll_new = None
    if np.isfinite(_log_prior_s(prop, ctx.r["s_bounds"])):
        ll_new = _loglik_or_reject(ctx, state.ell, state.sigma, prop)
        if ll_new is not None:
            log_r = ll_new - state.loglik
    ok = _accept(rng, log_r)
    if ok:
        state.s_test = prop
        state.loglik = ll_new
    state.accepted["s"] = ok


def _finish(state):
    state.t += 1
    for c, buf in enumerate(state.lookbacks):
        buf.push(state.ell[c])
    return state


def step_nonnested(state, target, cfg, ctx=None):
    """One two-block sweep: length scales, then direct covariance elements.

    ``state`` is updated in place and returned.
    """
    ctx = ctx or _Context(target, cfg)
    state.accepted = {}
    _ell_block(state, ctx, ctx.var("v_ell", "ell"))
    _sigma_block(state, ctx)
    _s_block(state, ctx)
    return _finish(state)


def step_nested(state, target, cfg, ctx=None):
    """One sweep of the nested model.

    Before the lookback buffers are full (``t < t0``) this is the plain
    random-walk sweep of :func:`step_nonnested`.  Afterwards the scalar-GP
    hyperparameters are updated first and the length scales are proposed
    with variance equal to the current amplitudes ``a_c``.
    """
    ctx = ctx or _Context(target, cfg)
    state.accepted = {}
    if not all(buf.full for buf in state.lookbacks):
        _ell_block(state, ctx, ctx.var("v_ell", "ell"))
    else:
        _hyper_block(state, ctx)
        _ell_block(state, ctx, state.a.copy())
    _sigma_block(state, ctx)
    _s_block(state, ctx)
    return _finish(state)


# ---------------------------------------------------------------------------
# run orchestration


@dataclass
class RunReport:
    """Per-iteration traces of one chain (or several merged chains)."""

    columns: dict
    d: int
    seed: int
    config_hash: str = ""
    model: str = "nonnested"
    wall_clock: float = 0.0
    chain_ids: np.ndarray | None = None

    @property
    def n_iter(self):
        return len(self.columns["iter"])

    def trace(self, name):
        return self.columns[name]

    def acceptance_rates(self):
        out = {}
        for name, col in self.columns.items():
            if name.startswith("accept_") and not np.all(np.isnan(col)):
                out[name] = float(np.nanmean(col))
        return out

    def parameter_names(self):
        """Learnt parameters that have at least one recorded value."""
        skip = {"iter", "loglik"}
        return [
            n for n, c in self.columns.items()
            if n not in skip and not n.startswith("accept_") and not np.all(np.isnan(c))
        ]

    def to_csv(self, path):
        from .io import write_trace_csv

        write_trace_csv(self, path)


def trace_columns(d):
    cols = ["iter", "loglik"]
    cols += [f"q_{c}" for c in range(1, d + 1)]
    cols += [f"ell_{c}" for c in range(1, d + 1)]
    cols += [f"a_{c}" for c in range(1, d + 1)]
    cols += [f"delta_{c}" for c in range(1, d + 1)]
    cols += ["sigma11", "sigma22", "rho"]
    cols += [f"s{c}_test" for c in range(1, d + 1)]
    cols += ["accept_block1", "accept_block2", "accept_hyper", "accept_stest"]
    return cols


class _Recorder:
    def __init__(self, d, n_iter, nested):
        self.d = d
        self.nested = nested
        self.cols = {name: np.full(n_iter, np.nan) for name in trace_columns(d)}
        self.i = 0

    def record(self, state):
        i, d, cols = self.i, self.d, self.cols
        cols["iter"][i] = state.t
        cols["loglik"][i] = state.loglik
        for c in range(d):
            cols[f"q_{c + 1}"][i] = 1.0 / state.ell[c]
            cols[f"ell_{c + 1}"][i] = state.ell[c]
            if self.nested:
                cols[f"a_{c + 1}"][i] = state.a[c]
                cols[f"delta_{c + 1}"][i] = state.delta[c]
            if state.s_test is not None:
                cols[f"s{c + 1}_test"][i] = state.s_test[c]
        if state.sigma is not None:
            cols["sigma11"][i] = state.sigma.sigma11
            if state.sigma.size == 2:
                cols["sigma22"][i] = state.sigma.sigma22
                cols["rho"][i] = state.sigma.rho
        acc = state.accepted
        for key, col in [("ell", "accept_block1"), ("sigma", "accept_block2"),
                         ("hyper", "accept_hyper"), ("s", "accept_stest")]:
            if key in acc:
                cols[col][i] = float(acc[key])
        self.i += 1


def _adapt(ctx, recorder, t):
    """Rescale fixed proposal variances toward 20-40% acceptance during burn-in."""
    lo = recorder.i - ADAPT_WINDOW
    for block, col in [("ell", "accept_block1"), ("sigma", "accept_block2"),
                       ("hyper", "accept_hyper"), ("s", "accept_stest")]:
        window = recorder.cols[col][lo:recorder.i]
        window = window[~np.isnan(window)]
        if window.size < ADAPT_WINDOW // 2:
            continue
        rate = window.mean()
        if rate < 0.2:
            ctx.scale[block] *= 0.5
        elif rate > 0.4:
            ctx.scale[block] *= 2.0


def run_chain(target, cfg, n_iter=None, seed=None, state=None):
    """Run one chain and return its :class:`RunReport`.

    Deterministic given ``(seed, cfg, data)``.
    """
    if n_iter is not None or seed is not None:
        cfg = replace(cfg, n_iter=cfg.n_iter if n_iter is None else n_iter,
                      seed=cfg.seed if seed is None else seed)
    ctx = _Context(target, cfg)
    state = state or init_state(target, cfg)
    nested = cfg.model == "nested"
    step = step_nested if nested else step_nonnested
    rec = _Recorder(target.d, cfg.n_iter, nested)
    burnin = int(cfg.burnin_frac * cfg.n_iter)
    start = time.perf_counter()
    for _ in range(cfg.n_iter):
        try:
            step(state, target, cfg, ctx)
        except FloatingPointError as exc:
            raise FloatingPointError(f"{exc}; state: {state.snapshot()}") from exc
        rec.record(state)
        if cfg.adapt and rec.i <= burnin and rec.i % ADAPT_WINDOW == 0:
            _adapt(ctx, rec, state.t)
    report = RunReport(
        columns=rec.cols,
        d=target.d,
        seed=cfg.seed,
        config_hash=cfg.digest(),
        model=cfg.model,
        wall_clock=time.perf_counter() - start,
    )
    report.final_state = state
    return report


def _run_one(args):
    target, cfg = args
    report = run_chain(target, cfg)
    report.final_state = None
    return report


def run_chains(target, cfg, n_chains, max_workers=None):
    """Independent chains with seeds ``seed, seed+1, ...`` run in parallel."""
    jobs = [(target, replace(cfg, seed=cfg.seed + i)) for i in range(n_chains)]
    if n_chains == 1:
        return [_run_one(jobs[0])]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_run_one, jobs))


def merge_reports(reports):
    """Concatenate chains; ``chain_ids`` tags every row with its chain seed."""
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to merge")
    d = reports[0].d
    cols = {name: np.concatenate([r.columns[name] for r in reports]) for name in reports[0].columns}
    ids = np.concatenate([
        r.chain_ids if r.chain_ids is not None else np.full(r.n_iter, r.seed)
        for r in reports
    ])
    return RunReport(
        columns=cols,
        d=d,
        seed=reports[0].seed,
        config_hash=reports[0].config_hash,
        model=reports[0].model,
        wall_clock=sum(r.wall_clock for r in reports),
        chain_ids=ids,
    )
