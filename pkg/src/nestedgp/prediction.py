"""Inverse prediction of the test design point, forward sampling and model checks."""

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .linalg import cholesky, solve_triangular
from .likelihood import Sigma1Params, empirical_covariance, empirical_mean
from .kernels import input_kernel_matrix
from .sampler import (
    ADAPT_WINDOW,
    ChainState,
    RunReport,
    Target,
    _Context,
    _Recorder,
    _adapt,
    _s_block,
    make_rng,
    run_chain,
)
from .tensor import frobenius_sq, mode_product

__all__ = [
    "AugmentedData",
    "ModalSnapshot",
    "SliceReport",
    "model_check_slice",
    "predict_from_modal",
    "predict_joint",
    "sample_tensor_normal",
]


@dataclass(frozen=True)
class AugmentedData:
    """Training tensor, its design points, and one test slice of unknown location."""

    training: np.ndarray
    points: np.ndarray
    test_slice: np.ndarray
    strategies: tuple

    def target(self, flat=False):
        return Target(self.training, self.points, self.strategies, test_slice=self.test_slice,
                      flat=flat)

    @property
    def dims(self):
        t = np.asarray(self.training)
        return t.shape[:-1] + (t.shape[-1] + 1,)


@dataclass(frozen=True)
class ModalSnapshot:
    """Point values of the kernel and direct-covariance parameters."""

    q: tuple
    sigma: Sigma1Params | None = None

    @classmethod
    def from_summary(cls, summary, kind="mode"):
        """Pick each parameter's ``mode`` or ``mean`` from a posterior summary."""
        if kind not in ("mode", "mean"):
            raise ValueError("kind must be 'mode' or 'mean'")
        qs = []
        c = 1
        while f"q_{c}" in summary.params:
            qs.append(getattr(summary.params[f"q_{c}"], kind))
            c += 1
        if not qs:
            raise ValueError("summary has no q_c parameters")
        sigma = None
        if "sigma11" in summary.params:
            s11 = getattr(summary.params["sigma11"], kind)
            if "sigma22" in summary.params:
                sigma = Sigma1Params(s11, getattr(summary.params["sigma22"], kind),
                                     getattr(summary.params["rho"], kind))
            else:
                sigma = Sigma1Params(s11)
        return cls(tuple(float(x) for x in qs), sigma)

    @property
    def ell(self):
        return 1.0 / np.asarray(self.q, dtype=float)


def predict_joint(aug, cfg):
    """Sample ``s_test`` jointly with all GP parameters given training + test data."""
    return run_chain(aug.target(flat=cfg.flat_likelihood), cfg)


def predict_from_modal(aug, snap, cfg):
    """Sample only ``s_test``, with every GP parameter frozen at ``snap``."""
    target = aug.target(flat=cfg.flat_likelihood)
    ctx = _Context(target, cfg)
    r = ctx.r
    if target.sigma_size and snap.sigma is None:
        raise ValueError("snapshot lacks the directly learnt covariance")
    ell = snap.ell.copy()
    if ell.size != target.d:
        raise ValueError(f"snapshot has {ell.size} length scales, data has d={target.d}")
    state = ChainState(
        t=0, ell=ell, a=np.full(target.d, np.nan), delta=np.full(target.d, np.nan),
        sigma=snap.sigma if target.sigma_size else None,
        s_test=np.array(r["s0"], dtype=float), lookbacks=[], rng=make_rng(cfg.seed),
    )
    state.loglik = 0.0 if ctx.flat else target.loglik(state.ell, state.sigma, state.s_test)
    rec = _Recorder(target.d, cfg.n_iter, nested=False)
    burnin = int(cfg.burnin_frac * cfg.n_iter)
    for _ in range(cfg.n_iter):
        state.accepted = {}
        _s_block(state, ctx)
        state.t += 1
        rec.record(state)
        if cfg.adapt and rec.i <= burnin and rec.i % ADAPT_WINDOW == 0:
            _adapt(ctx, rec, state.t)
    report = RunReport(columns=rec.cols, d=target.d, seed=cfg.seed,
                       config_hash=cfg.digest(), model="modal")
    return report


def sample_tensor_normal(model, seed=None, rng=None):
    """Draw ``M + Z x_1 A_1 ... x_k A_k`` with ``Z`` i.i.d. standard normal."""
    rng = rng if rng is not None else make_rng(0 if seed is None else seed)
    z = rng.standard_normal(model.dims)
    for mode, f in enumerate(model.factors()):
        z = mode_product(z, f.L, mode)
    return model.mean + z


@dataclass
class SliceReport:
    """Observed versus predicted entries of one held-out slice."""

    slice_index: int
    indices: np.ndarray
    observed: np.ndarray
    predicted: np.ndarray
    acceptance: float

    @property
    def pearson_r(self):
        return float(np.corrcoef(self.observed, self.predicted)[0, 1])

    @property
    def rmse(self):
        return float(np.sqrt(np.mean((self.predicted - self.observed) ** 2)))

    @property
    def slope(self):
        """Least-squares slope of predicted on observed."""
        o = self.observed - self.observed.mean()
        p = self.predicted - self.predicted.mean()
        return float(o @ p / (o @ o))

    def to_csv(self, path):
        k1 = self.indices.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"mode{j + 1}_idx" for j in range(max(k1, 2))] + ["observed", "predicted"])
            for idx, o, p in zip(self.indices, self.observed, self.predicted):
                cells = [str(i + 1) for i in idx] + [""] * (2 - k1)
                w.writerow(cells + [repr(float(o)), repr(float(p))])

    def write_summary(self, path):
        with open(path, "w") as fh:
            fh.write(f"slice={self.slice_index + 1}\n")
            fh.write(f"r={self.pearson_r!r}\n")
            fh.write(f"rmse={self.rmse!r}\n")
            fh.write(f"slope={self.slope!r}\n")
            fh.write(f"acceptance={self.acceptance!r}\n")


class _SliceDensity:
    """Tensor-normal log-density as a function of one slice on the last mode.

    With ``z = W(R)`` linear in the residual, only the slice term changes:
    ``||z||^2 = ||z_rest||^2 + 2 <z_rest, w(x) g^T> + ||w(x)||^2 ||g||^2`` with
    ``w`` the within-slice whitening and ``g = L_last^{-1} e_q``.
    """

    def __init__(self, data, mean, factors, q):
        k = data.ndim
        self.q = q
        self.factors = factors
        self.mean_slice = mean[..., q]
        resid = data - mean
        resid[..., q] = 0.0
        z = resid
        for mode, f in enumerate(factors):
            z = solve_triangular(f, z, mode)
        e = np.zeros(data.shape[-1])
        e[q] = 1.0
        self.g = solve_triangular(factors[-1], e, 0)
        self.gg = float(self.g @ self.g)
        self.rest = frobenius_sq(z)
        # <z, w g^T> = <z g, w>
        self.zg = np.tensordot(z, self.g, axes=([k - 1], [0]))
        from .likelihood import log_normaliser

        self.const = log_normaliser(data.shape, [f.log_det for f in factors])

    def whiten_slice(self, x):
        w = x - self.mean_slice
        for mode, f in enumerate(self.factors[:-1]):
            w = solve_triangular(f, w, mode)
        return w

    def logpdf(self, x):
        w = self.whiten_slice(x)
        quad = self.rest + 2.0 * float(np.sum(self.zg * w)) + frobenius_sq(w) * self.gg
        return self.const - 0.5 * quad

    def colour(self, z):
        for mode, f in enumerate(self.factors[:-1]):
            z = mode_product(z, f.L, mode)
        return z


def model_check_slice(data, points, strategies, slice_index, snap, n_iter=20000,
                      n_last=1000, seed=0, step=None):
    """Re-predict one slice of the training tensor from all other slices.

    Runs a random-walk Metropolis chain over the slice entries with uniform
    priors and every GP parameter frozen at ``snap``; the prediction for each
    entry is the mean of the last ``n_last`` samples.  The chain starts at
    the training slice whose design point is most correlated with that of
    the held-out slice.
    """
    data = np.asarray(data, dtype=float)
    n = data.shape[-1]
    if not 0 <= slice_index < n:
        raise IndexError(f"slice {slice_index + 1} outside 1..{n}")
    if n < 3:
        raise ValueError("model checking needs at least 3 slices")
    strategies = [s.lower() for s in strategies]
    rest = np.delete(data, slice_index, axis=-1)
    mean = empirical_mean(rest, sample_mode=-1)
    mean = np.concatenate([mean[..., :1]] * n, axis=-1)
    factors = []
    kernel = input_kernel_matrix(snap.q, points)
    for mode, s in enumerate(strategies):
        if s == "kernel":
            f = cholesky(kernel)
        elif s == "empirical":
            f = cholesky(empirical_covariance(rest, mode, sample_mode=-1))
        else:
            f = cholesky(snap.sigma.matrix())
        factors.append(f)
    dens = _SliceDensity(data, mean, factors, slice_index)

    span = rest.max() - rest.min()
    lo, hi = rest.min() - span, rest.max() + span
    shape = data.shape[:-1]
    p = int(np.prod(shape))
    scale = step if step is not None else 2.38 / math.sqrt(p) / math.sqrt(dens.gg)
    rng = make_rng(seed)
    # start from the slice whose design point correlates most with the held one
    corr = kernel[slice_index].copy()
    corr[slice_index] = -np.inf
    x = np.clip(data[..., int(np.argmax(corr))], lo, hi)
    cur = dens.logpdf(x)
    n_last = min(n_last, n_iter)
    acc_sum = np.zeros(shape)
    accepted = 0
    for it in range(n_iter):
        prop = x + scale * dens.colour(rng.standard_normal(shape))
        u = rng.random()
        if np.all((prop >= lo) & (prop <= hi)):
            new = dens.logpdf(prop)
            if u == 0.0 or math.log(u) < new - cur:
                x, cur = prop, new
                accepted += 1
        if it >= n_iter - n_last:
            acc_sum += x
    predicted = acc_sum / n_last
    idx = np.array(list(np.ndindex(*shape)))
    observed = data[..., slice_index]
    return SliceReport(
        slice_index=slice_index,
        indices=idx,
        observed=np.array([observed[tuple(i)] for i in idx]),
        predicted=np.array([predicted[tuple(i)] for i in idx]),
        acceptance=accepted / n_iter,
    )
