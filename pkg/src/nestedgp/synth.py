"""Synthetic tensor datasets drawn from the tensor-normal model itself."""

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import input_kernel_matrix
from .likelihood import DirectMCMC, Empirical, KernelParametrised, Sigma1Params, TensorNormalModel
from .prediction import sample_tensor_normal
from .sampler import make_rng

__all__ = ["SynthResult", "default_design", "synthesize"]

# design box for d = 2: radius in model units, azimuth in radians
GALACTIC_BOX = ((1.7, 2.3), (0.0, math.pi / 2))


@dataclass
class SynthResult:
    data: np.ndarray
    points: np.ndarray
    meta: dict = field(default_factory=dict)
    test_slice: np.ndarray | None = None
    s_test: np.ndarray | None = None
    regimes: np.ndarray | None = None
    mean: np.ndarray | None = None
    model: object = None


def default_design(n, q, rng, box=None, target_corr=0.5):
    """Uniform random design points in a box.

    For ``d = 2`` the box defaults to ``GALACTIC_BOX``.  Otherwise axis ``c``
    starts at 0 and spans ``n^(1/d) * sqrt(-log(target_corr) / q_c)``, so that
    neighbouring points correlate at roughly ``target_corr``.
    """
    q = np.asarray(q, dtype=float)
    d = q.size
    if box is None and d == 2:
        box = GALACTIC_BOX
    if box is None:
        lo = np.zeros(d)
        width = n ** (1.0 / d) * np.sqrt(-math.log(target_corr) / q)
    else:
        box = np.asarray(box, dtype=float).reshape(d, 2)
        lo, width = box[:, 0], box[:, 1] - box[:, 0]
    return lo + rng.random((n, d)) * width


def _random_correlation(m, rng):
    w = rng.standard_normal((m, m))
    s = w @ w.T / m + np.eye(m)
    dinv = 1.0 / np.sqrt(np.diag(s))
    return s * dinv[:, None] * dinv[None, :]


def synthesize(dims, q, seed=0, sigma1=(1.0, 0.4, -0.05), mean_scale=2.0,
               points=None, with_test=False, s_test=None, discontinuity=None,
               rough_factor=25.0, jump=3.0):
    """Draw a ``dims``-shaped tensor whose last mode runs over design points.

    Mode 0 gets the 2x2 (or 1x1) covariance ``sigma1``; middle modes get a
    random correlation matrix; the last mode gets the SQE kernel at ``q``.
    The mean tensor is constant along the design-point mode.

    ``discontinuity="two-regime"`` splits the design points at the median of
    the first coordinate: the upper regime uses ``q * rough_factor``, is
    uncorrelated with the lower one, and its mean is shifted by ``jump``.

    With ``with_test`` one extra slice is drawn jointly at ``s_test`` (a
    random point of the design box by default) and returned separately.
    """
    dims = tuple(int(m) for m in dims)
    if len(dims) < 2 or any(m < 1 for m in dims):
        raise ValueError(f"invalid dims {dims}")
    q = np.atleast_1d(np.asarray(q, dtype=float))
    rng = make_rng(seed)
    n = dims[-1]
    if points is None:
        points = default_design(n, q, rng)
    points = np.asarray(points, dtype=float).reshape(n, q.size)
    all_points = points
    if with_test:
        if s_test is None:
            lo, hi = points.min(axis=0), points.max(axis=0)
            s_test = lo + (0.25 + 0.5 * rng.random(q.size)) * (hi - lo)
        s_test = np.asarray(s_test, dtype=float).reshape(q.size)
        all_points = np.vstack([points, s_test[None, :]])
    n_all = all_points.shape[0]

    covs = []
    if dims[0] == 1:
        covs.append(DirectMCMC(Sigma1Params(sigma1[0])))
    elif dims[0] == 2:
        covs.append(DirectMCMC(Sigma1Params(*sigma1)))
    else:
        covs.append(Empirical(_random_correlation(dims[0], rng)))
    for m in dims[1:-1]:
        covs.append(Empirical(_random_correlation(m, rng)))

    regimes = None
    if discontinuity is None:
        k3 = input_kernel_matrix(q, all_points)
    elif discontinuity == "two-regime":
        cut = np.median(points[:, 0])
        regimes = (all_points[:, 0] > cut).astype(int)
        k3 = np.zeros((n_all, n_all))
        for label, scale in [(0, 1.0), (1, rough_factor)]:
            idx = np.flatnonzero(regimes == label)
            k3[np.ix_(idx, idx)] = input_kernel_matrix(q * scale, all_points[idx])
    else:
        raise ValueError(f"unknown discontinuity {discontinuity!r}")
    covs.append(Empirical(k3))

    slice_mean = mean_scale * rng.standard_normal(dims[:-1])
    mean = np.repeat(slice_mean[..., None], n_all, axis=-1)
    if regimes is not None:
        mean = mean + jump * regimes
    model = TensorNormalModel(mean, covs)
    draw = sample_tensor_normal(model, rng=rng)

    meta = {
        "generator": "nestedgp.synth",
        "dims": list(dims),
        "q": q.tolist(),
        "seed": int(seed),
        "sigma1": list(sigma1[: 1 if dims[0] == 1 else 3]),
        "mean_scale": mean_scale,
        "discontinuity": discontinuity,
    }
    if discontinuity:
        meta.update(rough_factor=rough_factor, jump=jump)
    out = SynthResult(data=draw[..., :n], points=points, meta=meta,
                      regimes=None if regimes is None else regimes[:n],
                      mean=mean[..., :n], model=model)
    if with_test:
        out.test_slice = draw[..., n:]
        out.s_test = s_test
        meta["s_test"] = s_test.tolist()
    return out
