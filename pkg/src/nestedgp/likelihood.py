"""Tensor-normal log-density with per-mode covariance strategies.

Each mode of the data tensor carries one covariance strategy:

* :class:`KernelParametrised` - SQE kernel over design points (last mode);
* :class:`Empirical` - a matrix estimated once from the data and frozen;
* :class:`DirectMCMC` - a small matrix whose elements are sampled directly.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import input_kernel_matrix
from .linalg import DEFAULT_JITTER, NotPositiveDefinite, cholesky, solve_triangular
from .tensor import frobenius_sq

__all__ = [
    "DirectMCMC",
    "Empirical",
    "KernelParametrised",
    "RejectedProposal",
    "Sigma1Params",
    "TensorNormalModel",
    "empirical_covariance",
    "empirical_mean",
    "log_likelihood",
    "tensor_normal_logpdf",
]

LOG_2PI = math.log(2.0 * math.pi)


class RejectedProposal(NotPositiveDefinite):
    """A covariance built from proposed parameters could not be factorised."""


@dataclass(frozen=True)
class Sigma1Params:
    """Directly learnt covariance of size 1 or 2.

    For size 2 the matrix is ``[[s11, rho sqrt(s11 s22)], [., s22]]``; for size
    1 only ``sigma11`` is used.
    """

    sigma11: float
    sigma22: float | None = None
    rho: float | None = None

    @property
    def size(self):
        return 1 if self.sigma22 is None else 2

    def is_valid(self):
        if not self.sigma11 > 0:
            return False
        if self.size == 1:
            return True
        return self.sigma22 > 0 and -1.0 < self.rho < 1.0

    def matrix(self):
        if self.size == 1:
            return np.array([[self.sigma11]])
        off = self.rho * math.sqrt(self.sigma11 * self.sigma22)
        return np.array([[self.sigma11, off], [off, self.sigma22]])

    def as_vector(self):
        if self.size == 1:
            return np.array([self.sigma11])
        return np.array([self.sigma11, self.sigma22, self.rho])

    @classmethod
    def from_vector(cls, v):
        v = [float(x) for x in v]
        if len(v) == 1:
            return cls(v[0])
        return cls(v[0], v[1], v[2])


@dataclass(frozen=True)
class KernelParametrised:
    points: np.ndarray
    inv_length_scales: np.ndarray

    def matrix(self):
        return input_kernel_matrix(self.inv_length_scales, self.points)


@dataclass(frozen=True)
class Empirical:
    cov: np.ndarray

    def matrix(self):
        return self.cov


@dataclass(frozen=True)
class DirectMCMC:
    params: Sigma1Params

    def matrix(self):
        return self.params.matrix()


@dataclass
class TensorNormalModel:
    """Mean tensor plus one covariance strategy per mode."""

    mean: np.ndarray
    covariances: list = field(default_factory=list)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        if len(self.covariances) != self.mean.ndim:
            raise ValueError(
                f"{len(self.covariances)} covariance strategies for a "
                f"{self.mean.ndim}-order mean tensor"
            )

    @property
    def dims(self):
        return self.mean.shape

    def matrices(self):
        mats = [np.atleast_2d(c.matrix()) for c in self.covariances]
        for mode, (m, size) in enumerate(zip(mats, self.dims)):
            if m.shape != (size, size):
                raise ValueError(f"mode {mode}: covariance {m.shape} for size {size}")
        return mats

    def factors(self, jitter_policy=DEFAULT_JITTER):
        try:
            return [cholesky(m, jitter_policy) for m in self.matrices()]
        except NotPositiveDefinite as exc:
            raise RejectedProposal(str(exc)) from exc


def whiten(residual, factors):
    """``residual x_1 A_1^{-1} ... x_k A_k^{-1}``; ``None`` factors are skipped."""
    z = residual
    for mode, f in enumerate(factors):
        if f is not None:
            z = solve_triangular(f, z, mode)
    return z


def log_normaliser(dims, log_dets):
    """``-(m/2) log 2 pi - sum_i (m / 2 m_i) log|Sigma_i|``."""
    m = float(np.prod(dims))
    total = -0.5 * m * LOG_2PI
    for size, ld in zip(dims, log_dets):
        total -= 0.5 * (m / size) * ld
    return total


def tensor_normal_logpdf(residual, factors):
    """Log-density of a mean-subtracted tensor given per-mode Cholesky factors."""
    residual = np.asarray(residual, dtype=float)
    z = whiten(residual, factors)
    return log_normaliser(residual.shape, [f.log_det for f in factors]) - 0.5 * frobenius_sq(z)


def log_likelihood(model, data, jitter_policy=DEFAULT_JITTER):
    """Tensor-normal log-likelihood of ``data`` under ``model``.

    Raises :class:`RejectedProposal` if any mode covariance is not positive
    definite after jitter.
    """
    data = np.asarray(data, dtype=float)
    if data.shape != model.dims:
        raise ValueError(f"data dims {data.shape} do not match model dims {model.dims}")
    return tensor_normal_logpdf(data - model.mean, model.factors(jitter_policy))


def empirical_mean(data, sample_mode=-1):
    """Average the slices along ``sample_mode`` and repeat the average n times."""
    data = np.asarray(data, dtype=float)
    avg = data.mean(axis=sample_mode, keepdims=True)
    return np.broadcast_to(avg, data.shape).copy()


def empirical_covariance(data, target_mode, sample_mode=-1):
    """Collapse-and-average covariance estimate for ``target_mode``.

    For every index ``q`` of the remaining (collapsed) modes, the covariance
    across the ``n`` samples is formed with divisor ``n``; these are summed
    over ``q`` and divided by ``(r - 1)`` with ``r`` the number of collapsed
    entries (``1`` when ``r == 1``).  For a ``2 x m2 x n`` tensor and target
    mode 1 this is

        s_ij = 1/(2-1) * sum_q [ 1/n * sum_p (v_pq^i - vbar_q^i)(v_pq^j - vbar_q^j) ].
    """
    data = np.asarray(data, dtype=float)
    k = data.ndim
    target_mode %= k
    sample_mode %= k
    if target_mode == sample_mode:
        raise ValueError("target_mode and sample_mode must differ")
    m_t = data.shape[target_mode]
    if m_t < 2:
        raise ValueError("target mode needs at least 2 entries")
    n = data.shape[sample_mode]
    x = np.moveaxis(data, (target_mode, sample_mode), (0, 1)).reshape(m_t, n, -1)
    r = x.shape[2]
    centred = x - x.mean(axis=1, keepdims=True)
    cov = np.einsum("ipq,jpq->ij", centred, centred) / n
    cov /= max(r - 1, 1)
    return 0.5 * (cov + cov.T)
