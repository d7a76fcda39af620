"""Squared-exponential kernels over the input space and over iteration number."""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ITER_KERNEL_DENOMINATOR",
    "SqeInputKernel",
    "SqeIterKernel",
    "input_kernel_matrix",
    "iter_kernel_matrix",
]

# Psi_ij = a * exp(-(i - j)^2 / (ITER_KERNEL_DENOMINATOR * delta^2))
ITER_KERNEL_DENOMINATOR = 2.0


@dataclass(frozen=True)
class SqeInputKernel:
    """Unit-amplitude SQE kernel ``exp(-sum_c q_c (s_c - s'_c)^2)``.

    ``inv_length_scales`` holds ``q_c = 1 / ell_c``.
    """

    inv_length_scales: np.ndarray

    @classmethod
    def from_length_scales(cls, ell):
        return cls(1.0 / np.asarray(ell, dtype=float))

    def matrix(self, points):
        return input_kernel_matrix(self.inv_length_scales, points)


@dataclass(frozen=True)
class SqeIterKernel:
    amplitude: float
    scale: float

    def matrix(self, t0):
        return iter_kernel_matrix(self.amplitude, self.scale, t0)


def _points(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if not np.all(np.isfinite(pts)):
        raise ValueError("design points must be finite")
    return pts


def input_kernel_matrix(inv_length_scales, points, other=None):
    """Kernel matrix between ``points`` (n x d) and ``other`` (defaults to ``points``)."""
    q = np.atleast_1d(np.asarray(inv_length_scales, dtype=float))
    if not (np.all(q > 0) and np.all(np.isfinite(q))):
        raise ValueError(f"inverse length scales must be positive and finite, got {q}")
    x = _points(points)
    y = x if other is None else _points(other)
    if x.shape[1] != q.size or y.shape[1] != q.size:
        raise ValueError(f"points have dimension {x.shape[1]}, kernel expects {q.size}")
    diff = x[:, None, :] - y[None, :, :]
    k = np.exp(-np.einsum("ijc,c->ij", diff * diff, q))
    if other is None:
        # exact symmetry regardless of rounding in the einsum
        k = 0.5 * (k + k.T)
        np.fill_diagonal(k, 1.0)
    return k


def iter_kernel_matrix(amplitude, scale, t0):
    """``t0 x t0`` matrix ``a exp(-(i - j)^2 / (2 delta^2))`` over iteration lags."""
    if t0 < 1:
        raise ValueError("t0 must be >= 1")
    lag = np.arange(t0, dtype=float)
    d2 = (lag[:, None] - lag[None, :]) ** 2
    return amplitude * np.exp(-d2 / (ITER_KERNEL_DENOMINATOR * scale * scale))
