"""Cholesky factorisation with bounded diagonal jitter, and mode-wise solves."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .tensor import mode_product

__all__ = [
    "CholFactor",
    "JitterPolicy",
    "NotPositiveDefinite",
    "cholesky",
    "solve_triangular",
]


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a matrix stays indefinite after the largest allowed jitter."""


@dataclass(frozen=True)
class JitterPolicy:
    """Diagonal jitter schedule, relative to the mean diagonal entry.

    The first attempt uses no jitter.  Then ``start, start*factor, ...`` is
    tried until ``maximum`` is exceeded.
    """

    start: float = 1e-10
    factor: float = 10.0
    maximum: float = 1e-4

    def levels(self):
        level = self.start
        # small tolerance so that 1e-10 * 10**6 still counts as <= 1e-4
        while level <= self.maximum * (1 + 1e-9):
            yield level
            level *= self.factor


DEFAULT_JITTER = JitterPolicy()


@dataclass(frozen=True)
class CholFactor:
    """Lower Cholesky factor ``L`` of ``m + jitter * I``."""

    L: np.ndarray
    log_det: float
    jitter: float = 0.0

    @property
    def n(self):
        return self.L.shape[0]

    def matrix(self):
        return self.L @ self.L.T


def _try_cholesky(m):
    try:
        L = sla.cholesky(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    d = np.diag(L)
    if not np.all(np.isfinite(L)) or np.any(d <= 0):
        return None
    return L


def cholesky(m, jitter_policy=DEFAULT_JITTER):
    """Factorise a symmetric matrix, escalating diagonal jitter if needed.

    Returns a :class:`CholFactor`; the absolute jitter actually added is
    recorded in ``factor.jitter``.  Raises :class:`NotPositiveDefinite` once
    the policy is exhausted.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale > 0 and np.max(np.abs(m - m.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")

    L = _try_cholesky(m)
    jitter = 0.0
    if L is None:
        mean_diag = float(np.trace(m)) / m.shape[0]
        if mean_diag <= 0:
            raise NotPositiveDefinite(f"non-positive mean diagonal {mean_diag:g}")
        eye = np.eye(m.shape[0])
        for level in jitter_policy.levels():
            jitter = level * mean_diag
            L = _try_cholesky(m + jitter * eye)
            if L is not None:
                break
        else:
            raise NotPositiveDefinite(
                f"matrix of size {m.shape[0]} not positive definite after jitter "
                f"{jitter_policy.maximum:g} x mean diagonal"
            )
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    return CholFactor(L=L, log_det=log_det, jitter=jitter)


def solve_triangular(f, t, mode):
    """Apply ``L^{-1}`` along ``mode`` of tensor ``t`` without forming the inverse."""
    t = np.asarray(t, dtype=float)
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for a {t.ndim}-order tensor")
    if f.n != t.shape[mode]:
        raise ValueError(
            f"shape mismatch: factor of size {f.n} cannot act on mode {mode} "
            f"of tensor {t.shape}"
        )
    moved = np.moveaxis(t, mode, 0)
    flat = moved.reshape(moved.shape[0], -1)
    solved = sla.solve_triangular(f.L, flat, lower=True, check_finite=False)
    return np.moveaxis(solved.reshape(moved.shape), 0, mode)


def apply_factor(f, t, mode):
    """Apply ``L`` along ``mode`` (colouring a whitened tensor)."""
    return mode_product(t, f.L, mode)
