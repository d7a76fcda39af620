"""Length scales as sample paths of scalar GPs over iteration number."""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .kernels import iter_kernel_matrix
from .likelihood import LOG_2PI, RejectedProposal
from .linalg import DEFAULT_JITTER, NotPositiveDefinite, cholesky
import scipy.linalg as sla

__all__ = [
    "LookbackBuffer",
    "ScalarGpHyper",
    "adaptive_proposal_variance",
    "lookback_log_prior",
]


@dataclass(frozen=True)
class ScalarGpHyper:
    """Amplitude ``a`` and scale ``delta`` of one iteration-domain GP."""

    amplitude: float
    scale: float

    def is_valid(self):
        return self.amplitude > 0 and self.scale > 0


class LookbackBuffer:
    """The last ``capacity`` values of one length scale along the chain, oldest first."""

    def __init__(self, capacity, values=()):
        if capacity < 1:
            raise ValueError("lookback capacity must be >= 1")
        self.capacity = int(capacity)
        self._values = deque(values, maxlen=self.capacity)

    def push(self, value):
        self._values.append(float(value))

    @property
    def full(self):
        return len(self._values) == self.capacity

    def __len__(self):
        return len(self._values)

    def values(self):
        return np.fromiter(self._values, dtype=float, count=len(self._values))

    def copy(self):
        return LookbackBuffer(self.capacity, self._values)

    def __repr__(self):
        return f"LookbackBuffer(capacity={self.capacity}, n={len(self)})"


def lookback_log_prior(buf, hyper, jitter_policy=DEFAULT_JITTER):
    """Zero-mean MVN log-density of the mean-subtracted lookback values.

    The covariance is ``a exp(-(i-j)^2 / 2 delta^2)`` over the ``t0`` lags.
    """
    if not buf.full:
        raise ValueError(f"lookback buffer holds {len(buf)} of {buf.capacity} values")
    if not hyper.is_valid():
        raise RejectedProposal(f"invalid scalar-GP hyperparameters {hyper}")
    x = buf.values()
    x = x - x.mean()
    psi = iter_kernel_matrix(hyper.amplitude, hyper.scale, buf.capacity)
    try:
        f = cholesky(psi, jitter_policy)
    except NotPositiveDefinite as exc:
        raise RejectedProposal(str(exc)) from exc
    z = sla.solve_triangular(f.L, x, lower=True, check_finite=False)
    return -0.5 * (buf.capacity * LOG_2PI + f.log_det + float(z @ z))


def adaptive_proposal_variance(hyper):
    """Random-walk variance for the length scale: the GP amplitude itself."""
    if not hyper.amplitude > 0:
        raise ValueError("amplitude must be positive")
    return float(hyper.amplitude)
