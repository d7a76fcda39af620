"""Dense k-order tensors stored as numpy arrays.

Tensors are plain ``numpy.ndarray`` objects whose shape is the dimension list
``(m_1, ..., m_k)``.  The flat layout used by :func:`vectorize` is column-major
(mode 0 varies fastest), so that the covariance of ``vectorize(X)`` for a
tensor-normal ``X`` is ``Sigma_k kron ... kron Sigma_1``.

Modes are 0-based throughout the library.
"""

import numpy as np

__all__ = [
    "as_tensor",
    "frobenius_sq",
    "mode_product",
    "slice_along",
    "unvectorize",
    "vectorize",
]


def as_tensor(data, dims=None):
    """Coerce ``data`` to a float64 tensor, optionally reshaping a flat array.

    A flat ``data`` is interpreted in the column-major layout.
    """
    arr = np.asarray(data, dtype=float)
    if dims is not None:
        dims = tuple(int(m) for m in dims)
        if any(m < 1 for m in dims):
            raise ValueError(f"all dims must be >= 1, got {dims}")
        if arr.size != int(np.prod(dims)):
            raise ValueError(
                f"data length {arr.size} does not match dims {dims} "
                f"(product {int(np.prod(dims))})"
            )
        arr = arr.reshape(dims, order="F")
    if arr.ndim < 1:
        arr = arr.reshape(1)
    return arr


def _check_mode(t, mode):
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for a {t.ndim}-order tensor")


def mode_product(t, m, mode):
    """Mode-``mode`` product ``t x_mode m``.

    ``result[..., i, ...] = sum_j m[i, j] * t[..., j, ...]`` with the summed
    index in position ``mode``.
    """
    t = np.asarray(t, dtype=float)
    m = np.atleast_2d(np.asarray(m, dtype=float))
    _check_mode(t, mode)
    if m.shape[1] != t.shape[mode]:
        raise ValueError(
            f"shape mismatch: matrix {m.shape} cannot act on mode {mode} "
            f"of tensor {t.shape}"
        )
    out = np.tensordot(m, t, axes=([1], [mode]))
    return np.moveaxis(out, 0, mode)


def vectorize(t):
    """Flatten ``t`` in column-major order (mode 0 fastest)."""
    return np.asarray(t, dtype=float).ravel(order="F")


def unvectorize(v, dims):
    """Inverse of :func:`vectorize`."""
    return as_tensor(np.asarray(v, dtype=float).ravel(), dims)


def frobenius_sq(t):
    """Sum of squared entries."""
    t = np.asarray(t, dtype=float)
    return float(np.einsum("i,i->", t.ravel(), t.ravel()))


def slice_along(t, mode, index):
    """The ``index``-th slice of ``t`` along ``mode`` (keeps the mode, size 1)."""
    t = np.asarray(t)
    _check_mode(t, mode)
    if not 0 <= index < t.shape[mode]:
        raise IndexError(f"slice index {index} out of range for mode {mode} of size {t.shape[mode]}")
    return np.take(t, [index], axis=mode)
