"""Dense tensor arithmetic.

Tensors are plain :class:`numpy.ndarray` objects of shape ``(n_1, ..., n_d)``.
Modes are numbered from 0, like numpy axes.

When a tensor has to be flattened to a vector (``vec``), or serialized, the
linearization is column-major: the first mode varies fastest.  With this
convention ``vec(X x_t A) = (I_{n_d} (x) ... (x) A (x) ... (x) I_{n_1}) vec(X)``
and ``matricize(X, 0)`` of a Fortran-ordered array is a zero-copy reshape.
"""

import numpy as np


class DimensionError(ValueError):
    """Raised when operand sizes do not match along some mode."""


def _check_mode(X, t):
    if not 0 <= t < X.ndim:
        raise DimensionError(f"mode {t} out of range for a {X.ndim}-mode tensor")


def mode_product(X, t, A):
    """Multiply every mode-`t` fiber of `X` by the matrix `A`.

    The result has the same shape as `X` except along mode `t`, where the
    size becomes ``A.shape[0]``.
    """
    X = np.asarray(X)
    A = np.asarray(A)
    _check_mode(X, t)
    if A.ndim != 2 or A.shape[1] != X.shape[t]:
        raise DimensionError(
            f"mode {t}: matrix has {A.shape[-1]} columns but tensor has size {X.shape[t]}")
    Y = np.tensordot(A, X, axes=(1, t))
    return np.moveaxis(Y, 0, t)


def matricize(X, t):
    """Mode-`t` unfolding: an ``n_t x prod(n_j, j != t)`` matrix.

    Mode-`t` fibers become columns.  Columns are ordered column-major over
    the remaining modes (the lowest remaining mode varies fastest).
    """
    X = np.asarray(X)
    _check_mode(X, t)
    return np.reshape(np.moveaxis(X, t, 0), (X.shape[t], -1), order="F")


def tensorize(M, t, dims):
    """Inverse of :func:`matricize`."""
    dims = tuple(int(n) for n in dims)
    M = np.asarray(M)
    if not 0 <= t < len(dims):
        raise DimensionError(f"mode {t} out of range for {len(dims)} modes")
    rest = dims[:t] + dims[t + 1:]
    if M.shape != (dims[t], int(np.prod(rest, dtype=np.int64))):
        raise DimensionError(f"cannot tensorize a {M.shape} matrix into {dims} along mode {t}")
    Y = np.reshape(M, (dims[t],) + rest, order="F")
    return np.moveaxis(Y, 0, t)


def vec(X):
    """Column-major vectorization."""
    return np.asarray(X).ravel(order="F")


def unvec(x, dims):
    return np.reshape(np.asarray(x), tuple(dims), order="F")


def _as_matrix(A):
    # HMatrix and friends expose a dense() method
    return A.dense() if hasattr(A, "dense") else np.asarray(A)


def kron_sum_apply(coeffs, X):
    """Apply the Kronecker-sum operator: ``sum_t X x_t A_t``.

    `coeffs` holds one square operator per mode; dense arrays and objects with
    a ``matvec`` method (e.g. :class:`teq.hmatrix.HMatrix`) are accepted.
    """
    X = np.asarray(X, dtype=float)
    if len(coeffs) != X.ndim:
        raise DimensionError(f"{len(coeffs)} coefficients for a {X.ndim}-mode tensor")
    out = np.zeros_like(X)
    for t, A in enumerate(coeffs):
        n = X.shape[t]
        if hasattr(A, "matvec"):
            if A.n != n:
                raise DimensionError(f"mode {t}: coefficient of size {A.n}, tensor size {n}")
            Xt = np.moveaxis(X, t, 0).reshape(n, -1)
            out += np.moveaxis(A.matvec(Xt).reshape((n,) + np.moveaxis(X, t, 0).shape[1:]), 0, t)
        else:
            A = np.asarray(A)
            if A.shape != (n, n):
                raise DimensionError(f"mode {t}: coefficient of shape {A.shape}, tensor size {n}")
            out += mode_product(X, t, A)
    return out


def residual_norm(coeffs, X, B):
    """Frobenius norm of ``sum_t X x_t A_t - B``."""
    B = np.asarray(B, dtype=float)
    if np.shape(X) != B.shape:
        raise DimensionError(f"solution shape {np.shape(X)} differs from right-hand side {B.shape}")
    return float(np.linalg.norm(kron_sum_apply(coeffs, X) - B))


def relative_residual(coeffs, X, B):
    nb = np.linalg.norm(B)
    r = residual_norm(coeffs, X, B)
    return r / nb if nb > 0 else r


def kron_sum_matrix(coeffs):
    """Explicit Kronecker-sum matrix acting on column-major ``vec(X)``.

    Only meant for small brute-force checks.
    """
    mats = [_as_matrix(A) for A in coeffs]
    sizes = [A.shape[0] for A in mats]
    N = int(np.prod(sizes))
    K = np.zeros((N, N))
    for t, A in enumerate(mats):
        # column-major: the last mode is the outermost Kronecker factor
        term = np.ones((1, 1))
        for u in reversed(range(len(mats))):
            term = np.kron(term, A if u == t else np.eye(sizes[u]))
        K += term
    return K


def _slices(X, ranges):
    if len(ranges) != X.ndim:
        raise DimensionError(f"{len(ranges)} ranges for a {X.ndim}-mode tensor")
    out = []
    for t, r in enumerate(ranges):
        if isinstance(r, slice):
            start, stop, step = r.indices(X.shape[t])
            if step != 1:
                raise IndexError("only contiguous ranges are supported")
        else:
            start, stop = r
        if not 0 <= start <= stop <= X.shape[t]:
            raise IndexError(f"range {start}:{stop} out of bounds for mode {t} of size {X.shape[t]}")
        out.append(slice(start, stop))
    return tuple(out)


def block_view(X, ranges):
    """Copy of the sub-tensor indexed by one contiguous range per mode.

    A range is either a ``slice`` or a ``(start, stop)`` pair.
    """
    X = np.asarray(X)
    return np.array(X[_slices(X, ranges)], copy=True)


def block_write(X, ranges, Y):
    """Overwrite the block of `X` selected by `ranges` with `Y` (in place)."""
    sl = _slices(X, ranges)
    target = X[sl]
    if target.shape != np.shape(Y):
        raise DimensionError(f"block of shape {target.shape} cannot hold {np.shape(Y)}")
    X[sl] = Y
    return X
