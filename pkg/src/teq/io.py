"""File formats.

Binary tensor dump
    little-endian ``int64`` mode count ``d``, then ``d`` ``int64`` sizes, then
    the entries as little-endian ``float64`` in column-major order (first
    mode fastest).

Banded text
    a first line ``n b`` (size and bandwidth), then ``n`` lines; line ``i``
    holds ``A[i, i], A[i, i+1], ..., A[i, i+b]`` (entries past the last
    column are written as 0).
"""

from pathlib import Path

import numpy as np

from .hmatrix import hmatrix_from_banded, hmatrix_from_dense

_INT = np.dtype("<i8")
_FLOAT = np.dtype("<f8")


class FormatError(ValueError):
    """Malformed input file."""


def write_tensor(path, X):
    X = np.asarray(X, dtype=float)
    header = np.array([X.ndim, *X.shape], dtype=_INT)
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(np.asarray(X.ravel(order="F"), dtype=_FLOAT).tobytes())


def read_tensor(path):
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FormatError(f"{path}: file too short for a tensor header")
    d = int(np.frombuffer(raw[:8], dtype=_INT)[0])
    if d < 1 or len(raw) < 8 * (d + 1):
        raise FormatError(f"{path}: invalid mode count {d}")
    dims = tuple(int(x) for x in np.frombuffer(raw[8:8 * (d + 1)], dtype=_INT))
    if any(n < 1 for n in dims):
        raise FormatError(f"{path}: invalid sizes {dims}")
    count = int(np.prod(dims))
    data = raw[8 * (d + 1):]
    if len(data) != 8 * count:
        raise FormatError(f"{path}: expected {count} entries for sizes {dims}, found {len(data) // 8}")
    return np.frombuffer(data, dtype=_FLOAT).reshape(dims, order="F").astype(float)


def write_banded(path, ab):
    """Write lower band storage ``ab`` (``ab[k, j] = A[j + k, j]``) in the text format."""
    ab = np.atleast_2d(np.asarray(ab, dtype=float))
    b, n = ab.shape[0] - 1, ab.shape[1]
    with open(path, "w") as f:
        f.write(f"{n} {b}\n")
        for i in range(n):
            row = [ab[k, i] if i + k < n else 0.0 for k in range(b + 1)]
            f.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_banded(path):
    """Read the banded text format; returns lower band storage."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise FormatError(f"{path}: first line must be 'n bandwidth'")
    try:
        n, b = int(lines[0][0]), int(lines[0][1])
    except ValueError:
        raise FormatError(f"{path}: first line must hold two integers") from None
    if n < 1 or b < 0:
        raise FormatError(f"{path}: invalid size {n} or bandwidth {b}")
    if len(lines) != n + 1:
        raise FormatError(f"{path}: expected {n} rows, found {len(lines) - 1}")
    ab = np.zeros((b + 1, n))
    for i, row in enumerate(lines[1:]):
        if len(row) != b + 1:
            raise FormatError(f"{path}: row {i + 1} has {len(row)} entries, expected {b + 1}")
        vals = [float(v) for v in row]
        for k in range(b + 1):
            if i + k < n:
                ab[k, i] = vals[k]
    return ab


def load_matrix(path, n_min=64, tol=1e-12):
    """Load a coefficient as an HMatrix from either format (chosen by content)."""
    path = Path(path)
    head = path.read_bytes()[:64]
    try:
        text = head.decode("ascii")
        is_text = all(c.isspace() or c.isprintable() for c in text)
    except UnicodeDecodeError:
        is_text = False
    if is_text:
        return hmatrix_from_banded(read_banded(path), n_min=n_min)
    A = read_tensor(path)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise FormatError(f"{path}: a square matrix is required, found shape {A.shape}")
    return hmatrix_from_dense(A, n_min=n_min, tol=tol)
