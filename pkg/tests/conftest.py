import warnings

import numpy as np
import pytest

from teq.generators import laplace1d


def spd_banded(n, bw, rng, shift=1.0):
    """Random SPD matrix with lower bandwidth `bw` (diagonally dominant)."""
    A = np.zeros((n, n))
    for k in range(1, min(bw, n - 1) + 1):
        v = rng.uniform(-1.0, 0.0, n - k)
        A += np.diag(v, -k) + np.diag(v, k)
    A += np.diag(np.abs(A).sum(axis=1) + shift * rng.uniform(0.5, 1.5, n))
    return A


def laplace_dense(n):
    return 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)


def brute_solve(mats, B):
    """Dense Kronecker-sum solve (column-major vectorization)."""
    from teq.tensor import kron_sum_matrix, unvec, vec
    return unvec(np.linalg.solve(kron_sum_matrix(mats), vec(B)), B.shape)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _quiet_bound_warnings():
    # the solver warns when kappa*eps is large; tests that care check explicitly
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*residual bound.*")
        yield
