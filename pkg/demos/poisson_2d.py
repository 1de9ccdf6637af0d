"""Solve a 2D Poisson problem ``A X + X A = B`` and compare with a dense solve.

The 1D Laplacian is tridiagonal, so its off-diagonal blocks have rank one and
the divide-and-conquer solver only ever corrects with rank-two updates.
"""

import time
import warnings

import numpy as np
import scipy.linalg as sla

from teq import SolverConfig, SolveStats, hmatrix_from_banded, lyap2d_dnc, relative_residual
from teq.generators import laplace1d

# at eps = 1e-4 the a priori residual bound is vacuous and the solver says so
warnings.simplefilter("ignore", RuntimeWarning)

n = 1024
A = hmatrix_from_banded(laplace1d(n), n_min=64)
B = np.random.default_rng(0).standard_normal((n, n))

for eps in (1e-4, 1e-8, 1e-12):
    stats = SolveStats()
    X = lyap2d_dnc(A, A, B, SolverConfig(eps=eps, n_min=64), stats)
    print(f"eps {eps:.0e}: residual {relative_residual([A, A], X, B):.2e}, "
          f"{stats.total:.2f}s, shift counts {sorted(set(stats.shift_counts))}")

t0 = time.perf_counter()
Ad = A.dense()
Xd = sla.solve_sylvester(Ad, Ad, B)
print(f"dense Bartels-Stewart: {time.perf_counter() - t0:.2f}s, "
      f"difference to last solve {np.linalg.norm(X - Xd) / np.linalg.norm(Xd):.2e}")
