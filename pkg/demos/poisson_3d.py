"""3D Poisson ``X x1 A + X x2 A + X x3 A = B`` with nested low-rank updates."""

import numpy as np

from teq import SolverConfig, SolveStats, hmatrix_from_banded, lyapnd_dnc, relative_residual
from teq.generators import laplace1d

for n in (32, 64, 128):
    A = hmatrix_from_banded(laplace1d(n), n_min=16)
    B = np.random.default_rng(n).standard_normal((n, n, n))
    stats = SolveStats()
    X = lyapnd_dnc([A, A, A], B, SolverConfig(eps=1e-6, n_min=16), stats)
    print(f"n={n:4d}: residual {relative_residual([A, A, A], X, B):.2e}, {stats.total:.2f}s, "
          f"max update rank {stats.max_update_rank}")
