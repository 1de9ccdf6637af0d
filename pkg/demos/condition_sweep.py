"""Residual growth with the condition number, general SPD versus M-matrix.

General SPD coefficients follow the kappa-proportional envelope loosely; for
the shifted Laplacian (an M-matrix) the residual hardly moves.
"""

import math
import warnings

import numpy as np

from teq import SolverConfig, hmatrix_from_banded, hmatrix_from_dense, lyap2d_dnc, relative_residual
from teq.generators import (laplace_eigenvectors, power_for_condition, random_spd_hss,
                            shift_for_condition, shifted_laplace, sweep_rhs)

warnings.simplefilter("ignore", RuntimeWarning)
n, eps = 256, 1e-6
cfg = SolverConfig(eps=eps, n_min=32)
print("   kappa   general   M-matrix   (l+1)^2 kappa eps   (l+1)^2 sqrt(kappa) eps")
for kappa in np.logspace(4, 9, 6):
    Araw, Q = random_spd_hss(n, power_for_condition(n, kappa), 8, 0)
    A = hmatrix_from_dense(Araw, n_min=32, tol=1e-12)
    C = sweep_rhs(Q)
    r_gen = relative_residual([Araw, Araw], lyap2d_dnc(A, A, C, cfg), C)
    M = hmatrix_from_banded(shifted_laplace(n, shift_for_condition(n, kappa)), n_min=32)
    Cm = sweep_rhs(laplace_eigenvectors(n))
    r_mm = relative_residual([M, M], lyap2d_dnc(M, M, Cm, cfg), Cm)
    f = (A.depth + 1) ** 2 * eps
    print(f"{kappa:8.0e}  {r_gen:.2e}  {r_mm:.2e}   {f * kappa:.2e}           {f * math.sqrt(kappa):.2e}")
