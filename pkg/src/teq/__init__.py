"""Divide-and-conquer solvers for tensor Sylvester equations with HODLR coefficients."""

__version__ = "0.1.0"

from .tensor import (DimensionError, matricize, mode_product, relative_residual,
                     residual_norm, tensorize, kron_sum_apply, kron_sum_matrix, vec, unvec)
from .lowrank import LowRank, recompress
from .hmatrix import (ClusterTree, HMatrix, IndefiniteError, SpectralInterval,
                      build_cluster_tree, estimate_spectra, hmatrix_from_banded,
                      hmatrix_from_dense, level_split, shifted_solve)
from .zolotarev import (IntervalPair, ShiftSet, rational_ratio, shift_count_adi,
                        shift_count_rk, shift_count_tensor, zolotarev_bound, zolotarev_shifts)
from .sylv_lowrank import (InexactnessProbe, SolverFailure, ek_solve, fadi, fadi_inexact,
                           fadi_residual_exact, rk_solve)
from .dnc import (PlanEntry, SingularOperatorError, SolveStats, SolverConfig, SylvesterProblem,
                  level_shift_plan, lyap2d_dnc, lyap2d_dnc_balanced, lyapnd_diag, lyapnd_dnc,
                  nested_shifted_solve, solve, update_rhs_assembly)
