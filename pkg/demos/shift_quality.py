"""How fast do Zolotarev shifts drive the ADI residual down?

For the spectrum of a 1D Laplacian, print the achieved ratio
``max_E |r_s| / min_F |r_s|`` next to the a priori bound, and the number of
shifts the bound asks for at a few tolerances.
"""

from teq import IntervalPair, rational_ratio, shift_count_adi, zolotarev_bound, zolotarev_shifts
from teq.generators import laplace_eigenvalues

lam = laplace_eigenvalues(512)
pair = IntervalPair(lam.min(), lam.max(), lam.min(), lam.max())
print(f"interval [{pair.a1:.3e}, {pair.b1:.3e}]")
print(" s   achieved     bound")
for s in range(2, 25, 2):
    S = zolotarev_shifts(s, pair)
    print(f"{s:2d}  {rational_ratio(S):.3e}  {zolotarev_bound(s, pair):.3e}")
for eps in (1e-4, 1e-8, 1e-12):
    print(f"eps {eps:.0e} needs s = {shift_count_adi(eps, pair)}")
