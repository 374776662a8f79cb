"""Closed-form entropy of a left/right Gaussian pair as the correlation grows.

Prints chi, the second-moment upper bound, the split gap and the entropy
dimension for a few correlations, then pushes the pair through a linear map.
"""
import numpy as np

from bifree_lab import CovarianceSpec, chi_upper_bound, gaussian_chi, gaussian_delta, subadditivity_gap, transform_chi

print(f"{'c':>6} {'chi':>10} {'bound':>10} {'gap':>10} {'rank':>5}")
for c in (0.0, 0.25, 0.5, 0.9, 0.99, 1.0):
    cov = CovarianceSpec.pair(c)
    chi = gaussian_chi(cov)
    gap = subadditivity_gap(cov, (1, 0))
    print(f"{c:6.2f} {str(chi)[:10]:>10} {chi_upper_bound(np.diag(cov.A)):10.4f} {gap:10.4f} {gaussian_delta(cov):5d}")

# scaling the left variable by 3 adds log 3
chi = gaussian_chi(CovarianceSpec.pair(0.5))
print("\nafter X -> 3X:", transform_chi(chi, [[3.0]], [[1.0]]), "=", chi.value + np.log(3))
