"""Haar-conjugation hit probabilities for two one-variable families.

With independent targets almost every conjugation lands in the joint set
once d is moderate.  A correlation of 0.9 between the families is almost
never produced by independent unitaries, and the probability falls like
exp(-d^2 I); the rare-event values come from subset simulation.
"""
from bifree_lab import CovarianceSpec, build_target, chi_orb_sequence, semicircle_families

gen = lambda d: semicircle_families(d, [(1, 0), (1, 0)])
for c in (0.0, 0.9):
    target = build_target(CovarianceSpec(2, 0, [[1.0, c], [c, 1.0]]), 2)
    print(f"c = {c}")
    for d, est in chi_orb_sequence(gen, target, 2, 0.2, [4, 8, 12], samples=20_000, seed=1):
        print(f"  d={d:2d} p={est.hit_probability:.3e} normalized={est.normalized:+.5f} "
              f"+- {est.normalized_std_error:.5f} ({est.method})")
