import math

import numpy as np
import pytest
from scipy import integrate

from bifree_lab.gram import (cone_upper_bound, gram_log_constant, gram_region_log_volume,
                             pair_constraint_log_volume_oracle, validate_gram_constant)

LOG_2PIE = math.log(2 * math.pi * math.e)


def tplquad_region(N, ur, vr, wr):
    cN = math.exp(gram_log_constant(N))
    f = lambda w, v, u: max(u * v - w * w, 0.0) ** ((N - 3) / 2)
    val, _ = integrate.tplquad(f, ur[0], ur[1], vr[0], vr[1], wr[0], wr[1], epsabs=1e-12, epsrel=1e-10)
    return math.log(cN * val)


def test_gram_constant_matches_sphere_areas():
    # c_N = |S^{N-1}| |S^{N-2}| / 4 from polar coordinates on the pair
    for N in range(2, 12):
        s = lambda k: 2 * math.pi ** (k / 2) / math.gamma(k / 2)
        assert gram_log_constant(N) == pytest.approx(math.log(s(N) * s(N - 1) / 4), rel=1e-13)
    with pytest.raises(ValueError):
        gram_log_constant(1)


@pytest.mark.parametrize("N, frozen", [(3, 1.4501300809607744), (4, 2.518635066404176)])
def test_region_volume_frozen_and_independent(N, frozen):
    box = ((0.7, 1.3), (0.7, 1.3), (0.0, 0.6))
    got = gram_region_log_volume(N, *box)
    assert got == pytest.approx(frozen, rel=1e-10)
    assert got == pytest.approx(tplquad_region(N, *box), abs=1e-7)


def test_region_with_clipped_window():
    # the w-window reaches past |w| = sqrt(uv), so the PSD clip is active
    box = ((0.5, 1.5), (0.5, 1.5), (-0.2, 1.4))
    assert gram_region_log_volume(5, *box) == pytest.approx(tplquad_region(5, *box), abs=1e-7)


def test_pair_oracle_frozen_and_symmetric():
    assert pair_constraint_log_volume_oracle(3, 0.1, 0.0) == pytest.approx(10.553947334754197, rel=1e-10)
    assert pair_constraint_log_volume_oracle(3, 0.1, 0.5) == pytest.approx(9.720101559089088, rel=1e-10)
    for d, c in ((2, 0.3), (4, 0.7), (3, 1.0)):
        a = pair_constraint_log_volume_oracle(d, 0.1, c)
        assert a == pytest.approx(pair_constraint_log_volume_oracle(d, 0.1, -c), rel=1e-12)


def test_pair_oracle_errors():
    for args in ((3, 1.0, 0.0), (3, 0.0, 0.0), (3, 0.1, 1.5), (1, 0.1, 0.0)):
        with pytest.raises(ValueError):
            pair_constraint_log_volume_oracle(*args)


def test_pair_oracle_near_gaussian_value():
    d = 6
    assert abs(pair_constraint_log_volume_oracle(d, 0.05, 0.0) / d ** 2 + math.log(d) - LOG_2PIE) < 0.2


def test_oracle_below_cone_bound():
    for d in range(2, 7):
        for eps in (0.05, 0.1):
            for c in (0.0, 0.5, 0.9):
                assert pair_constraint_log_volume_oracle(d, eps, c) <= cone_upper_bound(d, eps, c)


def test_cone_bound_limit():
    d, c, eps = 40, 0.5, 0.01
    limit = LOG_2PIE + 0.5 * math.log(1 - c * c) + math.log(1 + eps * (1 + c) ** 2 / (1 - c * c))
    assert abs(cone_upper_bound(d, eps, c) / d ** 2 + math.log(d) - limit) < 0.05
    assert cone_upper_bound(400, 1e-9, 0.0) / 400 ** 2 + math.log(400) == pytest.approx(LOG_2PIE, abs=0.02)
    with pytest.raises(ValueError):
        cone_upper_bound(3, 0.1, 1.0)


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_gram_constant_brute_force_small(N):
    v = validate_gram_constant(N, samples=2_000_000, seed=1)
    assert v.hits > 0 and v.passed, v.row()
