import math

import numpy as np
import pytest

from bifree_lab.errors import ConfigurationError
from bifree_lab.gram import cone_upper_bound, pair_constraint_log_volume_oracle
from bifree_lab.microstates import MicrostateSpec
from bifree_lab.moments import CovarianceSpec, build_target, target_from_values
from bifree_lab.volume import (GUESampler, HSBall, chi_sequence, estimate_log_volume, pushforward_volume_ratio,
                               reference_log_volume)


def semicircle_spec(d=2, eps=0.1, **kw):
    t = build_target(CovarianceSpec(1, 0, [[1.0]]), 2)
    return MicrostateSpec(t, 2, eps, d, mode="filter", words=("X1X1|",), **kw)


def pair_spec(c, d=3, eps=0.1):
    t = build_target(CovarianceSpec.pair(c), 2)
    return MicrostateSpec(t, 2, eps, d, mode="filter", words=("X1X1|", "|Y1Y1", "X1|Y1"))


def contradictory_spec(d=2):
    t = target_from_values(1, 0, 4, {"X1|": 0, "X1X1|": 1, "X1X1X1|": 0, "X1X1X1X1|": 0})
    return MicrostateSpec(t, 4, 0.1, d)


def test_reference_volume_examples():
    assert reference_log_volume(1, 1, 1.0) == pytest.approx(math.log(2))
    assert reference_log_volume(2, 1, 1.0) == pytest.approx(math.log(math.pi ** 2 / 2))
    for d, k in ((2, 1), (3, 2)):
        diff = reference_log_volume(d, k, 2.0) - reference_log_volume(d, k, 1.0)
        assert diff == pytest.approx(d * d * k * math.log(2), rel=1e-14)
    with pytest.raises(ValueError):
        reference_log_volume(2, 1, 0.0)


def test_shell_fraction():
    est = estimate_log_volume(semicircle_spec(), HSBall(math.sqrt(2.2)), 100_000, seed=0)
    exact = 1 - (0.9 / 1.1) ** 2
    se = math.sqrt(exact * (1 - exact) / est.samples)
    assert abs(est.hit_fraction - exact) < 3 * se
    assert est.log_volume == pytest.approx(est.reference_log_volume + math.log(est.hit_fraction))


def test_radius_must_enclose():
    with pytest.raises(ConfigurationError):
        estimate_log_volume(semicircle_spec(), HSBall(1.0), 10)
    with pytest.raises(ConfigurationError):
        estimate_log_volume(semicircle_spec(), "nope", 10)


def test_contradictory_target_is_empty():
    est = estimate_log_volume(contradictory_spec(), samples=20_000, seed=1)
    assert est.neg_infinity and est.log_volume is None
    assert est.one_sided_bound == pytest.approx(est.reference_log_volume - math.log(20_000))
    assert est.normalized_chi == -math.inf
    seq = chi_sequence(contradictory_spec(), [2, 3, 4], samples=5000, seed=1)
    assert all(e.neg_infinity for _, e in seq)


@pytest.mark.slow
@pytest.mark.parametrize("c, frozen", [(0.0, 10.553947334754197), (0.5, 9.720101559089088)])
def test_pair_estimate_matches_oracle(c, frozen):
    oracle = pair_constraint_log_volume_oracle(3, 0.1, c)
    assert oracle == pytest.approx(frozen, rel=1e-9)
    est = estimate_log_volume(pair_spec(c), samples=1_000_000, seed=5)
    assert abs(est.log_volume - oracle) < 3 * est.std_error
    assert est.log_volume <= cone_upper_bound(3, 0.1, c) + 3 * est.std_error


def test_bit_reproducible_and_worker_independent():
    s = pair_spec(0.3, d=2, eps=0.2)
    a = estimate_log_volume(s, samples=30_000, seed=11)
    b = estimate_log_volume(s, samples=30_000, seed=11)
    c = estimate_log_volume(s, samples=30_000, seed=11, workers=3)
    assert a.hits == b.hits == c.hits and a.log_volume == c.log_volume
    assert estimate_log_volume(s, samples=30_000, seed=12).hits != a.hits


def test_gue_sampler_agrees_with_ball():
    s = semicircle_spec(eps=0.3)
    exact = math.log(math.pi ** 2 / 2 * (2.6 ** 2 - 1.4 ** 2))
    ball = estimate_log_volume(s, samples=200_000, seed=2)
    gue = estimate_log_volume(s, GUESampler(1.0), 200_000, seed=2)
    assert abs(ball.log_volume - exact) < 3 * ball.std_error
    assert abs(gue.log_volume - exact) < 3 * gue.std_error


def test_r_insensitive_above_threshold():
    t = build_target(CovarianceSpec(1, 0, [[1.0]]), 4)
    a = estimate_log_volume(MicrostateSpec(t, 4, 0.3, 2, R=3.0), samples=100_000, seed=3)
    b = estimate_log_volume(MicrostateSpec(t, 4, 0.3, 2, R=5.0), samples=100_000, seed=3)
    assert abs(a.log_volume - b.log_volume) < 3 * math.hypot(a.std_error, b.std_error)


def test_pushforward_scalar_two():
    r = pushforward_volume_ratio(semicircle_spec(), [[2.0]], np.zeros((0, 0)), 200_000, seed=4)
    assert r.expected == pytest.approx(4 * math.log(2))
    assert abs(r.log_ratio - r.expected) < 3 * r.std_error


@pytest.mark.parametrize("Q", [np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])])
def test_pushforward_unimodular(Q):
    t = build_target(CovarianceSpec(2, 0, np.eye(2)), 2)
    spec = MicrostateSpec(t, 2, 0.3, 2, mode="filter", words=("X1X1|", "X2X2|"))
    r = pushforward_volume_ratio(spec, Q, np.zeros((0, 0)), 100_000, seed=5)
    assert r.expected == pytest.approx(0, abs=1e-12)
    assert abs(r.log_ratio) < 3 * r.std_error


def test_pushforward_rejects_singular():
    with pytest.raises(ConfigurationError):
        pushforward_volume_ratio(semicircle_spec(), [[0.0]], np.zeros((0, 0)), 10)


def test_chi_sequence_semicircle_increases():
    seq = chi_sequence(semicircle_spec(eps=0.3), [2, 3, 4], samples=100_000, seed=6)
    vals = [e.normalized_chi for _, e in seq]
    assert vals[0] < vals[1] < vals[2] < 0.5 * math.log(2 * math.pi * math.e * 1.3)
    with pytest.raises(ConfigurationError):
        chi_sequence(semicircle_spec(), [3, 2])


def test_chi_sequence_orders_correlations():
    lo = chi_sequence(pair_spec(0.9, eps=0.2), [2, 3], samples=200_000, seed=7)
    hi = chi_sequence(pair_spec(0.0, eps=0.2), [2, 3], samples=200_000, seed=7)
    for (_, a), (_, b) in zip(hi, lo):
        gap = a.normalized_chi - b.normalized_chi
        assert gap > 3 * math.hypot(a.normalized_std_error, b.normalized_std_error)
