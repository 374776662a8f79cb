import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bifree_lab.errors import ConfigurationError
from bifree_lab.microstates import MicrostateTuple
from bifree_lab.moments import (CovarianceSpec, build_target, check_degree, gaussian_moment,
                                gaussian_tracial_moment, pushforward_covariance, read_moment_file,
                                semicircle_quantiles, target_from_values)
from bifree_lab.partitions import catalan, crosses, enumerate_nc_pairings, enumerate_nc_partitions
from bifree_lab.words import ReducedWord, parse_reduced_word, reduce_lr_word, reduced_words


def all_matchings(points):
    if not points:
        yield ()
        return
    a = points[0]
    for k in range(1, len(points)):
        rest = points[1:k] + points[k + 1:]
        for m in all_matchings(rest):
            yield ((a, points[k]),) + m


def brute_nc_pairings(p):
    return [m for m in all_matchings(list(range(p)))
            if not any(crosses(x, y) for x, y in itertools.combinations(m, 2))]


def brute_moment(A, seq):
    if len(seq) % 2:
        return 0.0
    return sum(math.prod(A[seq[a], seq[b]] for a, b in m) for m in brute_nc_pairings(len(seq)))


def test_pairing_examples():
    assert enumerate_nc_pairings(2) == [((0, 1),)]
    assert sorted(enumerate_nc_pairings(4)) == [((0, 1), (2, 3)), ((0, 3), (1, 2))]
    assert len(enumerate_nc_pairings(6)) == 5


@pytest.mark.parametrize("k", range(0, 9))
def test_pairing_counts_are_catalan(k):
    ps = enumerate_nc_pairings(2 * k)
    assert len(ps) == catalan(k)
    assert len(set(ps)) == len(ps)
    for m in ps:
        assert not any(crosses(x, y) for x, y in itertools.combinations(m, 2))


def test_pairing_matches_bruteforce_sets():
    for p in (2, 4, 6, 8):
        got = {tuple(sorted(m)) for m in enumerate_nc_pairings(p)}
        want = {tuple(sorted(tuple(sorted(x)) for x in m)) for m in brute_nc_pairings(p)}
        assert got == want


def test_pairing_errors():
    with pytest.raises(ValueError):
        enumerate_nc_pairings(3)
    with pytest.raises(ValueError, match="cap"):
        enumerate_nc_pairings(18)


def test_partition_counts():
    assert [len(enumerate_nc_partitions(p)) for p in range(10)] == [catalan(p) for p in range(10)]


def test_reduced_words_and_parsing():
    ws = reduced_words(1, 1, 2)
    assert [str(w) for w in ws] == ["X1|", "|Y1", "X1X1|", "X1|Y1", "|Y1Y1"]
    for w in reduced_words(2, 2, 3):
        assert parse_reduced_word(str(w)) == w
    assert reduce_lr_word([("R", 0), ("L", 1), ("R", 1)]) == ReducedWord((1,), (0, 1))
    with pytest.raises(ValueError):
        ReducedWord((), ())


def test_gaussian_moment_examples():
    c = 0.37
    cov = CovarianceSpec.pair(c)
    assert gaussian_moment(cov, ReducedWord((0,), ())) == 0
    assert gaussian_moment(cov, ReducedWord((0,), (0,))) == pytest.approx(c)
    assert gaussian_moment(cov, ReducedWord((0, 0), (0, 0))) == pytest.approx(1 + c * c)


def test_gaussian_moment_flattening_reverses_rights():
    A = np.array([[1.0, 0.2, 0.3], [0.2, 1.0, 0.4], [0.3, 0.4, 1.0]])
    cov = CovarianceSpec(1, 2, A)
    w = ReducedWord((0,), (0, 1, 0, 1, 1))
    # written out by hand: X, then Y2 Y2 Y1 Y2 Y1 as letters 2 2 1 2 1
    assert gaussian_moment(cov, w) == pytest.approx(brute_moment(A, (0, 2, 2, 1, 2, 1)))


def test_gaussian_moment_matches_bruteforce_up_to_degree_8():
    rng = np.random.default_rng(0)
    G = rng.standard_normal((4, 4))
    A = G @ G.T
    cov = CovarianceSpec(2, 2, A)
    for w in reduced_words(2, 2, 8):
        assert gaussian_moment(cov, w) == brute_moment(A, w.flatten(2))


def test_covariance_validation():
    with pytest.raises(ConfigurationError):
        CovarianceSpec(1, 1, [[1, 2], [2, 1]])
    with pytest.raises(ConfigurationError):
        CovarianceSpec(1, 1, [[1, 0.1], [0.2, 1]])
    CovarianceSpec(1, 1, [[1, 1], [1, 1 - 1e-11]])


def test_build_target_examples(tmp_path):
    t = build_target(CovarianceSpec.pair(0.0), 2)
    assert {str(w): v for w, v in t.table.items()} == {"X1|": 0, "|Y1": 0, "X1X1|": 1, "|Y1Y1": 1, "X1|Y1": 0}
    tup = MicrostateTuple((np.eye(3),), (np.eye(3),))
    e = build_target(tup, 2)
    assert all(v == 1 for v in e.table.values())
    g = build_target(CovarianceSpec(2, 1, np.diag([1.0, 2.0, 0.5]) + 0.1), 4)
    path = tmp_path / "m.txt"
    g.to_file(path)
    assert build_target(str(path), 4) == g
    assert read_moment_file(path).source == "file"


def test_gaussian_odd_words_vanish():
    t = build_target(CovarianceSpec(1, 1, [[2.0, 0.3], [0.3, 1.0]]), 7)
    assert all(v == 0 for w, v in t.table.items() if w.degree % 2)


def test_degree_cap():
    assert check_degree(8) == 8
    with pytest.raises(ConfigurationError):
        build_target(CovarianceSpec.pair(0.1), 9)
    assert build_target(CovarianceSpec(1, 0, [[1.0]]), 10, allow_large_degree=True).degree_cap == 10
    with pytest.raises(ConfigurationError):
        check_degree(13, True)


@pytest.mark.parametrize("content", ["", "1 1\n", "1 1 2\n1 0 1\n", "1 1 2\n1 0 x 0.5\n", "1 1 2\n1 0 2 0.5\n"])
def test_malformed_files(tmp_path, content):
    path = tmp_path / "bad.txt"
    path.write_text(content)
    with pytest.raises((ConfigurationError, IndexError)):
        read_moment_file(path)


def test_incomplete_table_rejected():
    with pytest.raises(ConfigurationError):
        target_from_values(1, 1, 2, {"X1|": 0.0})


def test_file_target_has_no_tracial_model(tmp_path):
    path = tmp_path / "m.txt"
    build_target(CovarianceSpec.pair(0.2), 2).to_file(path)
    with pytest.raises(ConfigurationError):
        build_target(str(path), 2).tracial_value((0, 1))


def test_restrict_gives_marginal():
    A = np.array([[1.0, 0.5, 0.2], [0.5, 2.0, 0.1], [0.2, 0.1, 3.0]])
    t = build_target(CovarianceSpec(2, 1, A), 4)
    r = t.restrict([1], [0])
    assert r == build_target(CovarianceSpec(1, 1, A[np.ix_([1, 2], [1, 2])]), 4)


def test_pushforward_covariance():
    cov = CovarianceSpec.pair(0.3)
    p = pushforward_covariance(cov, [[2.0]], [[-1.0]])
    assert np.allclose(p.A, [[4.0, -0.6], [-0.6, 1.0]])


def test_semicircle_quantiles_are_normalized():
    q = semicircle_quantiles(9, 2.0)
    assert abs(q.mean()) < 1e-14 and np.mean(q ** 2) == pytest.approx(2.0)
    assert np.all(np.diff(q) > 0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=0, max_size=8))
def test_tracial_moment_is_cyclic(seq):
    A = np.array([[1.0, 0.3, -0.2], [0.3, 1.5, 0.4], [-0.2, 0.4, 0.8]])
    seq = tuple(seq)
    if seq:
        rotated = seq[1:] + seq[:1]
        assert gaussian_tracial_moment(A, seq) == pytest.approx(gaussian_tracial_moment(A, rotated))
