import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from bifree_lab import _rng
from bifree_lab.matrices import (NumericalCorruption, _settle_trace, eval_generalized_lr_word, eval_lr_word,
                                 hermitian_from_coords, hermitian_to_coords, hs_inner, is_hermitian,
                                 operator_norm, sample_gue, sample_haar_unitary, sample_hs_ball, trace_is_real,
                                 word_traces)
from bifree_lab.words import left, right


def rand_herm(rng, d):
    Z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (Z + Z.conj().T) / 2


def test_hs_inner_examples():
    assert hs_inner(np.eye(3), np.eye(3)) == pytest.approx(3)
    assert hs_inner(np.diag([1.0, -1.0]), np.eye(2)) == 0
    A = rand_herm(np.random.default_rng(0), 4)
    assert hs_inner(A, A) == pytest.approx(np.sum(np.abs(A) ** 2), abs=1e-12)


def test_hs_inner_rejects_mismatch():
    with pytest.raises(ValueError):
        hs_inner(np.eye(2), np.eye(3))


def test_hs_inner_is_d_times_trace():
    rng = np.random.default_rng(1)
    A, B = rand_herm(rng, 5), rand_herm(rng, 5)
    assert hs_inner(A, B) == pytest.approx(5 * eval_lr_word([left(0), left(1)], [A, B], []), abs=1e-12)
    assert hs_inner(A, B) == pytest.approx(hs_inner(B, A), abs=1e-12)


def test_coordinates_are_isometric():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(16)
    A = hermitian_from_coords(x, 4)
    assert is_hermitian(A)
    assert np.sum(np.abs(A) ** 2) == pytest.approx(x @ x)
    assert np.allclose(hermitian_to_coords(A), x)


def test_gue_normalization_and_determinism():
    vals = [np.trace(sample_gue(50, 1.0, s) @ sample_gue(50, 1.0, s)).real / 50 for s in range(1000)]
    assert 0.95 <= np.mean(vals) <= 1.05
    assert np.array_equal(sample_gue(7, 2.0, 123), sample_gue(7, 2.0, 123))
    scalars = np.array([sample_gue(1, 1.0, s)[0, 0] for s in range(4000)])
    assert np.all(scalars.imag == 0)
    assert stats.kstest(scalars.real, "norm").pvalue > 0.001


@pytest.mark.parametrize("variance", [0.0, -1.0])
def test_gue_rejects_bad_variance(variance):
    with pytest.raises(ValueError):
        sample_gue(3, variance, 0)


def test_haar_entry_second_moment():
    d = 20
    vals = np.array([abs(sample_haar_unitary(d, s)[0, 0]) ** 2 for s in range(2000)])
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - 1 / d) < 3 * se


def test_haar_unitarity_and_u1():
    for d in (1, 5, 64, 256):
        U = sample_haar_unitary(d, d)
        assert np.max(np.abs(U @ U.conj().T - np.eye(d))) < 1e-10
    phases = np.angle([sample_haar_unitary(1, s)[0, 0] for s in range(3000)])
    assert stats.kstest((phases + np.pi) / (2 * np.pi), "uniform").pvalue > 0.001


def test_haar_left_invariance():
    d = 6
    rng = np.random.default_rng(3)
    A, B = rand_herm(rng, d), rand_herm(rng, d)
    V = sample_haar_unitary(d, 999)

    def stat(U):
        return np.trace(A @ U.conj().T @ B @ U).real / d

    s1 = [stat(sample_haar_unitary(d, s)) for s in range(10_000)]
    s2 = [stat(V @ sample_haar_unitary(d, s + 10_000)) for s in range(10_000)]
    assert stats.ks_2samp(s1, s2).pvalue > 0.001


def test_hs_ball_support_and_radial_law():
    assert all(np.linalg.norm(sample_hs_ball(2, 1.0, s)) <= 1 + 1e-12 for s in range(200))
    from bifree_lab.matrices import _hs_ball_batch

    X = _hs_ball_batch(_rng.stream(0), 2, 1.0, (100_000,))
    r = np.sqrt(np.sum(np.abs(X) ** 2, axis=(-2, -1)))
    assert stats.kstest(r, lambda t: np.clip(t, 0, 1) ** 4).statistic < 0.02


def test_hs_shell():
    norms = [np.linalg.norm(sample_hs_ball(3, 1.0, s, shell=(0.99, 1.01))) for s in range(200)]
    assert min(norms) >= 0.99 - 1e-12 and max(norms) <= 1.01 + 1e-12
    with pytest.raises(ValueError):
        sample_hs_ball(3, 1.0, 0, shell=(1.0, 1.0))


def test_operator_norm_examples():
    assert operator_norm(np.diag([1.0, -3.0, 2.0])) == pytest.approx(3)
    assert operator_norm(np.eye(4)) == pytest.approx(1)
    assert operator_norm(np.array([[0.0, 2.0], [2.0, 0.0]])) == pytest.approx(2)


def test_eval_lr_word_examples():
    A1 = np.diag([1.0, -1.0])
    assert eval_lr_word([left(0), right(0)], [A1], [np.eye(2)]) == 0
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    B1, B2 = np.diag([1.0, 2.0]), np.diag([3.0, 4.0])
    assert eval_lr_word([left(0), right(0), right(1)], [A], [B1, B2]) == 0


def test_eval_lr_word_right_letters_reverse():
    rng = np.random.default_rng(4)
    A = [rand_herm(rng, 3) for _ in range(2)]
    B = [rand_herm(rng, 3) for _ in range(2)]
    got = eval_lr_word([left(0), right(0), right(1)], A, B)
    assert got == pytest.approx(np.trace(A[0] @ B[1] @ B[0]) / 3, abs=1e-12)


def test_eval_lr_word_lr_commutation_exhaustive():
    rng = np.random.default_rng(5)
    lefts = [rand_herm(rng, 3) for _ in range(2)]
    rights = [rand_herm(rng, 3) for _ in range(2)]
    for length in range(1, 6):
        for word in itertools.product([left(0), left(1), right(0), right(1)], repeat=length):
            ref = eval_lr_word(word, lefts, rights)
            ls = [x for x in word if x.side == "L"]
            rs = [x for x in word if x.side == "R"]
            # every interleaving that keeps each side's order
            for pos in itertools.combinations(range(length), len(ls)):
                li, ri = iter(ls), iter(rs)
                w2 = [next(li) if k in pos else next(ri) for k in range(length)]
                assert abs(eval_lr_word(w2, lefts, rights) - ref) < 1e-12


def test_eval_lr_word_powers_match_eigenvalues():
    A = rand_herm(np.random.default_rng(6), 5)
    ev = np.linalg.eigvalsh(A)
    for p in range(1, 9):
        assert eval_lr_word([left(0)] * p, [A], []) == pytest.approx(np.mean(ev ** p), abs=1e-10)


def test_eval_lr_word_errors():
    with pytest.raises(ValueError):
        eval_lr_word([left(0)], [np.eye(2)], [np.eye(3)])
    with pytest.raises(IndexError):
        eval_lr_word([right(1)], [np.eye(2)], [np.eye(2)])


def test_complex_traces_only_where_allowed():
    rng = np.random.default_rng(7)
    A = [rand_herm(rng, 3) for _ in range(3)]
    v = eval_lr_word([left(0), left(1), left(2)], A, [])
    assert isinstance(v, complex) and abs(v.imag) > 1e-3
    assert trace_is_real((0, 1, 0, 1)) and trace_is_real((0, 0, 1)) and not trace_is_real((0, 1, 2))
    with pytest.raises(NumericalCorruption):
        _settle_trace(np.array(1 + 1e-6j), True)


def test_generalized_word_reduces_to_ordinary_for_d1_one():
    rng = np.random.default_rng(8)
    letters = [left(0), left(1), right(0), right(1)]
    for trial in range(100):
        lefts = [rand_herm(rng, 3) for _ in range(2)]
        rights = [rand_herm(rng, 3) for _ in range(2)]
        word = [letters[k] for k in rng.integers(0, 4, size=rng.integers(1, 6))]
        a = eval_generalized_lr_word(word, lefts, rights, 1)
        b = eval_lr_word(word, lefts, rights)
        assert abs(a - b) < 1e-12


def test_generalized_single_letter_is_trace():
    A = rand_herm(np.random.default_rng(9), 4)
    assert eval_generalized_lr_word([left(0)], [A], [], 2) == pytest.approx(np.trace(A).real / 4, abs=1e-12)


def test_generalized_matches_elementary_tensor_formula():
    # for elementary tensors the state factorizes:
    # tau_{d1}(prod a) * tau_{d2}(prod of left b's, then reversed right b's)
    rng = np.random.default_rng(10)
    d1 = d2 = 2
    la = [rand_herm(rng, d1) for _ in range(2)]
    lb = [rand_herm(rng, d2) for _ in range(2)]
    ra = [rand_herm(rng, d1) for _ in range(2)]
    rb = [rand_herm(rng, d2) for _ in range(2)]
    lefts = [np.kron(a, b) for a, b in zip(la, lb)]
    rights = [np.kron(a, b) for a, b in zip(ra, rb)]
    letters = [left(0), left(1), right(0), right(1)]
    for trial in range(50):
        word = [letters[k] for k in rng.integers(0, 4, size=rng.integers(1, 6))]
        first = np.eye(d1, dtype=complex)
        for side, i in word:
            first = first @ (la[i] if side == "L" else ra[i])
        second_l = np.eye(d2, dtype=complex)
        for side, i in word:
            if side == "L":
                second_l = second_l @ lb[i]
        second_r = np.eye(d2, dtype=complex)
        for side, i in reversed(word):
            if side == "R":
                second_r = second_r @ rb[i]
        expect = np.trace(first) / d1 * np.trace(second_l @ second_r) / d2
        assert abs(eval_generalized_lr_word(word, lefts, rights, d1) - expect) < 1e-12


def test_generalized_rejects_bad_factorization():
    with pytest.raises(ValueError):
        eval_generalized_lr_word([left(0)], [np.eye(6)], [], 4)


def test_word_traces_batched():
    rng = np.random.default_rng(11)
    A = np.array([rand_herm(rng, 3) for _ in range(4)]).reshape(2, 2, 3, 3)
    tr = word_traces([A[:, 0], A[:, 1]], 3)
    for b in range(2):
        ref = np.trace(A[b, 0] @ A[b, 1] @ A[b, 1]) / 3
        assert abs(tr[(0, 1, 1)][b] - ref) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 63), st.integers(1, 6))
def test_samplers_are_pure_functions_of_seed(seed, d):
    assert np.array_equal(sample_haar_unitary(d, seed), sample_haar_unitary(d, seed))
    assert np.array_equal(sample_hs_ball(d, 2.0, seed), sample_hs_ball(d, 2.0, seed))
