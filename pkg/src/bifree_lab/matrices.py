"""Hermitian matrix arithmetic, random ensembles and left/right word evaluation.

Matrices are plain complex ``numpy`` arrays.  Batched helpers accept arrays
with leading batch axes, e.g. shape ``(batch, d, d)``.

The real coordinates of M_d^sa used for Lebesgue measure are the ``d**2``
numbers ``A_ii`` and ``sqrt(2) Re A_ij``, ``sqrt(2) Im A_ij`` (i < j), so the
Euclidean norm of the coordinate vector is the Hilbert-Schmidt norm.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import _rng
from .words import Letter, check_lr_word

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
IMAG_TOL = 1e-10


class NumericalCorruption(ArithmeticError):
    """A trace that must be real came out with a large imaginary part."""


def _check_square(A: np.ndarray) -> int:
    A = np.asarray(A)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    return A.shape[-1]


def is_hermitian(A: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    A = np.asarray(A)
    return bool(np.max(np.abs(A - np.conj(np.swapaxes(A, -1, -2))), initial=0.0) <= tol)


def as_hermitian(A) -> np.ndarray:
    """Validate ``A`` as Hermitian and return it as a complex array."""
    A = np.asarray(A, dtype=complex)
    _check_square(A)
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if not is_hermitian(A, HERMITIAN_TOL * scale):
        raise ValueError("matrix is not Hermitian")
    return A


def hs_inner(A, B) -> float:
    """Unnormalized trace pairing ``Tr(B* A)``; real for Hermitian inputs."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    _check_square(A)
    return float(np.real(np.vdot(B, A)))


def normalized_trace(A) -> complex:
    A = np.asarray(A)
    return np.trace(A, axis1=-2, axis2=-1) / A.shape[-1]


def operator_norm(A) -> float | np.ndarray:
    """Largest absolute eigenvalue of a Hermitian matrix (batched over leading axes)."""
    A = np.asarray(A)
    _check_square(A)
    norms = np.max(np.abs(np.linalg.eigvalsh(A)), axis=-1)
    return float(norms) if norms.ndim == 0 else norms


# -- coordinates ------------------------------------------------------------

def hermitian_from_coords(x: np.ndarray, d: int) -> np.ndarray:
    """Map real coordinate vectors of shape ``(..., d*d)`` isometrically into M_d^sa."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d * d:
        raise ValueError(f"need {d * d} coordinates, got {x.shape[-1]}")
    batch = x.shape[:-1]
    out = np.zeros(batch + (d, d), dtype=complex)
    di = np.arange(d)
    out[..., di, di] = x[..., :d]
    iu, ju = np.triu_indices(d, k=1)
    k = len(iu)
    off = (x[..., d:d + k] + 1j * x[..., d + k:]) / np.sqrt(2.0)
    out[..., iu, ju] = off
    out[..., ju, iu] = np.conj(off)
    return out


def hermitian_to_coords(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    d = _check_square(A)
    iu, ju = np.triu_indices(d, k=1)
    di = np.arange(d)
    off = A[..., iu, ju] * np.sqrt(2.0)
    return np.concatenate([A[..., di, di].real, off.real, off.imag], axis=-1)


# -- samplers ---------------------------------------------------------------

def _gue_batch(rng: np.random.Generator, d: int, variance: float, shape=()) -> np.ndarray:
    x = rng.standard_normal(tuple(shape) + (d * d,))
    return hermitian_from_coords(x, d) * np.sqrt(variance / d)


def sample_gue(d: int, variance: float, seed: int) -> np.ndarray:
    """Gaussian Hermitian matrix with ``E[tau_d(A^2)] = variance``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if not variance > 0:
        raise ValueError("variance must be positive")
    return _gue_batch(_rng.stream(seed), d, variance)


def _haar_batch(rng: np.random.Generator, d: int, shape=()) -> np.ndarray:
    shape = tuple(shape)
    Z = (rng.standard_normal(shape + (d, d)) + 1j * rng.standard_normal(shape + (d, d))) / np.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    diag = np.diagonal(R, axis1=-2, axis2=-1)
    phase = diag / np.abs(diag)
    # QR is unique only up to a diagonal phase; fixing R's diagonal positive makes Q exactly Haar
    return Q * phase[..., None, :]


def sample_haar_unitary(d: int, seed: int) -> np.ndarray:
    if d < 1:
        raise ValueError("d must be >= 1")
    return _haar_batch(_rng.stream(seed), d)


def _ball_radii(rng: np.random.Generator, N: int, radius: float, shell, size):
    u = rng.random(size)
    if shell is None:
        return radius * u ** (1.0 / N)
    r_lo, r_hi = shell
    lo, hi = r_lo ** N, r_hi ** N
    return (lo + u * (hi - lo)) ** (1.0 / N)


def _hs_ball_batch(rng, d: int, radius: float, shape=(), shell=None) -> np.ndarray:
    shape = tuple(shape)
    N = d * d
    g = rng.standard_normal(shape + (N,))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    r = _ball_radii(rng, N, radius, shell, shape)
    return hermitian_from_coords(g * np.asarray(r)[..., None], d)


def sample_hs_ball(d: int, radius: float, seed: int, shell: tuple[float, float] | None = None) -> np.ndarray:
    """Uniform sample from the HS ball of ``radius`` in M_d^sa, or from the shell ``r_lo <= |A| <= r_hi``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if shell is None:
        if not radius > 0:
            raise ValueError("radius must be positive")
    else:
        r_lo, r_hi = shell
        if not (0 <= r_lo < r_hi):
            raise ValueError(f"degenerate shell ({r_lo}, {r_hi})")
    return _hs_ball_batch(_rng.stream(seed), d, radius, (), shell)


# -- word evaluation ----------------------------------------------------------

def trace_is_real(sequence: Sequence) -> bool:
    """Whether ``tau(X_{s1} ... X_{sk})`` is real for every choice of Hermitian ``X``.

    ``conj(tau(w)) = tau(reverse(w))``, so the trace is forced real exactly when
    the reversed sequence is a cyclic rotation of the sequence.
    """
    s = tuple(sequence)
    r = s[::-1]
    return any(s[k:] + s[:k] == r for k in range(max(len(s), 1)))


def _settle_trace(t, must_be_real: bool, what: str = "trace"):
    t = np.asarray(t)
    scale = np.maximum(1.0, np.abs(t))
    small = np.abs(t.imag) <= IMAG_TOL * scale
    if np.all(small):
        return t.real
    if must_be_real:
        raise NumericalCorruption(f"{what} has imaginary residue {np.max(np.abs(t.imag)):.3e}")
    return t


def _product(mats: Sequence[np.ndarray]) -> np.ndarray | None:
    out = None
    for X in mats:
        out = X if out is None else out @ X
    return out


def _scalar(r):
    if np.ndim(r) == 0:
        return complex(r) if np.iscomplexobj(r) else float(r)
    return r


def eval_lr_word(word: Sequence[Letter], lefts: Sequence[np.ndarray], rights: Sequence[np.ndarray]):
    """``tau_d(C_{k1} ... C_{kp}(I_d))`` for a word of left/right multiplications.

    Equals ``tau_d(A_{i1}..A_{ip} B_{jq}..B_{j1})``: the left matrices in order of
    appearance, the right matrices in reverse order of appearance.  Returns a
    float whenever the imaginary part is below ``IMAG_TOL``; words whose trace
    is not forced real (three or more distinct non-commuting factors) may come
    back complex.  Works on batches when the matrices share leading batch axes.
    """
    lefts = [np.asarray(A) for A in lefts]
    rights = [np.asarray(B) for B in rights]
    mats = lefts + rights
    if not mats:
        raise ValueError("no matrices supplied")
    shape = mats[0].shape
    if any(X.shape != shape for X in mats):
        raise ValueError("dimension mismatch among inputs")
    d = _check_square(mats[0])
    word = check_lr_word(word, len(lefts), len(rights))
    lseq = [("L", i) for s, i in word if s == "L"]
    rseq = [("R", j) for s, j in reversed(word) if s == "R"]
    lprod = _product([lefts[i] for _, i in lseq])
    rprod = _product([rights[j] for _, j in rseq])
    if lprod is None:
        t = normalized_trace(rprod)
    elif rprod is None:
        t = normalized_trace(lprod)
    else:
        # tau(XY) without forming XY
        t = np.sum(lprod * np.swapaxes(rprod, -1, -2), axis=(-2, -1)) / d
    return _scalar(_settle_trace(t, trace_is_real(lseq + rseq), "word trace"))


def _factor_dims(D: int, d1: int) -> int:
    if d1 < 1 or D % d1:
        raise ValueError(f"dimension {D} does not factor as d1={d1} times d2")
    return D // d1


def _to_op_factor(X: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """Transpose the M_{d2} tensor factor of ``X`` in M_{d1} (x) M_{d2}."""
    T = X.reshape(d1, d2, d1, d2)
    return T.transpose(0, 3, 2, 1).reshape(d1 * d2, d1 * d2)


def eval_generalized_lr_word(word: Sequence[Letter], lefts, rights, d1: int):
    """Word evaluation for matrices in M_{d1} (x) M_{d2}.

    Left letters act as ``X (x) I`` and right letters as ``X`` on the first
    factor and ``X^op`` on the opposite-algebra factor of
    M_{d1} (x) M_{d2} (x) M_{d2}^op.  The opposite algebra is represented by
    transposition, and the state ``tau_{d1} (x) (tau_{d2} o m)`` becomes a
    partial contraction of the product.
    """
    lefts = [np.asarray(A, dtype=complex) for A in lefts]
    rights = [np.asarray(B, dtype=complex) for B in rights]
    mats = lefts + rights
    if not mats:
        raise ValueError("no matrices supplied")
    D = _check_square(mats[0])
    if any(X.shape != (D, D) for X in mats):
        raise ValueError("dimension mismatch among inputs")
    d2 = _factor_dims(D, d1)
    word = check_lr_word(word, len(lefts), len(rights))
    I2 = np.eye(d2)

    def embed(letter: Letter) -> np.ndarray:
        side, idx = letter
        if side == "L":
            return np.kron(lefts[idx], I2)
        # X on factors (1, 3) with the M_{d2} part transposed, identity on factor 2
        Xt = _to_op_factor(rights[idx], d1, d2).reshape(d1, d2, d1, d2)
        full = np.einsum("acAC,bB->abcABC", Xt, I2)
        return full.reshape(d1 * d2 * d2, d1 * d2 * d2)

    P = embed(word[0])
    for letter in word[1:]:
        P = P @ embed(letter)
    T = P.reshape(d1, d2, d2, d1, d2, d2)
    t = np.einsum("abbacc->", T) / (d1 * d2)
    return _scalar(_settle_trace(t, False, "generalized word trace"))


def word_traces(mats: Sequence[np.ndarray], max_len: int, words=None) -> dict:
    """``tau_d`` of every word over ``mats`` up to ``max_len`` letters (or of ``words`` only).

    Shares prefix products, so each matrix product is formed once.  Values are
    complex; matrices may carry leading batch axes.
    """
    mats = [np.asarray(X) for X in mats]
    d = _check_square(mats[0])
    if words is None:
        words = [w for k in range(1, max_len + 1) for w in _all_words(len(mats), k)]
    words = [tuple(w) for w in words]
    prefixes: dict = {}

    def prefix(w):
        if len(w) == 1:
            return mats[w[0]]
        P = prefixes.get(w)
        if P is None:
            P = prefix(w[:-1]) @ mats[w[-1]]
            prefixes[w] = P
        return P

    out = {}
    for w in words:
        if len(w) == 1:
            out[w] = normalized_trace(mats[w[0]])
        else:
            # tau(P X) without forming the last product
            P = prefix(w[:-1])
            out[w] = np.sum(P * np.swapaxes(mats[w[-1]], -1, -2), axis=(-2, -1)) / d
    return out


def _all_words(k: int, length: int):
    import itertools

    return itertools.product(range(k), repeat=length)
