"""Target moment tables for microstate membership.

A :class:`TargetMoments` holds the values ``phi(X_{i1}..X_{ip} Y_{j1}..Y_{jq})`` on
every reduced word of degree ``<= M``.  Three sources are supported:

* a bi-free Gaussian family given by its covariance (:class:`CovarianceSpec`),
  evaluated by the non-crossing Wick formula;
* an empirical matrix tuple, evaluated under ``tau_d``;
* a moment file.

Moment files are whitespace separated text.  The first line is ``n m M``;
each following line is ``p q i1 .. ip j1 .. jq value`` with 1-based indices.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError
from .partitions import enumerate_nc_pairings
from .words import ReducedWord, reduced_words

DEFAULT_DEGREE_CAP = 8
MAX_DEGREE_CAP = 12
PSD_TOL = 1e-10


def check_degree(M: int, allow_large_degree: bool = False) -> int:
    M = int(M)
    if M < 1:
        raise ConfigurationError("degree cap M must be >= 1")
    cap = MAX_DEGREE_CAP if allow_large_degree else DEFAULT_DEGREE_CAP
    if M > cap:
        hint = "" if allow_large_degree else f" (pass allow_large_degree=True for up to {MAX_DEGREE_CAP})"
        raise ConfigurationError(f"degree cap M={M} exceeds {cap}{hint}")
    return M


@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """Covariance ``A[k, l] = phi(S_k S_l)`` of a centred bi-free Gaussian family.

    Indices ``0..n-1`` are left variables, ``n..n+m-1`` right variables.
    """

    n: int
    m: int
    A: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        k = self.n + self.m
        if self.n < 0 or self.m < 0:
            raise ConfigurationError("variable counts must be non-negative")
        if A.shape != (k, k):
            raise ConfigurationError(f"covariance must be {k}x{k}, got {A.shape}")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise ConfigurationError("covariance is not symmetric")
        if k and np.linalg.eigvalsh(A).min() < -PSD_TOL:
            raise ConfigurationError("covariance is not positive semidefinite")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @classmethod
    def pair(cls, c: float, variance: float = 1.0) -> "CovarianceSpec":
        """One left and one right variable with ``phi(X Y) = c``."""
        return cls(1, 1, [[variance, c], [c, variance]])

    @property
    def size(self) -> int:
        return self.n + self.m

    def variances(self) -> np.ndarray:
        return np.diag(self.A).copy()

    def __eq__(self, other):
        return (isinstance(other, CovarianceSpec) and (self.n, self.m) == (other.n, other.m)
                and np.array_equal(self.A, other.A))

    def __hash__(self):
        return hash((self.n, self.m, self.A.tobytes()))


def gaussian_tracial_moment(A: np.ndarray, sequence: Sequence[int]) -> float:
    """``sum over non-crossing pairings pi of prod_{(a,b) in pi} A[s_a, s_b]``."""
    s = tuple(sequence)
    if len(s) % 2:
        return 0.0
    if not s:
        return 1.0
    total = 0.0
    for pairing in enumerate_nc_pairings(len(s)):
        term = 1.0
        for a, b in pairing:
            term *= A[s[a], s[b]]
            if term == 0.0:
                break
        total += term
    return total


def gaussian_moment(cov: CovarianceSpec, w: ReducedWord) -> float:
    """Moment of a reduced word for the bi-free Gaussian family ``cov``."""
    w.check(cov.n, cov.m)
    return gaussian_tracial_moment(cov.A, w.flatten(cov.n))


@dataclass(eq=False)
class TargetMoments:
    """Reduced-word moment table, total up to ``degree_cap``."""

    n: int
    m: int
    degree_cap: int
    table: dict
    source: str = "table"
    covariance: CovarianceSpec | None = field(default=None, repr=False)
    tracial: Callable[[tuple[int, ...]], complex] | None = field(default=None, repr=False)

    def __post_init__(self):
        missing = [w for w in reduced_words(self.n, self.m, self.degree_cap) if w not in self.table]
        if missing:
            raise ConfigurationError(
                f"moment table is not total up to degree {self.degree_cap}: missing {len(missing)} words, "
                f"e.g. {missing[0]}")

    def __eq__(self, other):
        if not isinstance(other, TargetMoments):
            return NotImplemented
        return ((self.n, self.m, self.degree_cap) == (other.n, other.m, other.degree_cap)
                and self.table == other.table)

    def value(self, w: ReducedWord):
        try:
            return self.table[w]
        except KeyError:
            raise ConfigurationError(f"target has no value for word {w}") from None

    def tracial_value(self, sequence: tuple[int, ...]):
        """Moment of an interleaved word in the tracial model (letters ``n..n+m-1`` are the rights)."""
        if self.tracial is None:
            raise ConfigurationError(
                f"a {self.source!r} target only defines reduced words; interleaved words need a tracial model")
        return self.tracial(tuple(sequence))

    def max_second_moment(self) -> float:
        vals = [self.table[ReducedWord((i, i), ())] for i in range(self.n)]
        vals += [self.table[ReducedWord((), (j, j))] for j in range(self.m)]
        return float(max(np.real(vals)))

    def restrict(self, lefts: Sequence[int], rights: Sequence[int], degree_cap: int | None = None) -> "TargetMoments":
        """Marginal target of the sub-family ``lefts`` / ``rights`` (renumbered from 0)."""
        lefts, rights = tuple(lefts), tuple(rights)
        M = self.degree_cap if degree_cap is None else degree_cap
        if M > self.degree_cap:
            raise ConfigurationError("cannot raise the degree cap of a target")
        table = {}
        for w in reduced_words(len(lefts), len(rights), M):
            big = ReducedWord(tuple(lefts[i] for i in w.left), tuple(rights[j] for j in w.right))
            table[w] = self.table[big]
        tracial = None
        if self.tracial is not None:
            letters = lefts + tuple(self.n + j for j in rights)
            parent = self.tracial
            tracial = lambda seq: parent(tuple(letters[k] for k in seq))
        cov = None
        if self.covariance is not None:
            idx = list(lefts) + [self.n + j for j in rights]
            cov = CovarianceSpec(len(lefts), len(rights), self.covariance.A[np.ix_(idx, idx)])
        return TargetMoments(len(lefts), len(rights), M, table, self.source, cov, tracial)

    def with_degree(self, M: int) -> "TargetMoments":
        return self.restrict(range(self.n), range(self.m), M)

    # -- file format ----------------------------------------------------------

    def to_file(self, path: str | os.PathLike) -> None:
        lines = [f"{self.n} {self.m} {self.degree_cap}"]
        for w in reduced_words(self.n, self.m, self.degree_cap):
            v = self.table[w]
            if isinstance(v, complex) or np.iscomplexobj(v):
                if abs(np.imag(v)) > 0:
                    raise ConfigurationError(f"moment file values must be real; {w} = {v}")
                v = float(np.real(v))
            idx = [str(i + 1) for i in w.left] + [str(j + 1) for j in w.right]
            lines.append(" ".join([str(len(w.left)), str(len(w.right))] + idx + [repr(float(v))]))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def read_moment_file(path: str | os.PathLike) -> TargetMoments:
    try:
        with open(path) as fh:
            rows = [line.split() for line in fh if line.strip() and not line.lstrip().startswith("#")]
    except OSError as exc:
        raise ConfigurationError(f"cannot read moment file {path}: {exc}") from exc
    if not rows or len(rows[0]) != 3:
        raise ConfigurationError(f"{path}: header must be 'n m M'")
    try:
        n, m, M = (int(x) for x in rows[0])
        table = {}
        for lineno, row in enumerate(rows[1:], start=2):
            p, q = int(row[0]), int(row[1])
            if len(row) != 3 + p + q:
                raise ConfigurationError(f"{path}:{lineno}: expected {3 + p + q} fields, got {len(row)}")
            li = tuple(int(x) - 1 for x in row[2:2 + p])
            rj = tuple(int(x) - 1 for x in row[2 + p:2 + p + q])
            w = ReducedWord(li, rj)
            w.check(n, m)
            if w.degree > M:
                raise ConfigurationError(f"{path}:{lineno}: word degree exceeds M={M}")
            table[w] = float(row[-1])
    except (ValueError, IndexError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"{path}: malformed moment file ({exc})") from exc
    return TargetMoments(n, m, M, table, source="file")


def _gaussian_target(cov: CovarianceSpec, M: int) -> TargetMoments:
    table = {w: gaussian_moment(cov, w) for w in reduced_words(cov.n, cov.m, M)}
    A = cov.A
    tracial = lru_cache(maxsize=None)(lambda seq: gaussian_tracial_moment(A, seq))
    return TargetMoments(cov.n, cov.m, M, table, "gaussian", cov, tracial)


def _empirical_target(t, M: int) -> TargetMoments:
    from .microstates import reduced_word_values

    lefts = np.asarray(t.lefts)
    rights = np.asarray(t.rights)
    n, m = len(lefts), len(rights)
    words = reduced_words(n, m, M)
    vals = reduced_word_values(lefts[None], rights[None], words)[:, 0]
    table = {w: _clean(v) for w, v in zip(words, vals)}
    mats = list(lefts) + list(rights)
    d = mats[0].shape[0]

    @lru_cache(maxsize=None)
    def tracial(seq):
        P = np.eye(d, dtype=complex)
        for k in seq:
            P = P @ mats[k]
        return _clean(np.trace(P) / d)

    return TargetMoments(n, m, M, table, "empirical", None, tracial)


def _clean(v):
    v = complex(v)
    if abs(v.imag) <= 1e-12 * max(1.0, abs(v)):
        return v.real
    return v


def build_target(source, M: int, *, allow_large_degree: bool = False) -> TargetMoments:
    """Target table of degree ``M`` from a covariance, a matrix tuple or a moment file path."""
    M = check_degree(M, allow_large_degree)
    if isinstance(source, CovarianceSpec):
        return _gaussian_target(source, M)
    if isinstance(source, (str, os.PathLike)):
        target = read_moment_file(source)
        if target.degree_cap < M:
            raise ConfigurationError(f"moment file has degree {target.degree_cap} < requested M={M}")
        return target if target.degree_cap == M else target.with_degree(M)
    if hasattr(source, "lefts") and hasattr(source, "rights"):
        return _empirical_target(source, M)
    raise ConfigurationError(f"unsupported target source {type(source).__name__}")


def target_from_values(n: int, m: int, M: int, values: Mapping) -> TargetMoments:
    """Target from an explicit mapping; keys may be :class:`ReducedWord` or ``"X1X1|Y1"`` strings."""
    from .words import parse_reduced_word

    table = {}
    for key, v in values.items():
        w = key if isinstance(key, ReducedWord) else parse_reduced_word(key)
        w.check(n, m)
        table[w] = v
    return TargetMoments(n, m, M, table, source="table")


def pushforward_covariance(cov: CovarianceSpec, Q, Rm) -> CovarianceSpec:
    """Covariance of ``(Q X, Rm Y)``: ``(Q + Rm) A (Q + Rm)^T`` with ``+`` the direct sum."""
    T = direct_sum(Q, Rm, cov.n, cov.m)
    return CovarianceSpec(cov.n, cov.m, T @ cov.A @ T.T)


def direct_sum(Q, Rm, n: int, m: int) -> np.ndarray:
    Q = np.atleast_2d(np.asarray(Q, dtype=float)) if n else np.zeros((0, 0))
    Rm = np.atleast_2d(np.asarray(Rm, dtype=float)) if m else np.zeros((0, 0))
    if Q.shape != (n, n) or Rm.shape != (m, m):
        raise ConfigurationError(f"transform shapes {Q.shape}, {Rm.shape} do not match (n, m) = ({n}, {m})")
    T = np.zeros((n + m, n + m))
    T[:n, :n] = Q
    T[n:, n:] = Rm
    return T


def semicircle_quantiles(d: int, variance: float = 1.0) -> np.ndarray:
    """``d`` eigenvalues at the mid-quantiles of the semicircle law of the given variance."""
    from scipy.optimize import brentq

    def cdf(x):
        x = min(max(x, -2.0), 2.0)
        return 0.5 + (x * math.sqrt(4 - x * x) / 4 + math.asin(x / 2)) / math.pi

    qs = (np.arange(d) + 0.5) / d
    pts = np.array([brentq(lambda x: cdf(x) - q, -2.0, 2.0) for q in qs])
    pts -= pts.mean()
    return pts * math.sqrt(variance / np.mean(pts ** 2))
