"""Microstate tuples and membership in the sets Gamma_R.

Three enumeration modes are supported:

``bifree-reduced``
    every reduced word ``X_{i1}..X_{ip} | Y_{j1}..Y_{jq}`` of degree ``<= M``;
    the tuple value is ``tau_d(A_{i1}..A_{ip} B_{jq}..B_{j1})``.
``free-interleaved``
    every word over all ``n + m`` matrices taken as ordinary tracial
    variables; target values come from the target's tracial model.
``filter``
    an explicit list of reduced words (used to compare with the Gram oracle).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .matrices import as_hermitian, normalized_trace, word_traces
from .moments import TargetMoments
from .words import ReducedWord, interleaved_words, parse_reduced_word, reduced_words

MODES = ("bifree-reduced", "free-interleaved", "filter")

#: joint sizes above this are refused at degrees above ``MAX_DEGREE_LARGE``
MAX_VARS_LARGE = 4
MAX_DEGREE_LARGE = 4


@dataclass(frozen=True, eq=False)
class MicrostateTuple:
    lefts: tuple
    rights: tuple
    R: float = math.inf

    def __post_init__(self):
        lefts = tuple(as_hermitian(A) for A in self.lefts)
        rights = tuple(as_hermitian(B) for B in self.rights)
        mats = lefts + rights
        if not mats:
            raise ValueError("a microstate tuple needs at least one matrix")
        if any(X.shape != mats[0].shape or X.ndim != 2 for X in mats):
            raise ValueError("all matrices must share one dimension d")
        if not self.R > 0:
            raise ValueError("norm cap R must be positive")
        object.__setattr__(self, "lefts", lefts)
        object.__setattr__(self, "rights", rights)

    @property
    def n(self) -> int:
        return len(self.lefts)

    @property
    def m(self) -> int:
        return len(self.rights)

    @property
    def d(self) -> int:
        return (self.lefts + self.rights)[0].shape[0]

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        d = self.d
        L = np.array(self.lefts) if self.lefts else np.zeros((0, d, d), complex)
        Rt = np.array(self.rights) if self.rights else np.zeros((0, d, d), complex)
        return L, Rt

    def conjugate(self, U: np.ndarray) -> "MicrostateTuple":
        Uh = U.conj().T
        return MicrostateTuple(tuple(U @ A @ Uh for A in self.lefts),
                               tuple(U @ B @ Uh for B in self.rights), self.R)


@dataclass(frozen=True)
class MicrostateSpec:
    """Parameters of ``Gamma_R(target; M, d, epsilon)``."""

    target: TargetMoments
    M: int
    epsilon: float
    d: int
    R: float = math.inf
    mode: str = "bifree-reduced"
    words: tuple = field(default=(), compare=True)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if self.M < 1:
            raise ConfigurationError("M must be >= 1")
        if self.d < 1:
            raise ConfigurationError("d must be >= 1")
        if not self.R > 0:
            raise ConfigurationError("R must be positive (use math.inf for no cap)")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.target.degree_cap < self.M:
            raise ConfigurationError(f"target degree cap {self.target.degree_cap} < M={self.M}")
        k = self.target.n + self.target.m
        if k > MAX_VARS_LARGE and self.M > MAX_DEGREE_LARGE:
            raise ConfigurationError(
                f"n+m={k} > {MAX_VARS_LARGE} with M={self.M} > {MAX_DEGREE_LARGE}: the word count grows "
                f"like (n+m)^M and is not supported")
        if self.mode == "filter":
            if not self.words:
                raise ConfigurationError("filter mode needs an explicit word list")
            words = tuple(w if isinstance(w, ReducedWord) else parse_reduced_word(w) for w in self.words)
            for w in words:
                w.check(self.target.n, self.target.m)
                if w.degree > self.M:
                    raise ConfigurationError(f"filter word {w} exceeds M={self.M}")
                if w not in self.target.table:
                    raise ConfigurationError(f"target has no value for filter word {w}")
            object.__setattr__(self, "words", words)
        elif self.words:
            raise ConfigurationError("an explicit word list is only allowed in filter mode")
        if self.mode == "free-interleaved" and self.target.tracial is None:
            raise ConfigurationError(
                f"free-interleaved mode needs a tracial model, which a {self.target.source!r} target lacks")

    @property
    def n(self) -> int:
        return self.target.n

    @property
    def m(self) -> int:
        return self.target.m

    def checked_words(self) -> list:
        """The words tested for membership: ReducedWords, or index tuples in free mode."""
        if self.mode == "filter":
            return list(self.words)
        if self.mode == "bifree-reduced":
            return reduced_words(self.n, self.m, self.M)
        return list(interleaved_words(self.n + self.m, self.M))

    def target_values(self) -> np.ndarray:
        if self.mode == "free-interleaved":
            vals = [self.target.tracial_value(w) for w in self.checked_words()]
        else:
            vals = [self.target.value(w) for w in self.checked_words()]
        return np.array(vals, dtype=complex)

    def second_moment_bound(self) -> float:
        """HS radius enclosing every matrix of every tuple in the set, or ``inf`` if unbounded."""
        checked = {}
        for w in self.checked_words():
            if self.mode == "free-interleaved":
                if len(w) == 2 and w[0] == w[1]:
                    checked[w[0]] = self.target.tracial_value(w)
            elif w.degree == 2 and len(set(w.left + w.right)) == 1 and (len(w.left) == 2 or len(w.right) == 2):
                key = w.left[0] if w.left else self.n + w.right[0]
                checked[key] = self.target.value(w)
        radius = 0.0
        for k in range(self.n + self.m):
            if k in checked:
                r = math.sqrt(self.d * max(float(np.real(checked[k])) + self.epsilon, 0.0))
            elif math.isfinite(self.R):
                r = math.sqrt(self.d) * self.R
            else:
                return math.inf
            radius = max(radius, r)
        if math.isfinite(self.R):
            radius = min(radius, math.sqrt(self.d) * self.R)
        return radius

    def with_(self, **changes) -> "MicrostateSpec":
        from dataclasses import replace

        return replace(self, **changes)


def reduced_word_values(lefts: np.ndarray, rights: np.ndarray, words: Sequence[ReducedWord]) -> np.ndarray:
    """Values of reduced words on a batch of tuples.

    ``lefts`` has shape ``(batch, n, d, d)`` and ``rights`` ``(batch, m, d, d)``.
    Returns a complex array of shape ``(len(words), batch)``.
    """
    lefts = np.asarray(lefts)
    rights = np.asarray(rights)
    d = lefts.shape[-1] if lefts.shape[1] else rights.shape[-1]
    lcache: dict = {}
    rcache: dict = {}

    def lprod(idx):
        if len(idx) == 1:
            return lefts[:, idx[0]]
        P = lcache.get(idx)
        if P is None:
            P = lcache[idx] = lprod(idx[:-1]) @ lefts[:, idx[-1]]
        return P

    def rprod(idx):
        # B_{jq} .. B_{j1}: extend on the left as the word grows
        if len(idx) == 1:
            return rights[:, idx[0]]
        P = rcache.get(idx)
        if P is None:
            P = rcache[idx] = rights[:, idx[-1]] @ rprod(idx[:-1])
        return P

    out = np.empty((len(words), lefts.shape[0]), dtype=complex)
    for k, w in enumerate(words):
        if not w.right:
            out[k] = normalized_trace(lprod(w.left))
        elif not w.left:
            out[k] = normalized_trace(rprod(w.right))
        else:
            L = lprod(w.left)
            Rp = rprod(w.right)
            out[k] = np.sum(L * np.swapaxes(Rp, -1, -2), axis=(-2, -1)) / d
    return out


def word_values(spec: MicrostateSpec, lefts: np.ndarray, rights: np.ndarray) -> np.ndarray:
    words = spec.checked_words()
    if spec.mode == "free-interleaved":
        mats = [lefts[:, i] for i in range(lefts.shape[1])] + [rights[:, j] for j in range(rights.shape[1])]
        tr = word_traces(mats, spec.M, words)
        return np.array([tr[w] for w in words], dtype=complex)
    return reduced_word_values(lefts, rights, words)


@dataclass
class BatchMembership:
    hits: np.ndarray
    worst_index: np.ndarray
    worst_deviation: np.ndarray
    within_cap: np.ndarray


def membership(spec: MicrostateSpec, lefts: np.ndarray, rights: np.ndarray,
               target_values: np.ndarray | None = None) -> BatchMembership:
    """Membership of a batch of tuples (``lefts`` ``(batch, n, d, d)``, ``rights`` ``(batch, m, d, d)``)."""
    if lefts.shape[1] != spec.n or rights.shape[1] != spec.m:
        raise ValueError(f"tuple has ({lefts.shape[1]}, {rights.shape[1]}) matrices, spec needs ({spec.n}, {spec.m})")
    d = lefts.shape[-1] if spec.n else rights.shape[-1]
    if d != spec.d:
        raise ValueError(f"tuple dimension {d} does not match spec d={spec.d}")
    tv = spec.target_values() if target_values is None else target_values
    dev = np.abs(word_values(spec, lefts, rights) - tv[:, None])
    worst_index = np.argmax(dev, axis=0)
    worst = dev[worst_index, np.arange(dev.shape[1])]
    hits = worst < spec.epsilon
    batch = lefts.shape[0]
    within = np.ones(batch, dtype=bool)
    if math.isfinite(spec.R):
        # the norm test is only needed for tuples that already match the moments
        idx = np.flatnonzero(hits)
        if idx.size:
            mats = np.concatenate([lefts[idx], rights[idx]], axis=1)
            norms = np.max(np.abs(np.linalg.eigvalsh(mats)), axis=(-2, -1))
            within[idx] = norms <= spec.R
        hits &= within
    return BatchMembership(hits, worst_index, worst, within)


def is_microstate(t: MicrostateTuple, spec: MicrostateSpec):
    """Return ``(member, (worst_word, deviation))`` for a single tuple."""
    if (t.n, t.m) != (spec.n, spec.m):
        raise ValueError(f"tuple has ({t.n}, {t.m}) matrices, spec needs ({spec.n}, {spec.m})")
    L, Rt = t.stacked()
    res = membership(spec, L[None], Rt[None])
    word = spec.checked_words()[int(res.worst_index[0])]
    return bool(res.hits[0]), (word, float(res.worst_deviation[0]))
