"""Free cumulants, free-product states and approximate freeness.

A family with ``k`` variables is described by a table mapping words (tuples
over ``0..k-1``) to numbers.  Cumulants come from moments by Moebius
inversion over non-crossing partitions,

    phi(w) = sum_{pi in NC(|w|)} prod_{B in pi} kappa(w|B),

solved for the top term one word length at a time.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError
from .matrices import word_traces
from .partitions import enumerate_nc_partitions


@dataclass(frozen=True)
class CumulantTable:
    family: Hashable
    n_vars: int
    degree_cap: int
    table: Mapping[tuple, complex]

    def __getitem__(self, word) -> complex:
        return self.table[tuple(word)]


def _words(k: int, M: int):
    for length in range(1, M + 1):
        yield from itertools.product(range(k), repeat=length)


def _sub(word, block):
    return tuple(word[i] for i in block)


def _require(table, k, M, what):
    for w in _words(k, M):
        if w not in table:
            raise ConfigurationError(f"{what} table is incomplete: missing word {w}")


def free_cumulants_from_moments(moments: Mapping[tuple, complex], M: int, n_vars: int = 1,
                                family: Hashable = 0) -> CumulantTable:
    """Free cumulants of a ``n_vars``-variable family from its moments up to length ``M``."""
    _require(moments, n_vars, M, "moment")
    kappa: dict = {}
    for w in _words(n_vars, M):
        p = len(w)
        acc = moments[w]
        for pi in enumerate_nc_partitions(p):
            if len(pi) == 1:
                continue
            term = 1.0
            for block in pi:
                term *= kappa[_sub(w, block)]
            acc -= term
        kappa[w] = acc
    return CumulantTable(family, n_vars, M, kappa)


def moments_from_free_cumulants(cumulants: CumulantTable) -> dict:
    """Inverse transform: moments of every word up to the table's degree."""
    k, M, kappa = cumulants.n_vars, cumulants.degree_cap, cumulants.table
    _require(kappa, k, M, "cumulant")
    out = {}
    for w in _words(k, M):
        total = 0.0
        for pi in enumerate_nc_partitions(len(w)):
            term = 1.0
            for block in pi:
                term *= kappa[_sub(w, block)]
            total += term
        out[w] = total
    return out


def free_product_moment(families: Sequence[CumulantTable], word: Sequence[tuple[int, int]]):
    """Moment of ``word`` (a sequence of ``(family, variable)`` letters) in the free product.

    Mixed cumulants vanish, so only non-crossing partitions whose blocks stay
    inside one family contribute.
    """
    word = [tuple(x) for x in word]
    if not word:
        return 1.0
    for f, v in word:
        if not 0 <= f < len(families):
            raise IndexError(f"family {f} out of range")
        if not 0 <= v < families[f].n_vars:
            raise IndexError(f"variable {v} out of range for family {f}")
    counts = np.bincount([f for f, _ in word], minlength=len(families))
    for f, c in enumerate(counts):
        if c > families[f].degree_cap:
            raise ConfigurationError(
                f"word uses {c} letters of family {f} but its cumulants stop at degree {families[f].degree_cap}")
    total = 0.0
    for pi in enumerate_nc_partitions(len(word)):
        term = 1.0
        for block in pi:
            fams = {word[i][0] for i in block}
            if len(fams) > 1:
                term = 0.0
                break
            (f,) = fams
            term *= families[f].table[tuple(word[i][1] for i in block)]
        total += term
    return total


def _family_mats(family) -> list[np.ndarray]:
    if hasattr(family, "lefts"):
        return list(family.lefts) + list(family.rights)
    return [np.asarray(X) for X in family]


def is_m_eps_free(families, M: int, epsilon: float) -> tuple[bool, float]:
    """Test whether the families are ``(M, epsilon)``-free under ``tau_d``.

    ``families`` is a list whose items are matrix sequences or microstate
    tuples (lefts followed by rights).  Returns ``(passed, max_deviation)``.
    """
    if M < 1:
        raise ConfigurationError("M must be >= 1")
    fams = [_family_mats(f) for f in families]
    if not fams or any(not f for f in fams):
        raise ConfigurationError("every family needs at least one matrix")
    shape = fams[0][0].shape
    if any(X.shape != shape for f in fams for X in f):
        raise ValueError("dimension mismatch among families")
    if len(fams) == 1:
        return True, 0.0
    letters = [(f, v) for f, mats in enumerate(fams) for v in range(len(mats))]
    allmats = [X for mats in fams for X in mats]
    joint = word_traces(allmats, M)
    tables = []
    offset = 0
    for f, mats in enumerate(fams):
        k = len(mats)
        mom = {w: joint[tuple(offset + x for x in w)] for w in _words(k, M)}
        tables.append(free_cumulants_from_moments(mom, M, k, family=f))
        offset += k
    worst = 0.0
    for w, value in joint.items():
        word = [letters[x] for x in w]
        if len({f for f, _ in word}) < 2:
            continue
        worst = max(worst, abs(free_product_moment(tables, word) - value))
    return bool(worst < epsilon), float(worst)
