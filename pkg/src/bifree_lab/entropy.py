"""Closed-form entropy of bi-free Gaussian families and its calculus.

``ChiValue`` carries either a finite real or an explicit ``-inf`` tag, so
degenerate cases never travel as a floating sentinel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .moments import CovarianceSpec

LOG_2PIE = math.log(2 * math.pi * math.e)
DET_FLOOR = 1e-12
RANK_TOL = 1e-10
PROVENANCES = ("oracle", "transformed", "bound")


@dataclass(frozen=True)
class ChiValue:
    """Entropy value; ``value is None`` means minus infinity."""

    value: float | None
    provenance: str = "oracle"

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.value is not None:
            v = float(self.value)
            if math.isnan(v) or v == math.inf:
                raise ValueError("entropy is never +inf or nan")
            object.__setattr__(self, "value", None if v == -math.inf else v)

    @classmethod
    def neg_infinity(cls, provenance: str = "oracle") -> "ChiValue":
        return cls(None, provenance)

    @property
    def is_neg_infinity(self) -> bool:
        return self.value is None

    def __float__(self) -> float:
        return -math.inf if self.value is None else self.value

    def plus(self, x: float, provenance: str | None = None) -> "ChiValue":
        """Add a finite real; minus infinity absorbs."""
        prov = provenance or self.provenance
        if self.value is None:
            return ChiValue(None, prov)
        return ChiValue(self.value + float(x), prov)

    def __add__(self, other):
        if isinstance(other, ChiValue):
            if other.value is None:
                return ChiValue(None, self.provenance)
            return self.plus(other.value)
        return self.plus(other)

    __radd__ = __add__

    def __str__(self) -> str:
        return "-inf" if self.value is None else repr(self.value)


def _as_cov(cov) -> CovarianceSpec:
    if isinstance(cov, CovarianceSpec):
        return cov
    A = np.asarray(cov, dtype=float)
    return CovarianceSpec(A.shape[0], 0, A)


def gaussian_chi(cov) -> ChiValue:
    """``(n+m)/2 log(2 pi e) + 1/2 log det A``; minus infinity when ``det A <= 1e-12``."""
    cov = _as_cov(cov)
    k = cov.size
    if k == 0:
        return ChiValue(0.0)
    sign, logdet = np.linalg.slogdet(cov.A)
    if sign <= 0 or logdet <= math.log(DET_FLOOR):
        return ChiValue.neg_infinity()
    return ChiValue(0.5 * k * LOG_2PIE + 0.5 * logdet)


def _log_abs_det(T: np.ndarray) -> float | None:
    if T.size == 0:
        return 0.0
    sign, logdet = np.linalg.slogdet(T)
    if sign == 0 or not math.isfinite(logdet):
        return None
    # a numerically singular map counts as singular
    s = np.linalg.svd(T, compute_uv=False)
    if s[-1] <= RANK_TOL * max(s[0], 1.0):
        return None
    return float(logdet)


def transform_chi(chi: ChiValue, Q, Rm, n: int | None = None, m: int | None = None) -> ChiValue:
    """Entropy after ``(X, Y) -> (Q X, Rm Y)``: ``chi + log|det Q| + log|det Rm|``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float)) if np.size(Q) else np.zeros((0, 0))
    Rm = np.atleast_2d(np.asarray(Rm, dtype=float)) if np.size(Rm) else np.zeros((0, 0))
    for T, k, name in ((Q, n, "Q"), (Rm, m, "Rm")):
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise ConfigurationError(f"{name} must be square, got {T.shape}")
        if k is not None and T.shape[0] != k:
            raise ConfigurationError(f"{name} is {T.shape[0]}x{T.shape[0]} but {k} variables were declared")
    lq, lr = _log_abs_det(Q), _log_abs_det(Rm)
    if lq is None or lr is None:
        return ChiValue.neg_infinity("transformed")
    return chi.plus(lq + lr, "transformed")


def shift_chi(chi: ChiValue, shifts=None) -> ChiValue:
    """Entropy after adding scalar constants to the variables: unchanged."""
    return chi


def chi_upper_bound(second_moments: Sequence[float]) -> float:
    """``(n+m)/2 log(2 pi e C^2/(n+m))`` with ``C^2`` the sum of the second moments."""
    s = np.asarray(second_moments, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("need a non-empty list of second moments")
    if np.any(s < 0):
        raise ValueError("second moments must be non-negative")
    k = s.size
    C2 = float(s.sum())
    if C2 == 0:
        return -math.inf
    return 0.5 * k * math.log(2 * math.pi * math.e * C2 / k)


def _split_indices(cov: CovarianceSpec, split) -> tuple[list[int], list[int]]:
    p, q = split
    if not (0 <= p <= cov.n and 0 <= q <= cov.m):
        raise ConfigurationError(f"split ({p}, {q}) outside 0..{cov.n} x 0..{cov.m}")
    first = list(range(p)) + [cov.n + j for j in range(q)]
    second = [i for i in range(cov.size) if i not in first]
    return first, second


def _sub_cov(cov: CovarianceSpec, idx: list[int]) -> CovarianceSpec:
    n = sum(1 for i in idx if i < cov.n)
    return CovarianceSpec(n, len(idx) - n, cov.A[np.ix_(idx, idx)])


def subadditivity_gap(cov: CovarianceSpec, split) -> float:
    """``chi(block 1) + chi(block 2) - chi(joint)`` for the split ``(p, q)``.

    Block 1 holds the first ``p`` left and first ``q`` right variables.  A
    singular joint covariance with regular blocks gives ``+inf``.
    """
    first, second = _split_indices(cov, split)
    joint = gaussian_chi(cov)
    a = gaussian_chi(_sub_cov(cov, first))
    b = gaussian_chi(_sub_cov(cov, second))
    if a.is_neg_infinity or b.is_neg_infinity:
        if joint.is_neg_infinity:
            return math.nan
        raise ArithmeticError("a block is degenerate while the joint is not")
    if joint.is_neg_infinity:
        return math.inf
    return a.value + b.value - joint.value


def gaussian_delta(cov) -> int:
    """Numerical rank of the covariance at relative tolerance ``1e-10``."""
    cov = _as_cov(cov)
    if cov.size == 0:
        return 0
    ev = np.linalg.eigvalsh(cov.A)
    top = ev.max()
    if top <= 0:
        return 0
    return int(np.count_nonzero(ev > RANK_TOL * top))


@dataclass(frozen=True)
class DeltaFit:
    delta: float
    slope: float
    eps_grid: tuple
    chi: tuple

    def __float__(self):
        return self.delta


def numeric_delta(cov, eps_grid: Sequence[float]) -> DeltaFit:
    """Fit ``n+m + slope`` where ``chi(A + eps I)`` is regressed on ``|log sqrt(eps)|``."""
    cov = _as_cov(cov)
    eps = np.asarray(eps_grid, dtype=float)
    if eps.size < 3 or np.any(eps <= 0):
        raise ConfigurationError("eps_grid needs at least 3 positive points")
    if math.log10(eps.max() / eps.min()) < 2 - 1e-12:
        raise ConfigurationError("eps_grid must span at least two decades")
    k = cov.size
    chis = []
    for e in eps:
        # the covariance of X + sqrt(eps) S with S an independent standard family
        A = cov.A + e * np.eye(k)
        sign, logdet = np.linalg.slogdet(A)
        chis.append(0.5 * k * LOG_2PIE + 0.5 * logdet)
    x = np.abs(np.log(np.sqrt(eps)))
    slope = float(np.polyfit(x, np.asarray(chis), 1)[0])
    return DeltaFit(k + slope, slope, tuple(eps.tolist()), tuple(chis))

