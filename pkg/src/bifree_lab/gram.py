"""Semi-analytic volumes of pair constraints through the Gram matrix.

For a pair ``(x, y)`` of vectors in R^N the map to the Gram matrix
``G = [[u, w], [w, v]]`` (``u = |x|^2``, ``v = |y|^2``, ``w = <x, y>``) pushes
Lebesgue measure on R^{2N} to

    c_N det(G)^{(N-3)/2} du dv dw,    c_N = pi^N / (sqrt(pi) Gamma(N/2) Gamma((N-1)/2)),

on positive definite ``G``.  The ``w`` integral has a closed form through the
incomplete beta function; the remaining ``(u, v)`` integral is done by nested
adaptive quadrature.

A pair of Hermitian matrices with HS coordinates in R^{d^2} has
``tau_d(A^2) = u/d`` and ``tau_d(AB) = w/d``, which gives the microstate oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import betainc, betaincc, betaln, gammaln

from . import _rng
from .volume import log_ball_volume

QUAD_EPSREL = 1e-10


def gram_log_constant(N: int) -> float:
    """``log c_N`` for the Gram map of a vector pair in R^N (N >= 2)."""
    if N < 2:
        raise ValueError("the Gram map of a pair needs N >= 2")
    return N * math.log(math.pi) - 0.5 * math.log(math.pi) - gammaln(N / 2) - gammaln((N - 1) / 2)


def _log_w_integral(a: float, log_half_b: float, t1: float, t2: float) -> float:
    """``log int_{t1}^{t2} (1 - t^2)^a dt`` for ``-1 <= t1 < t2 <= 1``."""
    # int_0^t (1-s^2)^a ds = (1/2) B(1/2, a+1) I_{t^2}(1/2, a+1) sign(t)
    b = a + 1.0
    if t1 >= 0:
        diff = betaincc(0.5, b, t1 * t1) - betaincc(0.5, b, t2 * t2)
    elif t2 <= 0:
        diff = betaincc(0.5, b, t2 * t2) - betaincc(0.5, b, t1 * t1)
    else:
        diff = betainc(0.5, b, t1 * t1) + betainc(0.5, b, t2 * t2)
    if diff <= 0:
        return -math.inf
    return log_half_b + math.log(diff)


@dataclass(frozen=True)
class _Region:
    N: int
    u: tuple[float, float]
    v: tuple[float, float]
    w: tuple[float, float]


def _log_inner(reg: _Region, u: float, v: float) -> float:
    a = 0.5 * (reg.N - 3)
    s = math.sqrt(u * v)
    t1 = max(reg.w[0] / s, -1.0)
    t2 = min(reg.w[1] / s, 1.0)
    if t1 >= t2:
        return -math.inf
    log_half_b = betaln(0.5, a + 1.0) - math.log(2.0)
    # w = sqrt(uv) t: (uv - w^2)^a dw = (uv)^{a + 1/2} (1 - t^2)^a dt
    return (a + 0.5) * math.log(u * v) + _log_w_integral(a, log_half_b, t1, t2)


def gram_region_log_volume(N: int, u_range, v_range, w_range) -> float:
    """Log-volume of ``{(x, y) in R^N x R^N : u in u_range, v in v_range, w in w_range}``."""
    reg = _Region(int(N), tuple(map(float, u_range)), tuple(map(float, v_range)), tuple(map(float, w_range)))
    if reg.N < 2:
        raise ValueError("N must be >= 2")
    (u0, u1), (v0, v1), (w0, w1) = reg.u, reg.v, reg.w
    if not (0 <= u0 < u1 and 0 <= v0 < v1 and w0 < w1):
        raise ValueError("ranges must be ordered with non-negative u, v")
    # factor out the largest log-integrand so the quadrature sees O(1) values
    shift = max(_log_inner(reg, u, v) for u in np.linspace(u0, u1, 9) for v in np.linspace(v0, v1, 9))
    if not math.isfinite(shift):
        shift = 0.0

    def inner(u):
        # the w-window is clipped by w^2 < uv; the clip switches on at v = w_edge^2 / u
        pts = sorted({w * w / u for w in (w0, w1) if w != 0 and v0 < w * w / u < v1})
        f = lambda v: math.exp(_log_inner(reg, u, v) - shift)
        val, _ = integrate.quad(f, v0, v1, points=pts or None, epsrel=QUAD_EPSREL, epsabs=0, limit=200)
        return val

    upts = sorted({w * w / v for w in (w0, w1) for v in (v0, v1) if v > 0 and u0 < w * w / v < u1})
    total, _ = integrate.quad(inner, u0, u1, points=upts or None, epsrel=QUAD_EPSREL, epsabs=0, limit=200)
    if total <= 0:
        return -math.inf
    return gram_log_constant(reg.N) + shift + math.log(total)


def pair_constraint_log_volume_oracle(d: int, epsilon: float, c: float) -> float:
    """Log-volume of ``{(A, B): |tau(A^2) - 1|, |tau(B^2) - 1|, |tau(AB) - c| <= epsilon}`` in (M_d^sa)^2."""
    if d < 2:
        raise ValueError("d must be >= 2 (for d = 1 the Gram matrix of a scalar pair is singular)")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if abs(c) > 1:
        raise ValueError("|c| must be <= 1")
    lo, hi = d * (1 - epsilon), d * (1 + epsilon)
    return gram_region_log_volume(d * d, (lo, hi), (lo, hi), (d * (c - epsilon), d * (c + epsilon)))


def cone_upper_bound(d: int, epsilon: float, c: float) -> float:
    """Closed-form upper bound on the pair-constraint log-volume from the cone argument."""
    if abs(c) >= 1:
        raise ValueError("the cone bound needs |c| < 1")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    N = d * d
    log_unit_ball = 0.5 * N * math.log(math.pi) - gammaln(0.5 * N + 1)
    return (0.5 * N * math.log(1 - c * c) + 2 * log_unit_ball
            + N * math.log(d * (1 + epsilon * (1 + abs(c)) ** 2 / (1 - c * c))))


@dataclass(frozen=True)
class GramValidation:
    N: int
    samples: int
    hits: int
    mc_log_volume: float
    std_error: float
    oracle_log_volume: float
    passed: bool

    @property
    def z(self) -> float:
        return (self.mc_log_volume - self.oracle_log_volume) / self.std_error

    def row(self) -> dict:
        return {"N": self.N, "samples": self.samples, "hits": self.hits, "mc_log_volume": self.mc_log_volume,
                "std_error": self.std_error, "oracle_log_volume": self.oracle_log_volume, "z": self.z,
                "passed": self.passed}


def validate_gram_constant(N: int, samples: int = 10_000_000, seed: int = 0, scale: float = 1.0,
                           epsilon: float = 0.3, c: float = 0.3) -> GramValidation:
    """Check the Gram oracle against brute force over vector pairs in R^N.

    Draws ``(x, y)`` uniformly from the product of two balls of radius
    ``sqrt(scale (1 + epsilon))``, counts pairs with ``|x|^2, |y|^2`` in
    ``scale [1 - epsilon, 1 + epsilon]`` and ``<x, y>`` in
    ``scale [c - epsilon, c + epsilon]``, and compares the log-volume with
    the quadrature at 3 standard errors.
    """
    lo, hi = scale * (1 - epsilon), scale * (1 + epsilon)
    wl, wh = scale * (c - epsilon), scale * (c + epsilon)
    radius = math.sqrt(hi)
    hits = 0
    for key, size in _rng.chunks(samples):
        rng = _rng.stream(seed, key)
        g = rng.standard_normal((size, 2, N))
        g /= np.linalg.norm(g, axis=-1, keepdims=True)
        g *= radius * rng.random((size, 2, 1)) ** (1.0 / N)
        x, y = g[:, 0], g[:, 1]
        u = np.einsum("ij,ij->i", x, x)
        v = np.einsum("ij,ij->i", y, y)
        w = np.einsum("ij,ij->i", x, y)
        ok = (u >= lo) & (u <= hi) & (v >= lo) & (v <= hi) & (w >= wl) & (w <= wh)
        hits += int(np.count_nonzero(ok))
    oracle = gram_region_log_volume(N, (lo, hi), (lo, hi), (wl, wh))
    ref = 2 * log_ball_volume(N, radius)
    if hits == 0:
        return GramValidation(N, samples, 0, -math.inf, math.inf, oracle, False)
    p = hits / samples
    est = ref + math.log(p)
    se = math.sqrt((1 - p) / hits)
    return GramValidation(N, samples, hits, est, se, oracle, bool(abs(est - oracle) < 3 * se))
