"""Monte Carlo log-volumes of microstate sets.

Two reference measures are available.  ``HSBall`` draws each matrix uniformly
from a Hilbert-Schmidt ball that encloses the set, so the volume is the ball
volume times the hit fraction.  ``GUESampler`` draws Gaussian matrices and
weights hits by the inverse density, which helps when the set is a thin shell
far inside the enclosing ball.

The budget is cut into fixed chunks with one random stream per chunk, and
chunk tallies are merged in chunk order, so the estimate does not depend on
the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from . import _rng
from .errors import ConfigurationError
from .matrices import _gue_batch, _hs_ball_batch
from .microstates import MicrostateSpec, membership


@dataclass(frozen=True)
class HSBall:
    """Uniform reference on the HS ball; ``radius=None`` picks the smallest enclosing ball."""

    radius: float | None = None


@dataclass(frozen=True)
class GUESampler:
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ConfigurationError("GUE variance must be positive")


def log_ball_volume(N: int, radius: float) -> float:
    """Log-volume of the Euclidean ball of ``radius`` in R^N."""
    return 0.5 * N * math.log(math.pi) - float(gammaln(0.5 * N + 1)) + N * math.log(radius)


def reference_log_volume(d: int, count: int, radius_hs: float) -> float:
    """Log-volume of the product of ``count`` HS balls of radius ``radius_hs`` in M_d^sa."""
    if not radius_hs > 0:
        raise ValueError("radius must be positive")
    return count * log_ball_volume(d * d, radius_hs)


@dataclass
class VolumeEstimate:
    """Monte Carlo estimate of ``log lambda(Gamma)``.

    ``log_volume`` is ``None`` when no sample hit the set; ``one_sided_bound``
    then holds ``reference_log_volume + log(1/samples)``.
    """

    d: int
    count: int
    log_volume: float | None
    std_error: float
    hits: int
    samples: int
    reference_log_volume: float
    one_sided_bound: float | None = None
    sampler: str = "hs_ball"
    kept: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def neg_infinity(self) -> bool:
        return self.hits == 0

    @property
    def hit_fraction(self) -> float:
        return self.hits / self.samples

    @property
    def normalized_chi(self) -> float:
        """``(1/d^2) log_volume + ((n+m)/2) log d``; ``-inf`` for an empty estimate."""
        if self.log_volume is None:
            return -math.inf
        return self.log_volume / self.d ** 2 + 0.5 * self.count * math.log(self.d)

    @property
    def normalized_std_error(self) -> float:
        return self.std_error / self.d ** 2

    def row(self) -> dict:
        return {
            "d": self.d,
            "log_volume": self.log_volume if self.log_volume is not None else "-inf",
            "std_error": self.std_error,
            "normalized_chi": self.normalized_chi if self.log_volume is not None else "-inf",
            "hits": self.hits,
            "samples": self.samples,
            "reference_log_volume": self.reference_log_volume,
            "one_sided_bound": self.one_sided_bound,
            "sampler": self.sampler,
        }


def _as_sampler(sampler):
    if sampler is None or sampler == "hs_ball":
        return HSBall()
    if sampler == "gue":
        return GUESampler()
    if isinstance(sampler, (HSBall, GUESampler)):
        return sampler
    if isinstance(sampler, dict):
        kind = sampler.get("kind", "hs_ball")
        if kind == "hs_ball":
            return HSBall(sampler.get("radius"))
        if kind == "gue":
            return GUESampler(float(sampler.get("variance", 1.0)))
    raise ConfigurationError(f"unknown sampler {sampler!r}")


def enclosing_radius(spec: MicrostateSpec) -> float:
    r = spec.second_moment_bound()
    if not math.isfinite(r):
        raise ConfigurationError(
            "the microstate set is unbounded: some variable has neither a second-moment word nor a finite R")
    return r


def _chunk(spec: MicrostateSpec, sampler, radius, tv, seed, key, size, keep):
    rng = _rng.stream(seed, key)
    d, n, m = spec.d, spec.n, spec.m
    if isinstance(sampler, HSBall):
        X = _hs_ball_batch(rng, d, radius, (size, n + m))
        logw = None
    else:
        X = _gue_batch(rng, d, sampler.variance, (size, n + m))
        s2 = sampler.variance / d
        sq = np.sum(np.abs(X) ** 2, axis=(-2, -1))
        # inverse Gaussian density in the HS coordinates, summed over the n+m matrices
        logw = np.sum(0.5 * d * d * math.log(2 * math.pi * s2) + sq / (2 * s2), axis=1)
    res = membership(spec, X[:, :n], X[:, n:], tv)
    hits = int(np.count_nonzero(res.hits))
    kept = X[res.hits][:keep] if keep else None
    if logw is None:
        return hits, None, None, kept
    lw = logw[res.hits]
    if hits == 0:
        return 0, -math.inf, -math.inf, kept
    return hits, float(logsumexp(lw)), float(logsumexp(2 * lw)), kept


def estimate_log_volume(spec: MicrostateSpec, sampler=None, samples: int = 100_000, seed: int = 0,
                        workers: int = 1, keep_hits: int = 0) -> VolumeEstimate:
    """Estimate ``log lambda(Gamma_R(target; M, d, epsilon))`` by Monte Carlo.

    Parameters
    ----------
    spec : MicrostateSpec
    sampler : HSBall, GUESampler, "hs_ball", "gue" or a dict with ``kind``
        Reference measure.  An HS ball must enclose the set; the default
        radius is ``sqrt(d (v_max + epsilon))``.
    samples : int
        Number of tuples drawn.
    seed : int
        Root seed; chunk ``k`` uses the substream ``(seed, k)``.
    workers : int
        Threads used for the chunks.  Does not change the result.
    keep_hits : int
        Keep up to this many member tuples (as a ``(lefts, rights)`` pair of
        arrays) in ``VolumeEstimate.kept``.
    """
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    sampler = _as_sampler(sampler)
    count = spec.n + spec.m
    try:
        r_min = enclosing_radius(spec)
    except ConfigurationError:
        if isinstance(sampler, HSBall):
            raise
        r_min = None
    radius = None
    if isinstance(sampler, HSBall):
        radius = r_min if sampler.radius is None else float(sampler.radius)
        if not radius >= r_min * (1 - 1e-12):
            raise ConfigurationError(f"HS-ball radius {radius} does not enclose the set (need >= {r_min:.6g})")
    tv = spec.target_values()
    parts = list(_rng.chunks(samples))
    run = lambda part: _chunk(spec, sampler, radius, tv, seed, part[0], part[1], keep_hits)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, parts))
    else:
        results = [run(p) for p in parts]
    hits = sum(r[0] for r in results)
    kept = None
    if keep_hits:
        arrs = [r[3] for r in results if r[3] is not None and len(r[3])]
        if arrs:
            K = np.concatenate(arrs)[:keep_hits]
            kept = (K[:, :spec.n], K[:, spec.n:])
    p = hits / samples
    if isinstance(sampler, HSBall):
        ref = reference_log_volume(spec.d, count, radius)
        if hits == 0:
            return VolumeEstimate(spec.d, count, None, math.inf, 0, samples, ref, ref - math.log(samples),
                                  "hs_ball", kept)
        se = math.sqrt((1 - p) / hits)
        return VolumeEstimate(spec.d, count, ref + math.log(p), se, hits, samples, ref, None, "hs_ball", kept)
    # importance weights: volume = E[w 1_Gamma]
    ref_fallback = reference_log_volume(spec.d, count, r_min) if r_min else math.nan
    if hits == 0:
        return VolumeEstimate(spec.d, count, None, math.inf, 0, samples, ref_fallback,
                              ref_fallback - math.log(samples), "gue", kept)
    l1 = float(logsumexp([r[1] for r in results]))
    l2 = float(logsumexp([r[2] for r in results]))
    log_mean = l1 - math.log(samples)
    # relative variance of the mean weight: (E[w^2]/E[w]^2 - 1)/samples
    rel = math.exp(l2 - math.log(samples) - 2 * log_mean) - 1.0
    se = math.sqrt(max(rel, 0.0) / samples)
    return VolumeEstimate(spec.d, count, log_mean, se, hits, samples, log_mean - math.log(p), None, "gue", kept)


def chi_sequence(spec_template: MicrostateSpec, d_list, sampler=None, samples: int = 100_000,
                 seed: int = 0, workers: int = 1) -> list[tuple[int, VolumeEstimate]]:
    """One estimate per dimension in ``d_list``; each ``d`` gets its own substream of ``seed``."""
    d_list = [int(d) for d in d_list]
    if any(b <= a for a, b in zip(d_list, d_list[1:])):
        raise ConfigurationError("d_list must be strictly ascending")
    out = []
    for d in d_list:
        spec = spec_template.with_(d=d)
        out.append((d, estimate_log_volume(spec, sampler, samples, _rng.derive(seed, d), workers)))
    return out


@dataclass(frozen=True)
class RatioEstimate:
    log_ratio: float
    std_error: float
    expected: float
    before: VolumeEstimate
    after: VolumeEstimate

    def __float__(self):
        return self.log_ratio


def _row_l1(T: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(T), axis=1))) if T.size else 0.0


def _check_square(T, k, name):
    T = np.atleast_2d(np.asarray(T, dtype=float)) if k else np.zeros((0, 0))
    if T.shape != (k, k):
        raise ConfigurationError(f"{name} must be {k}x{k}, got {T.shape}")
    if k and abs(np.linalg.det(T)) < 1e-12:
        raise ConfigurationError(f"{name} is singular")
    return T


def pushforward_volume_ratio(spec_before: MicrostateSpec, Q, Rm, samples: int = 100_000, seed: int = 0,
                             spec_after: MicrostateSpec | None = None, workers: int = 1) -> RatioEstimate:
    """Estimate ``log lambda(Gamma_after) - log lambda(Gamma_before)`` for ``(X, Y) -> (Q X, Rm Y)``.

    Without ``spec_after`` the after-set is the image ``T(Gamma_before)``:
    a tuple belongs to it when ``T^{-1}`` maps it into ``Gamma_before``, and
    its volume is estimated independently on an HS ball large enough to hold
    the image.  With ``spec_after`` both sets are estimated as they are.
    """
    n, m = spec_before.n, spec_before.m
    Q = _check_square(Q, n, "Q")
    Rm = _check_square(Rm, m, "Rm")
    expected = spec_before.d ** 2 * ((np.linalg.slogdet(Q)[1] if n else 0.0) + (np.linalg.slogdet(Rm)[1] if m else 0.0))
    before = estimate_log_volume(spec_before, HSBall(), samples, _rng.derive(seed, 0), workers)
    if spec_after is not None:
        after = estimate_log_volume(spec_after, HSBall(), samples, _rng.derive(seed, 1), workers)
    else:
        after = _image_volume(spec_before, Q, Rm, samples, _rng.derive(seed, 1))
    if before.log_volume is None or after.log_volume is None:
        raise ConfigurationError("zero hits; increase samples")
    se = math.hypot(before.std_error, after.std_error)
    return RatioEstimate(after.log_volume - before.log_volume, se, float(expected), before, after)


def _image_volume(spec: MicrostateSpec, Q, Rm, samples, seed) -> VolumeEstimate:
    n, m, d = spec.n, spec.m, spec.d
    r = enclosing_radius(spec)
    # (T x)_i = sum_j T_ij x_j, so |(T x)_i| <= (sum_j |T_ij|) r
    radius = r * max(_row_l1(Q), _row_l1(Rm))
    Qi = np.linalg.inv(Q) if n else Q
    Ri = np.linalg.inv(Rm) if m else Rm
    tv = spec.target_values()
    hits = 0
    for key, size in _rng.chunks(samples):
        X = _hs_ball_batch(_rng.stream(seed, key), d, radius, (size, n + m))
        L = np.einsum("ij,bjxy->bixy", Qi, X[:, :n])
        Rt = np.einsum("ij,bjxy->bixy", Ri, X[:, n:])
        hits += int(np.count_nonzero(membership(spec, L, Rt, tv).hits))
    ref = reference_log_volume(d, n + m, radius)
    if hits == 0:
        return VolumeEstimate(d, n + m, None, math.inf, 0, samples, ref, ref - math.log(samples))
    p = hits / samples
    return VolumeEstimate(d, n + m, ref + math.log(p), math.sqrt((1 - p) / hits), hits, samples, ref)
