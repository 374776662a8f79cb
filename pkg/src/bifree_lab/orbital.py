"""Orbital experiments: Haar conjugation of fixed marginal microstates.

Family ``k`` is a :class:`MicrostateTuple` ``(A_k | B_k)``.  A trial draws
independent Haar unitaries ``U_1..U_l``, replaces family ``k`` by
``U_k A_k U_k^*, U_k B_k U_k^*`` and tests joint membership with ``R = inf``.
The joint tuple lists the lefts of all families in family order, then the
rights in family order.

Rare events (strongly correlated joint targets) are out of reach for plain
Monte Carlo already at ``d = 8``; ``method="splitting"`` estimates them by
subset simulation over nested level sets of the worst word deviation, with
Metropolis moves ``U -> exp(i eta H) U`` that leave Haar measure invariant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _rng
from .cumulants import is_m_eps_free
from .errors import ConfigurationError, PreconditionError
from .matrices import _gue_batch, _haar_batch
from .microstates import MicrostateSpec, MicrostateTuple, is_microstate, membership
from .moments import TargetMoments, semicircle_quantiles
from .volume import HSBall, VolumeEstimate, estimate_log_volume
from .words import reduced_words

METHODS = ("direct", "splitting", "auto")
#: ``auto`` switches to splitting when direct sampling sees fewer hits than this
AUTO_MIN_HITS = 50


@dataclass
class OrbitalEstimate:
    """Estimate of the Haar probability that the conjugated families form a joint microstate."""

    d: int
    hit_probability: float
    std_error: float
    log_std_error: float
    samples: int
    hits: int | None = None
    method: str = "direct"
    one_sided_bound: float | None = None

    @property
    def neg_infinity(self) -> bool:
        return self.hit_probability == 0.0

    @property
    def normalized(self) -> float:
        """``(1/d^2) log p``; ``-inf`` when no trial hit."""
        if self.hit_probability <= 0:
            return -math.inf
        return min(math.log(self.hit_probability), 0.0) / self.d ** 2

    @property
    def normalized_std_error(self) -> float:
        return self.log_std_error / self.d ** 2

    def row(self) -> dict:
        return {
            "d": self.d,
            "hit_probability": self.hit_probability,
            "std_error": self.std_error,
            "normalized": self.normalized if not self.neg_infinity else "-inf",
            "normalized_std_error": self.normalized_std_error,
            "samples": self.samples,
            "hits": self.hits,
            "method": self.method,
            "one_sided_bound": self.one_sided_bound,
        }


# -- layout -------------------------------------------------------------------

def _check_families(families: Sequence[MicrostateTuple]) -> int:
    if not families:
        raise ConfigurationError("need at least one family")
    d = families[0].d
    for k, f in enumerate(families):
        if f.d != d:
            raise ConfigurationError(f"family {k} has dimension {f.d}, expected {d}")
    return d


def family_layout(families: Sequence[MicrostateTuple]) -> list[tuple[list[int], list[int]]]:
    """Joint left and right indices of each family."""
    out = []
    lo = ro = 0
    for f in families:
        out.append((list(range(lo, lo + f.n)), list(range(ro, ro + f.m))))
        lo += f.n
        ro += f.m
    return out


def marginal_targets(families, joint_target: TargetMoments) -> list[TargetMoments]:
    n = sum(f.n for f in families)
    m = sum(f.m for f in families)
    if (joint_target.n, joint_target.m) != (n, m):
        raise ConfigurationError(f"joint target has ({joint_target.n}, {joint_target.m}) variables, "
                                 f"families supply ({n}, {m})")
    return [joint_target.restrict(li, ri) for li, ri in family_layout(families)]


def check_marginals(families, joint_target: TargetMoments, M: int, epsilon: float) -> float:
    """Raise :class:`PreconditionError` unless every family is a microstate for its marginal target.

    Returns the largest marginal deviation.
    """
    worst = 0.0
    d = _check_families(families)
    for k, (f, tgt) in enumerate(zip(families, marginal_targets(families, joint_target))):
        spec = MicrostateSpec(tgt, M, epsilon, d, R=f.R)
        ok, (word, dev) = is_microstate(f, spec)
        if not ok:
            raise PreconditionError(
                f"family {k} is not a microstate for its marginal target: word {word} deviates by {dev:.4g} "
                f"(epsilon={epsilon})" if dev >= epsilon else
                f"family {k} violates the norm cap R={f.R}")
        worst = max(worst, dev)
    return worst


def _cross_spec(families, joint_target, M, epsilon, d) -> MicrostateSpec | None:
    """Filter spec over the words that mix families (the others are conjugation invariant)."""
    owner_l = [k for k, f in enumerate(families) for _ in range(f.n)]
    owner_r = [k for k, f in enumerate(families) for _ in range(f.m)]
    words = [w for w in reduced_words(joint_target.n, joint_target.m, M)
             if len({owner_l[i] for i in w.left} | {owner_r[j] for j in w.right}) > 1]
    if not words:
        return None
    return MicrostateSpec(joint_target, M, epsilon, d, mode="filter", words=tuple(words))


class _Scorer:
    """Worst cross-family deviation of conjugated families, batched over unitary tuples."""

    def __init__(self, families, spec: MicrostateSpec | None):
        self.families = families
        self.spec = spec
        self.tv = spec.target_values() if spec is not None else None
        self.L = [np.array(f.lefts) for f in families]
        self.R = [np.array(f.rights) for f in families]

    def __call__(self, V: np.ndarray) -> np.ndarray:
        """``V`` has shape ``(batch, l - 1, d, d)``; returns worst deviations ``(batch,)``.

        Traces do not change under a simultaneous conjugation, so family 0 is
        left in place and family ``k`` is conjugated by ``V[:, k - 1]``, which
        has the law of ``U_0^* U_k``.
        """
        if self.spec is None:
            return np.zeros(V.shape[0])
        eye = np.broadcast_to(np.eye(V.shape[-1], dtype=complex), (V.shape[0], 1) + V.shape[-2:])
        U = np.concatenate([eye, V], axis=1)
        Uh = np.conj(np.swapaxes(U, -1, -2))
        lefts, rights = [], []
        for k in range(len(self.families)):
            Uk, Ukh = U[:, k, None], Uh[:, k, None]
            if len(self.L[k]):
                lefts.append(Uk @ self.L[k][None] @ Ukh)
            if len(self.R[k]):
                rights.append(Uk @ self.R[k][None] @ Ukh)
        d = U.shape[-1]
        Lj = np.concatenate(lefts, axis=1) if lefts else np.zeros((U.shape[0], 0, d, d), complex)
        Rj = np.concatenate(rights, axis=1) if rights else np.zeros((U.shape[0], 0, d, d), complex)
        return membership(self.spec, Lj, Rj, self.tv).worst_deviation


# -- estimators -----------------------------------------------------------------

def _direct(scorer, ell, d, epsilon, samples, seed) -> OrbitalEstimate:
    hits = 0
    for key, size in _rng.chunks(samples):
        U = _haar_batch(_rng.stream(seed, key), d, (size, ell - 1))
        hits += int(np.count_nonzero(scorer(U) < epsilon))
    p = hits / samples
    se = math.sqrt(p * (1 - p) / samples)
    if hits == 0:
        return OrbitalEstimate(d, 0.0, 0.0, math.inf, samples, 0, "direct", -math.log(samples) / d ** 2)
    return OrbitalEstimate(d, p, se, math.sqrt((1 - p) / hits), samples, hits, "direct")


def _expm_i(H: np.ndarray, eta) -> np.ndarray:
    w, V = np.linalg.eigh(H)
    return (V * np.exp(1j * eta * w)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))


def _subset_run(scorer, ell, d, epsilon, particles, p0, steps, rng, max_levels):
    U = _haar_batch(rng, d, (particles, ell - 1))
    s = scorer(U)
    log_p = 0.0
    eta = np.full(particles, 0.5)
    for _ in range(max_levels):
        level = float(np.quantile(s, p0))
        if level < epsilon:
            frac = np.count_nonzero(s < epsilon) / particles
            return log_p + math.log(frac) if frac > 0 else -math.inf
        keep = np.flatnonzero(s < level)
        if keep.size == 0:
            # score ties: the level set does not shrink
            level = float(np.min(s[s > s.min()])) if np.any(s > s.min()) else level
            keep = np.flatnonzero(s < level)
            if keep.size == 0:
                return -math.inf
        log_p += math.log(keep.size / particles)
        idx = keep[np.arange(particles) % keep.size]
        U, s = U[idx], s[idx]
        step = float(np.median(eta[keep])) if keep.size else 0.5
        for _ in range(steps):
            H = _gue_batch(rng, d, 1.0, (particles, ell - 1))
            Unew = _expm_i(H, step) @ U
            snew = scorer(Unew)
            acc = snew < level
            U[acc], s[acc] = Unew[acc], snew[acc]
            rate = acc.mean()
            # keep the acceptance rate in a useful band
            step *= 1.3 if rate > 0.5 else (0.7 if rate < 0.2 else 1.0)
            step = min(max(step, 1e-3), math.pi)
        eta[:] = step
    raise ArithmeticError(f"splitting did not reach epsilon within {max_levels} levels")


def _splitting(scorer, ell, d, epsilon, particles, seed, p0=0.1, steps=8, replicates=4,
               max_levels=200) -> OrbitalEstimate:
    logs = []
    for r in range(replicates):
        logs.append(_subset_run(scorer, ell, d, epsilon, particles, p0, steps, _rng.stream(seed, 1 << 40, r),
                                max_levels))
    logs = np.array(logs)
    samples = particles * replicates
    if np.all(np.isneginf(logs)):
        return OrbitalEstimate(d, 0.0, 0.0, math.inf, samples, None, "splitting")
    top = logs.max()
    ps = np.exp(logs - top)
    mean = ps.mean()
    p = math.exp(top) * mean
    if replicates > 1:
        se_rel = ps.std(ddof=1) / math.sqrt(replicates) / mean
    else:
        se_rel = math.nan
    return OrbitalEstimate(d, p, p * se_rel, se_rel, samples, None, "splitting")


def orbital_hit_probability(families: Sequence[MicrostateTuple], joint_target: TargetMoments, M: int,
                            epsilon: float, samples: int = 10_000, seed: int = 0, method: str = "auto",
                            particles: int = 1000, replicates: int = 4) -> OrbitalEstimate:
    """Probability that independently Haar-conjugated families form a joint microstate.

    Parameters
    ----------
    families : sequence of MicrostateTuple
        Fixed marginal microstates; each must pass its marginal target.
    joint_target : TargetMoments
        Target over all families' variables, lefts then rights in family order.
    method : {"direct", "splitting", "auto"}
        ``auto`` runs direct sampling and falls back to splitting when fewer
        than ``AUTO_MIN_HITS`` trials hit.
    particles, replicates : int
        Subset-simulation population and number of independent runs; the
        standard error comes from the spread of the runs.
    """
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}")
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    d = _check_families(families)
    marginal_worst = check_marginals(families, joint_target, M, epsilon)
    spec = _cross_spec(families, joint_target, M, epsilon, d)
    scorer = _Scorer(families, spec)
    ell = len(families)
    if spec is None:
        # one family, or no word mixes families: conjugation preserves every moment
        return OrbitalEstimate(d, 1.0, 0.0, 0.0, samples, samples, "exact")
    if method == "splitting":
        return _splitting(scorer, ell, d, epsilon, particles, seed, replicates=replicates)
    est = _direct(scorer, ell, d, epsilon, samples, seed)
    if method == "auto" and (est.hits or 0) < AUTO_MIN_HITS:
        return _splitting(scorer, ell, d, epsilon, particles, seed, replicates=replicates)
    return est


def asymptotic_freeness_fraction(families, M: int, epsilon: float, samples: int = 100, seed: int = 0) -> float:
    """Fraction of Haar-conjugated trials whose families are ``(M, epsilon)``-free."""
    fams = [list(f.lefts) + list(f.rights) if hasattr(f, "lefts") else [np.asarray(X) for X in f]
            for f in families]
    d = fams[0][0].shape[0]
    if any(X.shape != (d, d) for f in fams for X in f):
        raise ConfigurationError("families must share one dimension")
    if len(fams) == 1:
        return 1.0
    passed = 0
    for t in range(samples):
        rng = _rng.stream(seed, t)
        conj = []
        for f in fams:
            U = _haar_batch(rng, d)
            Uh = U.conj().T
            conj.append([U @ X @ Uh for X in f])
        passed += is_m_eps_free(conj, M, epsilon)[0]
    return passed / samples


def chi_orb_sequence(generator: Callable[[int], Sequence[MicrostateTuple]], joint_target: TargetMoments, M: int,
                     epsilon: float, d_list, samples: int = 10_000, seed: int = 0, method: str = "auto",
                     particles: int = 1000, replicates: int = 4) -> list[tuple[int, OrbitalEstimate]]:
    d_list = [int(d) for d in d_list]
    if any(b <= a for a, b in zip(d_list, d_list[1:])):
        raise ConfigurationError("d_list must be strictly ascending")
    return [(d, orbital_hit_probability(generator(d), joint_target, M, epsilon, samples, _rng.derive(seed, d),
                                        method, particles, replicates)) for d in d_list]


def semicircle_families(d: int, n_per_family: Sequence[tuple[int, int]], variance: float = 1.0):
    """Families of diagonal matrices with semicircle-quantile spectra.

    ``n_per_family`` lists ``(n_k, m_k)``.  Every matrix is the same diagonal
    matrix, so each single-variable marginal moment of degree <= 2 is exact.
    """
    D = np.diag(semicircle_quantiles(d, variance)).astype(complex)
    return [MicrostateTuple(tuple(D for _ in range(n)), tuple(D for _ in range(m))) for n, m in n_per_family]


# -- subadditivity ------------------------------------------------------------

@dataclass
class SubadditivityReport:
    d: int
    chi_joint: float
    chi_joint_se: float
    chi_marginals: list
    chi_marginals_se: list
    chi_orb: float
    chi_orb_se: float
    gap: float
    std_error: float
    chosen_candidate: list = field(default_factory=list)

    @property
    def z(self) -> float:
        return self.gap / self.std_error if self.std_error > 0 else (0.0 if self.gap == 0 else math.copysign(math.inf, self.gap))

    def row(self) -> dict:
        return {k: getattr(self, k) for k in ("d", "chi_joint", "chi_joint_se", "chi_marginals", "chi_marginals_se",
                                              "chi_orb", "chi_orb_se", "gap", "std_error", "chosen_candidate")}


def _normalized(est: VolumeEstimate) -> float:
    if est.log_volume is None:
        raise ConfigurationError(f"zero hits in a volume estimate at d={est.d}; increase the budget")
    return est.normalized_chi


def orbital_subadditivity_gap(joint_spec: MicrostateSpec, layout: Sequence[tuple[int, int]],
                              budgets: dict | None = None, seed: int = 0,
                              families: Sequence[MicrostateTuple] | None = None) -> SubadditivityReport:
    """Estimate ``[chi_orb + sum_k chi_k] - chi_joint`` at fixed ``(M, d, epsilon)``.

    ``layout`` lists ``(n_k, m_k)`` per family, in the joint order.  All terms
    are normalized as ``(1/d^2) log(.) + ((n+m)/2) log d``; the orbital term is
    ``(1/d^2) log p``.  Marginal sets use the restricted joint target with the
    same ``(M, epsilon, R)``.

    The orbital term needs fixed marginal tuples.  If ``families`` is omitted,
    candidates are the semicircle-quantile tuples plus hits kept from each
    marginal volume run (uniform draws from the marginal sets).  Each candidate
    gets a short orbital run; the best one is then re-estimated on a fresh
    stream, so the reported value is not biased by the selection.

    ``budgets`` keys: ``volume_samples``, ``orbital_samples``, ``candidates``,
    ``screen_samples``, ``method``, ``particles``, ``replicates``.
    """
    b = {"volume_samples": 200_000, "orbital_samples": 20_000, "candidates": 8, "screen_samples": 2_000,
         "method": "auto", "particles": 1000, "replicates": 4}
    b.update(budgets or {})
    d, M, eps = joint_spec.d, joint_spec.M, joint_spec.epsilon
    target = joint_spec.target
    if joint_spec.mode != "bifree-reduced":
        raise ConfigurationError("the subadditivity experiment uses bifree-reduced membership")
    shells = []
    lo = ro = 0
    for n_k, m_k in layout:
        shells.append((list(range(lo, lo + n_k)), list(range(ro, ro + m_k))))
        lo += n_k
        ro += m_k
    if (lo, ro) != (target.n, target.m):
        raise ConfigurationError(f"layout covers ({lo}, {ro}) variables, target has ({target.n}, {target.m})")
    joint = estimate_log_volume(joint_spec, HSBall(), b["volume_samples"], _rng.derive(seed, 0),
                                keep_hits=b["candidates"] if len(layout) == 1 else 0)
    margs, kept = [], []
    for k, (li, ri) in enumerate(shells):
        if len(layout) == 1:
            # the single marginal set is the joint set
            est = joint
        else:
            spec_k = MicrostateSpec(target.restrict(li, ri), M, eps, d, joint_spec.R)
            est = estimate_log_volume(spec_k, HSBall(), b["volume_samples"], _rng.derive(seed, 1, k),
                                      keep_hits=b["candidates"])
        margs.append(est)
        kept.append(est.kept)
    chosen = []
    if families is None:
        pool = [("semicircle", _semicircle_candidate(d, shells, target, joint_spec.R))]
        for c in range(b["candidates"]):
            fam = []
            for k, (n_k, m_k) in enumerate(layout):
                if kept[k] is None or len(kept[k][0]) <= c:
                    break
                fam.append(MicrostateTuple(tuple(kept[k][0][c]), tuple(kept[k][1][c]), joint_spec.R))
            if len(fam) == len(layout):
                pool.append((f"uniform-{c}", fam))
        scored = []
        for i, (name, fam) in enumerate(pool):
            try:
                est = orbital_hit_probability(fam, target, M, eps, b["screen_samples"], _rng.derive(seed, 2, i),
                                              b["method"], b["particles"] // 4 or 1, 2)
            except PreconditionError:
                continue
            scored.append((est.hit_probability, -i, name, fam))
        if not scored:
            raise PreconditionError("no candidate marginal tuple passed its marginal target")
        _, _, name, families = max(scored, key=lambda t: (t[0], t[1]))
        chosen = [name]
    orb = orbital_hit_probability(families, target, M, eps, b["orbital_samples"], _rng.derive(seed, 3),
                                  b["method"], b["particles"], b["replicates"])
    if orb.neg_infinity:
        raise ConfigurationError("orbital estimate has zero hits; increase the budget")
    chi_j = _normalized(joint)
    chi_k = [_normalized(e) for e in margs]
    gap = orb.normalized + sum(chi_k) - chi_j
    var = orb.normalized_std_error ** 2 + joint.normalized_std_error ** 2
    var += sum(e.normalized_std_error ** 2 for e in margs)
    return SubadditivityReport(d, chi_j, joint.normalized_std_error, chi_k, [e.normalized_std_error for e in margs],
                               orb.normalized, orb.normalized_std_error, gap, math.sqrt(var), chosen)


def _semicircle_candidate(d, shells, target: TargetMoments, R) -> list[MicrostateTuple]:
    """Diagonal semicircle-quantile matrices with each variable's target variance."""
    from .words import ReducedWord

    q = semicircle_quantiles(d, 1.0)
    fams = []
    for li, ri in shells:
        lefts = tuple(np.diag(q * math.sqrt(max(float(np.real(target.value(ReducedWord((i, i), ())))), 0.0)))
                      .astype(complex) for i in li)
        rights = tuple(np.diag(q * math.sqrt(max(float(np.real(target.value(ReducedWord((), (j, j))))), 0.0)))
                       .astype(complex) for j in ri)
        fams.append(MicrostateTuple(lefts, rights, R))
    return fams
