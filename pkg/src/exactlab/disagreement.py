"""Disagreement probabilities and critical sample sizes.

The two-hypothesis bound: with fewer than floor(1 / (2 min_pair P(h != h')))
examples, every learner misidentifies some target of the family with
probability at least 1/4.  The symmetric-learner bound replaces the pair
infimum by the infimum of P(h != gh) over group elements that actually move
h.  Both reduce to exact rational arithmetic here because the distributions
are enumerable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .hypercube import (
    DEFAULT_ENUM_CAP,
    DimensionMismatchError,
    LinearThreshold,
    disagreement_stats,
    scaled_integer_form,
)
from .symmetry import GroupSizeCapError, SymmetryAction, apply_action, generate_group

#: Sentinel for an infinite critical sample size (indistinguishable pair).
UNBOUNDED = math.inf

_Z99 = 2.5758293035489004  # two-sided 99% normal quantile


@dataclass(frozen=True)
class UniformHypercube:
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")


@dataclass(frozen=True)
class FiniteSupport:
    points: tuple
    probabilities: tuple

    def __post_init__(self):
        if len(self.points) != len(self.probabilities) or not self.points:
            raise ValueError("points and probabilities must align and be non-empty")
        probs = tuple(Fraction(p) if not isinstance(p, Fraction) else p for p in self.probabilities)
        if any(p < 0 for p in probs):
            raise ValueError("probabilities must be nonnegative")
        if abs(float(sum(probs)) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 within 1e-12")
        object.__setattr__(self, "probabilities", probs)
        d = self.points[0].dimension
        if any(p.dimension != d for p in self.points):
            raise DimensionMismatchError("support points have mixed dimensions")

    @property
    def d(self) -> int:
        return self.points[0].dimension


InputDistribution = Union[UniformHypercube, FiniteSupport]


@dataclass(frozen=True)
class DisagreementReport:
    """P(h(X) != h'(X)); exact reports carry a Fraction and zero halfwidth."""

    probability: Union[Fraction, float]
    method: str  # "exact" | "monte_carlo"
    sample_count: int
    confidence_halfwidth: float


def _labels_at_indices(h: LinearThreshold, idx: np.ndarray) -> np.ndarray:
    """Labels of h at the given point indices, exact.

    Integer-kernel path when safe; otherwise float scores with an exact
    recheck of the rare near-zero cases.
    """
    d = h.dimension
    w, b, bound = scaled_integer_form(h)
    shifts = np.arange(d - 1, -1, -1, dtype=np.int64)
    bits = (idx[:, None] >> shifts[None, :]) & 1
    if bound < (1 << 62):
        scores = bits @ np.array(w, dtype=np.int64) + np.int64(b)
        return scores >= 0
    from .hypercube import _exact_score_at_index

    wf, bf = h.float_arrays()
    scores = bits.astype(np.float64) @ wf + bf
    labels = scores >= 0
    tau = 8 * (d + 2) * np.finfo(np.float64).eps * (np.sum(np.abs(wf)) + abs(bf) + 1.0)
    for pos in np.flatnonzero(np.abs(scores) <= tau):
        labels[pos] = _exact_score_at_index(h, int(idx[pos])) >= 0
    return labels


def disagreement_prob(
    h1: LinearThreshold,
    h2: LinearThreshold,
    dist: InputDistribution,
    mode: str = "exact",
    samples: int = 10_000,
    seed: Optional[int] = None,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> DisagreementReport:
    """P(h1(X) != h2(X)) under dist, exactly or by Monte Carlo.

    Exact mode returns the exact rational; Monte Carlo returns the empirical
    fraction with a 99% normal-approximation halfwidth.
    """
    if h1.dimension != h2.dimension:
        raise DimensionMismatchError("hypothesis dimensions differ")
    if mode == "exact":
        if isinstance(dist, UniformHypercube):
            if dist.d != h1.dimension:
                raise DimensionMismatchError("distribution dimension mismatch")
            count, _ = disagreement_stats(h1, h2, enum_cap=enum_cap)
            prob = Fraction(count, 1 << dist.d)
        else:
            prob = Fraction(0)
            for x, p in zip(dist.points, dist.probabilities):
                if h1.evaluate(x) != h2.evaluate(x):
                    prob += p
        return DisagreementReport(prob, "exact", 0, 0.0)
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    if isinstance(dist, UniformHypercube):
        idx = rng.integers(0, 1 << dist.d, size=samples, dtype=np.int64)
    else:
        probs = np.array([float(p) for p in dist.probabilities])
        probs = probs / probs.sum()
        chosen = rng.choice(len(dist.points), size=samples, p=probs)
        idx = np.array([dist.points[i].to_index() for i in chosen], dtype=np.int64)
    dis = _labels_at_indices(h1, idx) != _labels_at_indices(h2, idx)
    p_hat = float(np.mean(dis))
    half = _Z99 * math.sqrt(max(p_hat * (1 - p_hat), 0.0) / samples)
    return DisagreementReport(p_hat, "monte_carlo", samples, half)


def critical_sample_size(pair_disagreements: Sequence) -> Union[int, float]:
    """floor(1 / (2 min P)) over the pairwise disagreement probabilities.

    Below this sample size some target of the family defeats every learner
    with probability >= 1/4.  A zero disagreement means an on-distribution
    indistinguishable pair, so the critical size is unbounded.
    """
    probs = [Fraction(p) if not isinstance(p, Fraction) else p for p in pair_disagreements]
    if not probs:
        raise ValueError("need at least one pair")
    if any(p < 0 or p > 1 for p in probs):
        raise ValueError("disagreement probabilities must lie in [0, 1]")
    smallest = min(probs)
    if smallest == 0:
        return UNBOUNDED
    return int(Fraction(1, 2) / smallest)


class FailureBound(NamedTuple):
    """Lower bounds on the max failure probability of any learner at size n."""

    power: float  # agree_prob^n / 2
    linear: float  # (1 - n (1 - agree_prob)) / 2, first-order relaxation


def failure_lower_bound(n: int, agree_prob: float) -> FailureBound:
    if n < 0:
        raise ValueError("n must be >= 0")
    if not 0 <= agree_prob <= 1:
        raise ValueError("agree_prob must lie in [0, 1]")
    power = agree_prob**n / 2.0
    linear = (1.0 - n * (1.0 - agree_prob)) / 2.0
    return FailureBound(power, linear)


@dataclass(frozen=True)
class OrbitBound:
    """Critical sample size for a G-symmetric learner on hypothesis h.

    n_critical is None when no group element moves h (the orbit argument
    yields no bound), UNBOUNDED when some element moves it only off the
    distribution's support, and an int otherwise.  complete is False when the
    group was truncated at the cap, making the bound valid for the explored
    subset only (a weaker but still valid lower bound).
    """

    n_critical: Optional[Union[int, float]]
    min_disagreement: Optional[Fraction]
    witness: Optional[SymmetryAction]
    complete: bool
    group_size: int


def orbit_critical_sample_size(
    h: LinearThreshold,
    generators: Iterable[SymmetryAction],
    dist: UniformHypercube,
    cap: int = 100_000,
    allow_partial: bool = False,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> OrbitBound:
    """Symmetric-learner bound: floor(1/(2 inf P(h != gh))) over moving g.

    Below the returned size, any G-symmetric learner misses h with
    probability at least 1/4.  Only the uniform distribution is supported:
    the argument requires a G-invariant input law and uniform is invariant
    for both built-in symmetry families.
    """
    if not isinstance(dist, UniformHypercube):
        raise TypeError("orbit bound requires the uniform distribution (G-invariant)")
    complete = True
    try:
        elements = generate_group(generators, cap=cap)
    except GroupSizeCapError:
        if not allow_partial:
            raise
        complete = False
        elements = _generate_group_truncated(generators, cap)
    best: Optional[Fraction] = None
    witness = None
    for g in elements:
        if g.is_identity():
            continue
        gh = apply_action(g, h)
        report = disagreement_prob(h, gh, dist, mode="exact", enum_cap=enum_cap)
        if report.probability == 0:
            continue  # g fixes h as a function: not a usable pair
        if best is None or report.probability < best:
            best = report.probability
            witness = g
    if best is None:
        return OrbitBound(None, None, None, complete, len(elements))
    return OrbitBound(
        int(Fraction(1, 2) / best), best, witness, complete, len(elements)
    )


def _generate_group_truncated(generators, cap):
    """BFS closure truncated at cap elements (used with allow_partial)."""
    gens = list(generators)
    d = gens[0].dimension
    closure = [SymmetryAction.identity(d)]
    seen = {(closure[0].permutation, closure[0].label_flip)}
    frontier = [closure[0]]
    gens_full = gens + [g.inverse() for g in gens]
    while frontier and len(closure) < cap:
        nxt = []
        for elem in frontier:
            for g in gens_full:
                cand = g.compose(elem)
                key = (cand.permutation, cand.label_flip)
                if key not in seen:
                    seen.add(key)
                    closure.append(cand)
                    nxt.append(cand)
                    if len(closure) >= cap:
                        return closure
        frontier = nxt
    return closure
