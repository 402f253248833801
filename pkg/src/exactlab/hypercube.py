"""Bit-vector domains, linear threshold classifiers, and the worst-case loss.

Classifiers carry exact rational weights so that agreement questions over the
finite cube never hinge on floating-point ties.  Classifiers learned as
floats are converted with :meth:`LinearThreshold.from_floats`, which snaps
values within ``SNAP_TOL`` of zero to exact zero before the (lossless)
float-to-Fraction conversion.

Exhaustive comparisons run over all 2^d points.  Internally a classifier is
scaled by the least common denominator of its weights to an integer form;
when the resulting scores fit comfortably in int64 the enumeration runs in
the integer kernels, otherwise a float sweep with an exact-rational recheck
of near-zero scores is used, so the result is exact either way.

Point/index convention: reading the index in binary, most significant bit
first, gives the coordinates in order.  For comparison tasks on d = 2m bits,
LEFT is the first m coordinates (high bits of the index), RIGHT the rest.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import kernels

SNAP_TOL = 1e-9
DEFAULT_ENUM_CAP = 24
_INT64_SAFE = 1 << 62
_EPS = np.finfo(np.float64).eps


class DimensionMismatchError(ValueError):
    """Operands live on cubes of different dimension."""


class EnumerationCapError(RuntimeError):
    """The requested exhaustive sweep exceeds the configured cap.

    Callers are expected to fall back to sampling and report the outcome as
    not exactly verified.
    """


@dataclass(frozen=True)
class BitVector:
    """A point of {0,1}^d."""

    bits: tuple

    def __post_init__(self):
        if len(self.bits) < 1:
            raise ValueError("BitVector needs dimension >= 1")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"entries must be 0 or 1, got {self.bits}")
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))

    @classmethod
    def from_index(cls, index: int, d: int) -> "BitVector":
        if not 0 <= index < (1 << d):
            raise ValueError(f"index {index} out of range for d={d}")
        return cls(tuple((index >> (d - 1 - j)) & 1 for j in range(d)))

    def to_index(self) -> int:
        idx = 0
        for b in self.bits:
            idx = (idx << 1) | b
        return idx

    @property
    def dimension(self) -> int:
        return len(self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.int64)


def left_value(x: BitVector, m: int) -> int:
    """Integer encoded by the first m bits (most significant first)."""
    if len(x) != 2 * m:
        raise DimensionMismatchError(f"need d = 2m, got d={len(x)}, m={m}")
    v = 0
    for b in x.bits[:m]:
        v = (v << 1) | b
    return v


def right_value(x: BitVector, m: int) -> int:
    """Integer encoded by the last m bits (most significant first)."""
    if len(x) != 2 * m:
        raise DimensionMismatchError(f"need d = 2m, got d={len(x)}, m={m}")
    v = 0
    for b in x.bits[m:]:
        v = (v << 1) | b
    return v


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)  # exact binary expansion
    raise TypeError(f"cannot represent {value!r} exactly")


@dataclass(frozen=True)
class LinearThreshold:
    """Halfspace classifier x -> 1(<w, x> + b >= 0) with exact coefficients."""

    weights: tuple
    bias: Fraction

    def __post_init__(self):
        if len(self.weights) < 1:
            raise ValueError("need at least one weight")
        object.__setattr__(
            self, "weights", tuple(_to_fraction(w) for w in self.weights)
        )
        object.__setattr__(self, "bias", _to_fraction(self.bias))

    @classmethod
    def from_ints(cls, weights: Sequence[int], bias: int) -> "LinearThreshold":
        return cls(tuple(Fraction(int(w)) for w in weights), Fraction(int(bias)))

    @classmethod
    def from_floats(
        cls, weights: Sequence[float], bias: float, snap_tol: float = SNAP_TOL
    ) -> "LinearThreshold":
        """Exact conversion of a float classifier; |value| < snap_tol becomes 0."""
        snapped = [0.0 if abs(float(w)) < snap_tol else float(w) for w in weights]
        b = 0.0 if abs(float(bias)) < snap_tol else float(bias)
        return cls(tuple(Fraction(w) for w in snapped), Fraction(b))

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def score(self, x: BitVector) -> Fraction:
        if len(x) != self.dimension:
            raise DimensionMismatchError(
                f"classifier d={self.dimension}, point d={len(x)}"
            )
        s = self.bias
        for w, b in zip(self.weights, x.bits):
            if b:
                s += w
        return s

    def evaluate(self, x: BitVector) -> int:
        """1 iff <w, x> + b >= 0 (the boundary is classified 1)."""
        return 1 if self.score(x) >= 0 else 0

    def float_arrays(self):
        w = np.array([float(v) for v in self.weights])
        return w, float(self.bias)


def evaluate(h: LinearThreshold, x: BitVector) -> int:
    return h.evaluate(x)


@lru_cache(maxsize=4096)
def scaled_integer_form(h: LinearThreshold):
    """(integer weights, integer bias, sum |w| + |b|) with the same sign pattern.

    Multiplies through by the least common denominator, which preserves the
    decision at every point.  Values are Python ints, so arbitrarily large
    rationals are fine; the third element lets callers pick an int64 kernel
    safely.
    """
    import math

    lcm = 1
    for f in (*h.weights, h.bias):
        q = f.denominator
        lcm = lcm // math.gcd(lcm, q) * q
    w = tuple(int(f * lcm) for f in h.weights)
    b = int(h.bias * lcm)
    bound = sum(abs(v) for v in w) + abs(b)
    return w, b, bound


class NamedHypothesis:
    """Registry of the classifiers the experiments refer to by name.

    kind is one of all_zero, origin_indicator, geq_compare, gt_compare;
    comparisons take the half-width m (so d = 2m), the others take d.
    """

    KINDS = ("all_zero", "origin_indicator", "geq_compare", "gt_compare")

    def __init__(self, kind: str, *, d: Optional[int] = None, m: Optional[int] = None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown kind {kind!r}")
        if kind in ("geq_compare", "gt_compare"):
            if m is None or m < 1:
                raise ValueError("comparison hypotheses need m >= 1")
            d = 2 * m
        else:
            if d is None or d < 1:
                raise ValueError(f"{kind} needs d >= 1")
        self.kind = kind
        self.m = m
        self.dimension = d

    def build(self) -> LinearThreshold:
        return build_named(self)

    def __repr__(self):
        if self.m is not None:
            return f"NamedHypothesis({self.kind}, m={self.m})"
        return f"NamedHypothesis({self.kind}, d={self.dimension})"


def all_zero(d: int) -> LinearThreshold:
    """The constant-0 classifier."""
    return LinearThreshold.from_ints([0] * d, -1)


def origin_indicator(d: int) -> LinearThreshold:
    """1 exactly at the all-zeros point."""
    return LinearThreshold.from_ints([-1] * d, 0)


def geq_compare(m: int) -> LinearThreshold:
    """1(LEFT(x) >= RIGHT(x)) on d = 2m bits."""
    weights = [1 << (m - 1 - i) for i in range(m)] + [
        -(1 << (m - 1 - j)) for j in range(m)
    ]
    return LinearThreshold.from_ints(weights, 0)


def gt_compare(m: int) -> LinearThreshold:
    """1(LEFT(x) > RIGHT(x)): doubled comparison weights, bias -1."""
    weights = [1 << (m - i) for i in range(m)] + [-(1 << (m - j)) for j in range(m)]
    return LinearThreshold.from_ints(weights, -1)


def build_named(spec: NamedHypothesis) -> LinearThreshold:
    if spec.kind == "all_zero":
        return all_zero(spec.dimension)
    if spec.kind == "origin_indicator":
        return origin_indicator(spec.dimension)
    if spec.kind == "geq_compare":
        return geq_compare(spec.m)
    return gt_compare(spec.m)


@lru_cache(maxsize=32)
def domain_bits(d: int) -> np.ndarray:
    """All 2^d points as an int64 matrix, row g = coordinates of index g."""
    if d > 20:
        raise EnumerationCapError(f"domain_bits matrix for d={d} is too large")
    idx = np.arange(1 << d, dtype=np.int64)
    shifts = np.arange(d - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] >> shifts[None, :]) & 1


def enumerate_domain(d: int):
    """Yield every BitVector of {0,1}^d in index order (small d only)."""
    for g in range(1 << d):
        yield BitVector.from_index(g, d)


def _exact_score_at_index(h: LinearThreshold, g: int) -> Fraction:
    d = h.dimension
    s = h.bias
    for j in range(d):
        if (g >> (d - 1 - j)) & 1:
            s += h.weights[j]
    return s


def _guarded_float_stats(h1: LinearThreshold, h2: LinearThreshold, d: int):
    """Disagreement stats via float sweeps with exact recheck near zero.

    The float sweep is exact except possibly where |score| falls below a
    conservative rounding bound; those few points are re-evaluated with
    Fractions, so the returned count and witness are exact.
    """
    total = 1 << d
    w1, b1 = h1.float_arrays()
    w2, b2 = h2.float_arrays()
    # conversion is lossless for float-born weights; for general rationals the
    # representation error is covered by the |w|-scaled bound below
    tau1 = 8 * (d + 2) * _EPS * (np.sum(np.abs(w1)) + abs(b1) + 1.0)
    tau2 = 8 * (d + 2) * _EPS * (np.sum(np.abs(w2)) + abs(b2) + 1.0)
    shifts = np.arange(d - 1, -1, -1, dtype=np.int64)
    count = 0
    min_idx = -1
    chunk = 1 << 18
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = (idx[:, None] >> shifts[None, :]) & 1
        bf = bits.astype(np.float64)
        s1 = bf @ w1 + b1
        s2 = bf @ w2 + b2
        l1 = s1 >= 0
        l2 = s2 >= 0
        risky = (np.abs(s1) <= tau1) | (np.abs(s2) <= tau2)
        for g in idx[risky]:
            gi = int(g)
            l1[gi - start] = _exact_score_at_index(h1, gi) >= 0
            l2[gi - start] = _exact_score_at_index(h2, gi) >= 0
        dis = l1 != l2
        c = int(np.count_nonzero(dis))
        if c and min_idx < 0:
            min_idx = int(idx[int(np.argmax(dis))])
        count += c
    return count, min_idx


def disagreement_stats(
    h1: LinearThreshold, h2: LinearThreshold, enum_cap: int = DEFAULT_ENUM_CAP
):
    """Exact (count, first disagreeing index) over the full cube."""
    if h1.dimension != h2.dimension:
        raise DimensionMismatchError(
            f"dimensions differ: {h1.dimension} vs {h2.dimension}"
        )
    d = h1.dimension
    if d > enum_cap:
        raise EnumerationCapError(
            f"d={d} exceeds enumeration cap {enum_cap}; fall back to sampling"
        )
    w1, b1, bound1 = scaled_integer_form(h1)
    w2, b2, bound2 = scaled_integer_form(h2)
    if max(bound1, bound2) < _INT64_SAFE:
        count, min_idx = kernels.agree_stats_int(
            np.array(w1, dtype=np.int64),
            np.int64(b1),
            np.array(w2, dtype=np.int64),
            np.int64(b2),
            d,
        )
        return int(count), int(min_idx)
    return _guarded_float_stats(h1, h2, d)


class ExactLossResult(NamedTuple):
    loss: int
    witness: Optional[BitVector]


def exact_loss(
    candidate: LinearThreshold,
    target: LinearThreshold,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> ExactLossResult:
    """Worst-case 0/1 loss: 0 iff the classifiers agree on every point.

    Returns 1 together with a disagreeing point (the smallest index) when
    they differ anywhere.  Raises EnumerationCapError above the cap.
    """
    count, min_idx = disagreement_stats(candidate, target, enum_cap=enum_cap)
    if count == 0:
        return ExactLossResult(0, None)
    return ExactLossResult(1, BitVector.from_index(min_idx, candidate.dimension))
