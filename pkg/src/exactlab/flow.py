"""Gradient flow on the logistic loss and the two margin experiments.

run_flow integrates d(theta)/dt = -grad L(theta) for the linear classifier
theta = (w, b), treated as one augmented weight vector over inputs
(x, 1), starting from zero.  Checkpoints are log-spaced; at each one the
curve records the empirical loss, whether the snapped classifier equals the
target on the whole cube, and the cosine between theta and the max-margin
direction of the same (augmented) data, which is the known limit direction
of the flow.

The slow-exact-learning experiment runs the flow on teaching sets of the
comparison task h_ge for growing m and reports the first checkpoint time at
which exact learning holds.  The many-examples experiment samples training
points uniformly from the support vectors of the full-domain fit and asks
how many draws the max-margin classifier needs before it reproduces h_ge
everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import kernels
from .data import LabeledDataset
from .hypercube import (
    DEFAULT_ENUM_CAP,
    LinearThreshold,
    domain_bits,
    exact_loss,
    geq_compare,
)
from .maxmargin import (
    NonSeparableError,
    SingleClassError,
    _fit_arrays,
    max_margin_direction,
)


@dataclass(frozen=True)
class FlowConfig:
    """Integrator and checkpoint settings for one flow run."""

    t_max: float
    rtol: float = 1e-7
    atol: float = 1e-9
    checkpoints_per_decade: int = 64
    t_first: float = 1e-2
    initial_state: Optional[tuple] = None  # (w_1..w_d, b); zeros when None
    max_steps: int = 5_000_000

    def __post_init__(self):
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.t_first <= 0 or self.checkpoints_per_decade < 1:
            raise ValueError("bad checkpoint settings")

    def checkpoint_times(self) -> np.ndarray:
        """Strictly increasing log-spaced times in [t_first, t_max].

        Empty when t_max falls below the first checkpoint; the curve then
        holds only the initial record.
        """
        if self.t_max < self.t_first:
            return np.zeros(0)
        decades = math.log10(self.t_max / self.t_first)
        count = max(2, int(math.ceil(decades * self.checkpoints_per_decade)) + 1)
        ts = np.geomspace(self.t_first, self.t_max, count)
        ts[-1] = self.t_max
        return ts


class IntegratorError(RuntimeError):
    """The adaptive integrator could not complete the requested span."""


@dataclass(frozen=True)
class CurvePoint:
    time: float
    loss: float
    exact: bool
    cosine: float


@dataclass
class TrainingCurve:
    """Loss / exactness / direction records along one gradient-flow run."""

    points: List[CurvePoint]
    final_state: np.ndarray  # augmented (w, b)
    reference_direction: Optional[np.ndarray]
    separable: bool

    def times(self):
        return np.array([p.time for p in self.points])

    def losses(self):
        return np.array([p.loss for p in self.points])

    def exact_flags(self):
        return np.array([p.exact for p in self.points])

    def cosines(self):
        return np.array([p.cosine for p in self.points])

    def first_exact_time(self) -> Optional[float]:
        for p in self.points:
            if p.exact:
                return p.time
        return None


def logistic_loss(X: np.ndarray, y01: np.ndarray, w: np.ndarray, b: float) -> float:
    """Mean cross-entropy with the 0/1 -> -1/+1 label map, computed stably."""
    X = np.asarray(X, dtype=np.float64)
    if len(y01) == 0:
        raise ValueError("empty data")
    ypm = 2.0 * np.asarray(y01, dtype=np.float64) - 1.0
    z = ypm * (X @ np.asarray(w, dtype=np.float64) + b)
    return float(np.mean(np.logaddexp(0.0, -z)))


def logistic_grad(X: np.ndarray, y01: np.ndarray, w: np.ndarray, b: float):
    """Analytic gradient of logistic_loss in (w, b)."""
    X = np.asarray(X, dtype=np.float64)
    ypm = 2.0 * np.asarray(y01, dtype=np.float64) - 1.0
    z = ypm * (X @ np.asarray(w, dtype=np.float64) + b)
    # sigmoid(-z), stable on both tails
    sig = np.where(z >= 0, np.exp(-np.clip(z, 0, None)) / (1 + np.exp(-np.clip(z, 0, None))),
                   1.0 / (1 + np.exp(np.clip(z, None, 0))))
    coef = -ypm * sig / len(ypm)
    return coef @ X, float(np.sum(coef))


def run_flow(
    data: LabeledDataset,
    target: LinearThreshold,
    config: FlowConfig,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> TrainingCurve:
    """Integrate the flow on data and score exactness against target.

    Non-separable data still produces a curve; exactness is then simply
    never flagged and no reference direction is reported.
    """
    X, y = data.as_arrays()
    if len(y) == 0:
        raise ValueError("flow needs non-empty data")
    d = data.dimension
    Xa = np.hstack([X.astype(np.float64), np.ones((len(y), 1))])
    ypm = (2.0 * y - 1.0).astype(np.float64)
    try:
        ref = max_margin_direction(Xa, ypm)
        separable = True
    except (NonSeparableError, SingleClassError):
        ref = None
        separable = False
    u0 = np.zeros(d + 1)
    if config.initial_state is not None:
        u0 = np.array(config.initial_state, dtype=np.float64)
        if u0.shape != (d + 1,):
            raise ValueError("initial_state must have length d+1")
    t_eval = config.checkpoint_times()
    if len(t_eval) == 0:
        points = [_curve_point(0.0, Xa, ypm, u0, target, ref, enum_cap)]
        return TrainingCurve(points, u0.copy(), ref, separable)
    states, status, _ = kernels.dp45_flow(
        Xa, ypm, t_eval, config.rtol, config.atol, u0, config.max_steps
    )
    if status == 2:
        raise IntegratorError("step size underflow")
    if status == 1:
        raise IntegratorError("step budget exhausted before t_max")

    points = [_curve_point(0.0, Xa, ypm, u0, target, ref, enum_cap)]
    for t, u in zip(t_eval, states):
        points.append(_curve_point(float(t), Xa, ypm, u, target, ref, enum_cap))
    return TrainingCurve(points, states[-1].copy(), ref, separable)


def _curve_point(t, Xa, ypm, u, target, ref, enum_cap):
    z = ypm * (Xa @ u)
    loss = float(np.mean(np.logaddexp(0.0, -z)))
    h = LinearThreshold.from_floats(u[:-1], u[-1])
    exact = exact_loss(h, target, enum_cap=enum_cap).loss == 0
    norm = float(np.linalg.norm(u))
    if ref is None or norm == 0.0:
        cos = 0.0
    else:
        cos = float(u @ ref / (norm * np.linalg.norm(ref)))
    return CurvePoint(t, loss, exact, cos)


def time_to_exact(curves: Dict[int, TrainingCurve]) -> Dict[int, Optional[float]]:
    """First checkpoint time with the exactness flag set, per key.

    None means never reached within the run (checkpoint resolution applies).
    """
    return {k: curve.first_exact_time() for k, curve in curves.items()}


def comparison_teaching_set(m: int) -> LabeledDataset:
    """The canonical small teaching set for h_ge on d = 2m bits.

    For every bit weight 2^j it contains the carry pair around k = 2^j - 1:
    (k, k) and (k+1, k+1) labeled 1 and (k, k+1) labeled 0.  All points lie
    on the margin of the full-domain max-margin classifier and the induced
    tight differences span its dual support, so the max-margin fit on this
    set reproduces h_ge exactly (3m - 1 points, within the 2d+2 budget).
    """
    if m < 1:
        raise ValueError("m must be >= 1")

    def bits(v):
        return tuple((v >> (m - 1 - j)) & 1 for j in range(m))

    points = {}
    for j in range(m):
        k, k1 = (1 << j) - 1, 1 << j
        points[bits(k) + bits(k)] = 1
        points[bits(k1) + bits(k1)] = 1
        points[bits(k) + bits(k1)] = 0
    items = sorted(points.items())
    X = np.array([p for p, _ in items], dtype=np.int64)
    y = np.array([lab for _, lab in items], dtype=np.int64)
    return LabeledDataset.from_arrays(X, y)


def slow_learning_experiment(
    ms: Sequence[int],
    t_max: float = 1e10,
    checkpoints_per_decade: int = 64,
    rtol: float = 1e-7,
    atol: float = 1e-9,
) -> Dict[int, TrainingCurve]:
    """Flow on the canonical comparison teaching sets for each m."""
    curves = {}
    for m in ms:
        config = FlowConfig(
            t_max=t_max,
            rtol=rtol,
            atol=atol,
            checkpoints_per_decade=checkpoints_per_decade,
        )
        curves[m] = run_flow(comparison_teaching_set(m), geq_compare(m), config)
    return curves


def support_vector_points(m: int, tol: float = 1e-9):
    """Margin points of the full-domain max-margin fit of h_ge.

    Returns (X, y): the points achieving the extreme scores on each side.
    For h_ge these are exactly the diagonals LEFT = RIGHT (positive) and
    LEFT = RIGHT - 1 (negative), which the caller may sanity-check.
    """
    d = 2 * m
    target = geq_compare(m)
    B = domain_bits(d)
    from .maxmargin import _labels_on_domain

    labels = _labels_on_domain(target)
    sol = _fit_arrays(B, labels, 1e-10)
    scores = B.astype(np.float64) @ sol.weights
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    band = tol * max(1.0, float(np.abs(scores).max()))
    tight_pos = pos[np.abs(scores[pos] - scores[pos].min()) <= band]
    tight_neg = neg[np.abs(scores[neg] - scores[neg].max()) <= band]
    keep = np.sort(np.concatenate([tight_pos, tight_neg]))
    return B[keep], labels[keep]


@dataclass
class MarginSampleResult:
    """One (m, seed) sweep of the margin-sample experiment."""

    m: int
    seed: int
    rows: List[tuple]  # (n, fraction_correct, exact)
    n_star: Optional[int]  # smallest grid n achieving exactness


def default_n_grid(m: int) -> List[int]:
    """Roughly sqrt(2)-spaced sample sizes up to well past the support size."""
    top = 8 << (m + 1)
    grid = []
    k = 0
    while True:
        n = int(round(2 ** (k / 2)))
        if n > top:
            break
        if not grid or n > grid[-1]:
            grid.append(n)
        k += 1
    return grid


def margin_sample_experiment(
    m: int,
    seeds: Sequence[int],
    n_grid: Optional[Sequence[int]] = None,
    tol: float = 1e-10,
) -> List[MarginSampleResult]:
    """Fig-2-style experiment: max-margin on n uniform support-vector draws.

    Draws are nested per seed (the size-n sample is the prefix of one
    stream).  Single-class samples fall back to the constant classifier of
    the observed label for scoring purposes; they are never exact for m >= 1.
    """
    target = geq_compare(m)
    d = 2 * m
    SV, SV_labels = support_vector_points(m)
    if n_grid is None:
        n_grid = default_n_grid(m)
    n_grid = sorted(set(int(n) for n in n_grid))
    total = 1 << d
    from .hypercube import all_zero
    from .symmetry import SymmetryAction, apply_action

    results = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        draws = rng.integers(0, len(SV), size=max(n_grid))
        rows = []
        n_star = None
        for n in n_grid:
            take = draws[:n]
            X = SV[take]
            y = SV_labels[take]
            if y.min() == y.max():
                # single class: score the constant classifier honestly
                const = all_zero(d)
                if y.max() == 1:
                    const = apply_action(SymmetryAction.flip(d), const)
                count, _ = _disagreement_count(const, target)
            else:
                try:
                    sol = _fit_arrays(X, y, tol)
                    count, _ = _disagreement_count(sol.classifier(), target)
                except NonSeparableError:
                    count = total  # cannot happen for realizable labels; be safe
            fraction = 1.0 - count / total
            exact = count == 0
            rows.append((n, fraction, exact))
            if exact and n_star is None:
                n_star = n
        results.append(MarginSampleResult(m, int(seed), rows, n_star))
    return results


def _disagreement_count(h, target):
    from .hypercube import disagreement_stats

    return disagreement_stats(h, target)


def median_n_star(results: List[MarginSampleResult]) -> float:
    """Median over seeds; runs that never reached exactness count as +inf."""
    vals = [r.n_star if r.n_star is not None else math.inf for r in results]
    return float(np.median(vals))
