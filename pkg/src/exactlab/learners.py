"""A zoo of dataset-to-classifier learners and the failure-rate estimator.

Every learner is deterministic given (spec, data order, seed).  Gradient
learners start from zero weights so that the label-flip and coordinate
permutation symmetries hold exactly at the prediction level.  Labels map to
-1/+1 internally; the public contract stays {0, 1}.

estimate_failure draws datasets from the input distribution, fits, and
scores a trial as failed when the fitted classifier differs from the target
anywhere on the cube (exhaustive check).  A fit that errors out (max-margin
on single-class or non-separable draws) counts as a failure: the learner did
not return the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .data import LabeledDataset, LabeledExample
from .disagreement import InputDistribution, UniformHypercube
from .hypercube import (
    BitVector,
    DEFAULT_ENUM_CAP,
    EnumerationCapError,
    LinearThreshold,
    SNAP_TOL,
    all_zero,
    domain_bits,
    origin_indicator,
    scaled_integer_form,
    _exact_score_at_index,
)

_Z99 = 2.5758293035489004
_EPS = np.finfo(np.float64).eps

KINDS = (
    "constant_zero",
    "perceptron",
    "logistic_gd",
    "logistic_flow",
    "max_margin",
    "bayes_like",
)


@dataclass(frozen=True)
class LearnerSpec:
    """Which learner to run and with what knobs.

    params are kind-specific: perceptron(max_passes), logistic_gd(step_size,
    steps), logistic_flow(t_max, rtol, atol), max_margin(tol).
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(sorted(dict(self.params).items())))

    def param(self, name, default):
        return dict(self.params).get(name, default)

    @classmethod
    def constant_zero(cls):
        return cls("constant_zero")

    @classmethod
    def perceptron(cls, max_passes: int = 1000):
        if max_passes < 1:
            raise ValueError("max_passes must be positive")
        return cls("perceptron", (("max_passes", max_passes),))

    @classmethod
    def logistic_gd(
        cls,
        step_size: float = 0.5,
        steps: int = 400,
        init: str = "zero",
        aggressive: bool = False,
    ):
        """Zero init keeps the learner's symmetries exact; random init is
        available for exploration.  `aggressive` scales the step by 1/loss."""
        if step_size <= 0 or steps < 1:
            raise ValueError("need positive step size and step count")
        if init not in ("zero", "random"):
            raise ValueError("init must be zero or random")
        return cls(
            "logistic_gd",
            (
                ("aggressive", aggressive),
                ("init", init),
                ("step_size", step_size),
                ("steps", steps),
            ),
        )

    @classmethod
    def logistic_flow(
        cls,
        t_max: float = 100.0,
        rtol: float = 1e-7,
        atol: float = 1e-9,
        init: str = "zero",
    ):
        if t_max <= 0:
            raise ValueError("t_max must be positive")
        if init not in ("zero", "random"):
            raise ValueError("init must be zero or random")
        return cls(
            "logistic_flow",
            (("atol", atol), ("init", init), ("rtol", rtol), ("t_max", t_max)),
        )

    @classmethod
    def max_margin(cls, tol: float = 1e-10):
        return cls("max_margin", (("tol", tol),))

    @classmethod
    def bayes_like(cls):
        return cls("bayes_like")


def builtin_learners() -> dict:
    """The default-configured zoo, keyed by kind."""
    return {
        "constant_zero": LearnerSpec.constant_zero(),
        "perceptron": LearnerSpec.perceptron(),
        "logistic_gd": LearnerSpec.logistic_gd(),
        "logistic_flow": LearnerSpec.logistic_flow(),
        "max_margin": LearnerSpec.max_margin(),
        "bayes_like": LearnerSpec.bayes_like(),
    }


def _initial_state(spec: LearnerSpec, d: int, seed):
    """Zero by default; seeded gaussian weights for init="random"."""
    if spec.param("init", "zero") == "zero":
        return np.zeros(d), 0.0
    rng = np.random.default_rng(seed)
    state = rng.standard_normal(d + 1) * 0.1
    return state[:d], float(state[d])


def fit(spec: LearnerSpec, data: LabeledDataset, seed: Optional[int] = None) -> LinearThreshold:
    """Train a classifier.  Deterministic given (spec, data order, seed)."""
    d = data.dimension
    if spec.kind != "constant_zero" and len(data) == 0:
        raise ValueError(f"{spec.kind} needs non-empty data")
    if spec.kind == "constant_zero":
        return all_zero(d)
    X, y = data.as_arrays()
    if spec.kind == "perceptron":
        w, b, _ = kernels.perceptron_train(X, y, spec.param("max_passes", 1000))
        return LinearThreshold.from_ints(list(int(v) for v in w), int(b))
    if spec.kind == "logistic_gd":
        w0, b0 = _initial_state(spec, d, seed)
        w, b = kernels.logistic_gd(
            X.astype(np.float64),
            (2.0 * y - 1.0).astype(np.float64),
            spec.param("step_size", 0.5),
            spec.param("steps", 400),
            w0,
            b0,
            spec.param("aggressive", False),
        )
        return LinearThreshold.from_floats(w, b)
    if spec.kind == "logistic_flow":
        Xa = np.hstack([X.astype(np.float64), np.ones((len(y), 1))])
        w0, b0 = _initial_state(spec, d, seed)
        states, status, _ = kernels.dp45_flow(
            Xa,
            (2.0 * y - 1.0).astype(np.float64),
            np.array([spec.param("t_max", 100.0)]),
            spec.param("rtol", 1e-7),
            spec.param("atol", 1e-9),
            np.concatenate([w0, [b0]]),
            2_000_000,
        )
        if status != 0:
            raise RuntimeError(f"flow fit failed with integrator status {status}")
        u = states[-1]
        return LinearThreshold.from_floats(u[:-1], u[-1])
    if spec.kind == "max_margin":
        from .maxmargin import max_margin_fit

        sol = max_margin_fit(data, tol=spec.param("tol", 1e-10))
        return sol.classifier()
    # bayes_like: the optimal learner for the {all-zero, origin-indicator}
    # family: trust the origin's label when the origin was observed
    origin = BitVector((0,) * d)
    for ex in data:
        if ex.x == origin:
            return origin_indicator(d) if ex.y == 1 else all_zero(d)
    return all_zero(d)


@dataclass(frozen=True)
class FailureEstimate:
    """Monte-Carlo estimate of the exact-learning failure probability."""

    phi_hat: float
    trials: int
    confidence_halfwidth: float
    n: int
    fit_error_count: int = 0

    def __post_init__(self):
        if not 0.0 <= self.phi_hat <= 1.0:
            raise ValueError("phi_hat must lie in [0, 1]")


def _domain_labels_exact(h: LinearThreshold) -> np.ndarray:
    d = h.dimension
    w, b, bound = scaled_integer_form(h)
    B = domain_bits(d)
    if bound < (1 << 62):
        return (B @ np.array(w, dtype=np.int64) + np.int64(b)) >= 0
    wf, bf = h.float_arrays()
    scores = B.astype(np.float64) @ wf + bf
    labels = scores >= 0
    tau = 8 * (d + 2) * _EPS * (np.sum(np.abs(wf)) + abs(bf) + 1.0)
    for g in np.flatnonzero(np.abs(scores) <= tau):
        labels[g] = _exact_score_at_index(h, int(g)) >= 0
    return labels


def _batch_failures_float(W: np.ndarray, biases: np.ndarray, target_labels: np.ndarray, d: int):
    """Per-trial failure flags for float classifiers, exact despite rounding.

    Applies the standard snap-to-zero, scores every domain point in float64,
    and re-evaluates the rare near-zero scores with exact rationals.
    """
    W = np.where(np.abs(W) < SNAP_TOL, 0.0, W)
    biases = np.where(np.abs(biases) < SNAP_TOL, 0.0, biases)
    B = domain_bits(d).astype(np.float64)
    scores = W @ B.T + biases[:, None]
    labels = scores >= 0
    tau = 8 * (d + 2) * _EPS * (np.sum(np.abs(W), axis=1) + np.abs(biases) + 1.0)
    risky = np.abs(scores) <= tau[:, None]
    for t, g in zip(*np.nonzero(risky)):
        h = LinearThreshold.from_floats(W[t], biases[t])
        labels[t, g] = _exact_score_at_index(h, int(g)) >= 0
    return np.any(labels != target_labels[None, :], axis=1)


def estimate_failure(
    spec: LearnerSpec,
    target: LinearThreshold,
    dist: InputDistribution,
    n: int,
    trials: int,
    seed: Optional[int] = None,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> FailureEstimate:
    """Fraction of i.i.d. size-n datasets on which the learner misses target.

    Failure of a trial means exact_loss(fit, target) = 1 (checked by full
    enumeration) or a fit error.  The halfwidth is the 99% normal bound.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    d = target.dimension
    if d > min(enum_cap, 20):
        raise EnumerationCapError(f"failure scoring enumerates 2^d points; d={d}")
    rng = np.random.default_rng(seed)
    if isinstance(dist, UniformHypercube):
        if dist.d != d:
            raise ValueError("distribution dimension mismatch")
        idx = rng.integers(0, 1 << d, size=(trials, max(n, 1)), dtype=np.int64)
    else:
        probs = np.array([float(p) for p in dist.probabilities])
        probs = probs / probs.sum()
        chosen = rng.choice(len(dist.points), size=(trials, max(n, 1)), p=probs)
        point_idx = np.array([p.to_index() for p in dist.points], dtype=np.int64)
        idx = point_idx[chosen]
    if n == 0:
        idx = idx[:, :0]
    target_labels = _domain_labels_exact(target)
    shifts = np.arange(d - 1, -1, -1, dtype=np.int64)
    Xall = ((idx[..., None] >> shifts) & 1).astype(np.int64)  # (trials, n, d)
    Yall = target_labels[idx].astype(np.int64)  # exact labels at sampled points

    failures, errors = _dispatch_failures(spec, target, Xall, Yall, idx, target_labels, d, rng)
    phi = float(np.mean(failures))
    half = _Z99 * math.sqrt(max(phi * (1 - phi), 0.0) / trials)
    return FailureEstimate(phi, trials, half, n, errors)


def _dispatch_failures(spec, target, Xall, Yall, idx, target_labels, d, rng):
    trials, n = idx.shape
    errors = 0

    def init_state():
        if spec.param("init", "zero") == "zero":
            return np.zeros(d), 0.0
        state = rng.standard_normal(d + 1) * 0.1
        return state[:d], float(state[d])

    if spec.kind == "constant_zero":
        fails = bool(np.any(_domain_labels_exact(all_zero(d)) != target_labels))
        return np.full(trials, fails), 0
    if n == 0:
        raise ValueError(f"{spec.kind} needs non-empty data")
    if spec.kind == "bayes_like":
        f0_fail = bool(np.any(_domain_labels_exact(all_zero(d)) != target_labels))
        f1_fail = bool(np.any(_domain_labels_exact(origin_indicator(d)) != target_labels))
        origin_seen = np.any(idx == 0, axis=1)
        origin_label_one = bool(target_labels[0])
        picks_f1 = origin_seen & origin_label_one
        return np.where(picks_f1, f1_fail, f0_fail), 0
    if spec.kind == "perceptron":
        max_passes = spec.param("max_passes", 1000)
        W = np.empty((trials, d), dtype=np.int64)
        biases = np.empty(trials, dtype=np.int64)
        for t in range(trials):
            w, b, _ = kernels.perceptron_train(Xall[t], Yall[t], max_passes)
            W[t] = w
            biases[t] = b
        scores = W @ domain_bits(d).T + biases[:, None]  # exact int64
        labels = scores >= 0
        return np.any(labels != target_labels[None, :], axis=1), 0
    if spec.kind == "logistic_gd":
        lr = spec.param("step_size", 0.5)
        steps = spec.param("steps", 400)
        aggressive = spec.param("aggressive", False)
        W = np.empty((trials, d))
        biases = np.empty(trials)
        for t in range(trials):
            w0, b0 = init_state()
            w, b = kernels.logistic_gd(
                Xall[t].astype(np.float64), (2.0 * Yall[t] - 1.0).astype(np.float64),
                lr, steps, w0, b0, aggressive,
            )
            W[t] = w
            biases[t] = b
        return _batch_failures_float(W, biases, target_labels, d), 0
    if spec.kind == "logistic_flow":
        t_eval = np.array([spec.param("t_max", 100.0)])
        rtol = spec.param("rtol", 1e-7)
        atol = spec.param("atol", 1e-9)
        W = np.empty((trials, d))
        biases = np.empty(trials)
        for t in range(trials):
            Xa = np.hstack([Xall[t].astype(np.float64), np.ones((n, 1))])
            w0, b0 = init_state()
            states, status, _ = kernels.dp45_flow(
                Xa, (2.0 * Yall[t] - 1.0).astype(np.float64), t_eval, rtol, atol,
                np.concatenate([w0, [b0]]), 2_000_000,
            )
            if status != 0:
                raise RuntimeError(f"flow fit failed with status {status}")
            W[t] = states[-1][:-1]
            biases[t] = states[-1][-1]
        return _batch_failures_float(W, biases, target_labels, d), 0
    if spec.kind == "max_margin":
        from .maxmargin import NonSeparableError, SingleClassError, _fit_arrays

        tol = spec.param("tol", 1e-10)
        fails = np.zeros(trials, dtype=bool)
        W = np.zeros((trials, d))
        biases = np.zeros(trials)
        errored = np.zeros(trials, dtype=bool)
        for t in range(trials):
            try:
                sol = _fit_arrays(Xall[t], Yall[t], tol)
                W[t] = sol.weights
                biases[t] = sol.bias
            except (SingleClassError, NonSeparableError):
                errored[t] = True
        ok = ~errored
        if ok.any():
            fails[ok] = _batch_failures_float(W[ok], biases[ok], target_labels, d)
        fails[errored] = True
        return fails, int(errored.sum())
    raise AssertionError(f"unhandled kind {spec.kind}")
