"""Hard-margin maximum-margin fitting and teaching-set construction.

The solver works on the difference formulation: collect the unique vectors
delta = x_plus - x_minus over all positive/negative pairs and solve

    min 1/2 ||w||^2   s.t.  <delta, w> >= 2  for every delta,

whose dual is box-constrained (lambda >= 0, no equality constraint) and is
solved by cyclic projected coordinate ascent (Hildreth's method) in a
compiled kernel.  The bias is recovered afterwards as the margin midpoint.
An active-set outer loop keeps the working constraint set small for
full-domain fits: solve on a subset, re-check every difference, pull in
violators, repeat until none remain.

Teaching sets follow the normal-cone argument: fit the fully labeled domain,
take the tight differences, read the conic coefficients off the dual vector,
reduce the support to at most d+1 atoms (conic Caratheodory), and emit the
underlying labeled points.  The construction certifies itself by refitting
and exhaustively comparing against the target; a certification failure is a
solver-tolerance bug and raises rather than passing silently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .hypercube import (
    DEFAULT_ENUM_CAP,
    EnumerationCapError,
    LinearThreshold,
    domain_bits,
    exact_loss,
)
from .data import LabeledDataset

DEFAULT_TOL = 1e-10
TIGHT_REL_TOL = 1e-6
NORM_CAP = 1e8
_SWEEP_CHUNK = 4000
_MAX_ROUNDS = 200
_ACTIVE_INIT = 2048
_ACTIVE_GROW = 512


class SingleClassError(ValueError):
    """Max-margin fitting needs both labels present."""


class NonSeparableError(RuntimeError):
    """Dual ascent diverged: the data admits no separating hyperplane."""


class SolverConvergenceError(RuntimeError):
    """Coordinate ascent ran out of budget before reaching tolerance."""


class CertificationError(RuntimeError):
    """A teaching set failed its exact refit check (solver tolerance bug)."""


@dataclass
class MarginSolution:
    """Solution of the difference-vector margin program.

    dual_coefficients maps indices of `differences` rows to the positive
    dual values; w equals the conic combination of those rows within
    kkt_residual.
    """

    weights: np.ndarray
    bias: float
    dual_coefficients: dict
    kkt_residual: float
    differences: np.ndarray
    pair_points: np.ndarray  # (K, 2, dim): representative (x+, x-) per difference
    sweeps: int

    def classifier(self) -> LinearThreshold:
        return LinearThreshold.from_floats(self.weights, self.bias)


def _solve_constraints(A: np.ndarray, tol: float, max_rounds: int = _MAX_ROUNDS):
    """min 1/2||w||^2 s.t. A w >= 2, via dual coordinate ascent.

    Returns (w, lam, residual, sweeps).  Raises NonSeparableError on dual
    divergence and SolverConvergenceError when the budget runs out.
    """
    K, dim = A.shape
    sq = np.einsum("ij,ij->i", A, A)
    if np.any(sq == 0.0):
        raise NonSeparableError("zero difference vector: same point in both classes")
    lam = np.zeros(K)
    w = np.zeros(dim)
    total_sweeps = 0
    history = []  # (residual, sum lam) per round, for stall detection
    for _ in range(max_rounds):
        viol, status, sweeps = kernels.qp_sweeps(
            A, sq, lam, w, tol, _SWEEP_CHUNK, NORM_CAP
        )
        total_sweeps += int(sweeps)
        if status == 2:
            raise NonSeparableError(
                f"dual ascent diverged (||w|| > {NORM_CAP:g}): data not separable"
            )
        # measure the true residual with a fresh w = A^T lam
        w = A.T @ lam
        margins = A @ w
        feas = np.maximum(0.0, 2.0 - margins)
        comp = np.where(lam > 0.0, np.abs(margins - 2.0), 0.0)
        residual = float(max(feas.max(initial=0.0), comp.max(initial=0.0)))
        if residual <= tol:
            return w, lam, residual, total_sweeps
        history.append((residual, float(lam.sum())))
        if len(history) >= 10:
            res_then, lam_then = history[-10]
            # multipliers marching off while feasibility is stuck means the
            # dual is unbounded: the primal has no separating solution
            if residual > 0.99 * res_then and history[-1][1] > lam_then * 1.01:
                raise NonSeparableError(
                    "dual multipliers grow without feasibility progress: "
                    "data not separable"
                )
    raise SolverConvergenceError(
        f"residual {residual:.3e} > tol {tol:.1e} after {total_sweeps} sweeps"
    )


def _unique_differences(P: np.ndarray, N: np.ndarray):
    """Deduped difference vectors with one representative (x+, x-) pair each."""
    p, dim = P.shape
    n = N.shape[0]
    deltas = (P[:, None, :] - N[None, :, :]).reshape(p * n, dim)
    uniq, first = np.unique(deltas, axis=0, return_index=True)
    pos_idx = first // n
    neg_idx = first % n
    pairs = np.stack([P[pos_idx], N[neg_idx]], axis=1)
    return uniq.astype(np.float64), pairs


def _fit_arrays(X: np.ndarray, y: np.ndarray, tol: float) -> MarginSolution:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    pos = X[y == 1]
    neg = X[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClassError("both labels are required for a margin fit")
    deltas, pairs = _unique_differences(pos, neg)
    K = deltas.shape[0]

    if K <= _ACTIVE_INIT:
        active = np.arange(K)
    else:
        # seed the working set with the shortest differences: the margin is
        # decided by close opposite-label pairs
        order = np.argsort(np.einsum("ij,ij->i", deltas, deltas), kind="stable")
        active = np.sort(order[:_ACTIVE_INIT])
    w = None
    lam_active = None
    for _ in range(_MAX_ROUNDS):
        w, lam_active, residual, sweeps = _solve_constraints(deltas[active], tol)
        margins = deltas @ w
        violated = np.flatnonzero(margins < 2.0 - tol)
        new = np.setdiff1d(violated, active, assume_unique=False)
        if new.size == 0:
            break
        worst = new[np.argsort(margins[new], kind="stable")[:_ACTIVE_GROW]]
        active = np.union1d(active, worst)
    else:
        raise SolverConvergenceError("active-set loop did not close")

    pos_scores = pos.astype(np.float64) @ w
    neg_scores = neg.astype(np.float64) @ w
    bias = -(pos_scores.min() + neg_scores.max()) / 2.0
    duals = {int(active[i]): float(lam_active[i]) for i in np.flatnonzero(lam_active > 0.0)}
    feas = np.maximum(0.0, 2.0 - (deltas @ w))
    comp = np.zeros(K)
    for k, v in duals.items():
        comp[k] = abs(float(deltas[k] @ w) - 2.0)
    kkt = float(max(feas.max(initial=0.0), comp.max(initial=0.0)))
    return MarginSolution(
        weights=w,
        bias=float(bias),
        dual_coefficients=duals,
        kkt_residual=kkt,
        differences=deltas,
        pair_points=pairs,
        sweeps=sweeps,
    )


def max_margin_fit(data: LabeledDataset, tol: float = DEFAULT_TOL) -> MarginSolution:
    """Maximum-margin separator of a labeled dataset (hard margin)."""
    X, y = data.as_arrays()
    return _fit_arrays(X, y, tol)


def max_margin_direction(X: np.ndarray, ypm: np.ndarray, tol: float = DEFAULT_TOL):
    """Homogeneous max-margin direction: min 1/2||v||^2 s.t. y <v, x> >= 1.

    Used as the reference limit direction for gradient flow on augmented
    inputs.  <2yx, v> >= 2 puts it in the same constraint form as the
    difference program, so the same solver core applies.
    """
    A = 2.0 * ypm[:, None] * np.asarray(X, dtype=np.float64)
    A = np.unique(A, axis=0)
    rows = {tuple(row) for row in A}
    if any(tuple(-row) in rows for row in A):
        raise NonSeparableError("a point carries both labels: no homogeneous separator")
    v, lam, residual, sweeps = _solve_constraints(A, tol)
    return v


def support_differences(
    solution: MarginSolution, tol: float = TIGHT_REL_TOL
) -> np.ndarray:
    """Indices of differences tight at the solution: <delta, w> = 2 within 2*tol."""
    margins = solution.differences @ solution.weights
    return np.flatnonzero(np.abs(margins - 2.0) <= 2.0 * tol)


class ConicCombination(NamedTuple):
    atoms: np.ndarray
    coefficients: np.ndarray
    indices: np.ndarray  # positions kept from the input atom list


def caratheodory_reduce(
    atoms: np.ndarray,
    coefficients: np.ndarray,
    target: np.ndarray,
    tol: float = 1e-8,
) -> ConicCombination:
    """Rewrite a conic combination to use at most dim+1 atoms.

    While more atoms than dim+1 carry positive weight, move the coefficient
    vector along a null-space direction of the active atoms until one
    coefficient hits zero; the combination's value never changes.
    """
    atoms = np.asarray(atoms, dtype=np.float64)
    coeffs = np.array(coefficients, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if atoms.ndim != 2 or atoms.shape[0] != coeffs.shape[0]:
        raise ValueError("atoms and coefficients must align")
    if np.any(coeffs < 0):
        raise ValueError("conic combination needs nonnegative coefficients")
    scale = max(1.0, float(np.abs(target).max(initial=0.0)))
    if np.max(np.abs(atoms.T @ coeffs - target), initial=0.0) > tol * scale:
        raise ValueError("input combination does not reproduce the target")
    dim = atoms.shape[1]
    while True:
        active = np.flatnonzero(coeffs > 0.0)
        if active.size <= dim + 1:
            break
        sub = atoms[active].T  # dim x k, k > dim+1 so a null vector exists
        _, _, vt = np.linalg.svd(sub, full_matrices=True)
        nu = vt[-1]
        if not np.any(nu > 1e-14):
            nu = -nu
        ratios = np.where(nu > 1e-14, coeffs[active] / np.where(nu > 1e-14, nu, 1.0), np.inf)
        j = int(np.argmin(ratios))
        t = ratios[j]
        coeffs[active] = coeffs[active] - t * nu
        coeffs[active[j]] = 0.0
        np.clip(coeffs, 0.0, None, out=coeffs)
    keep = np.flatnonzero(coeffs > 0.0)
    if np.max(np.abs(atoms[keep].T @ coeffs[keep] - target), initial=0.0) > tol * scale:
        raise ValueError("reduction drifted from the target combination")
    return ConicCombination(atoms[keep], coeffs[keep], keep)


@dataclass
class TeachingSet:
    """Dataset whose max-margin refit provably reproduces the target."""

    examples: LabeledDataset
    certified: bool
    difference_count: int
    reason: str = ""
    refit_weights: Optional[np.ndarray] = None
    full_weights: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return len(self.examples)


def teaching_set(
    target: LinearThreshold,
    tol: float = DEFAULT_TOL,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> TeachingSet:
    """Construct a certified teaching set of at most 2d+2 points for target.

    Fits the fully labeled cube, expresses the optimal weight vector as a
    conic combination of at most d+1 tight differences, and returns the
    underlying points.  Single-class targets get a degenerate, uncertified
    one-point set since the margin program is undefined for them.
    """
    d = target.dimension
    if d > min(enum_cap, 20):
        raise EnumerationCapError(f"teaching_set enumerates 2^d points; d={d} too big")
    B = domain_bits(d)
    labels = _labels_on_domain(target)
    if labels.min() == labels.max():
        ex = LabeledDataset.from_arrays(B[:1], labels[:1])
        return TeachingSet(
            examples=ex,
            certified=False,
            difference_count=0,
            reason="single_class_target",
        )
    full = _fit_arrays(B, labels, tol)
    support = np.array(sorted(full.dual_coefficients), dtype=np.int64)
    lam = np.array([full.dual_coefficients[int(k)] for k in support])
    reduced = caratheodory_reduce(
        full.differences[support], lam, full.weights, tol=1e-8
    )
    kept = support[reduced.indices]
    points = {}
    for k in kept:
        xp, xn = full.pair_points[int(k)]
        points[tuple(int(v) for v in xp)] = 1
        points[tuple(int(v) for v in xn)] = 0
    items = sorted(points.items())
    X = np.array([p for p, _ in items], dtype=np.int64)
    y = np.array([lab for _, lab in items], dtype=np.int64)
    examples = LabeledDataset.from_arrays(X, y)

    refit = _fit_arrays(X, y, tol)
    rel = np.linalg.norm(refit.weights - full.weights) / max(
        1e-30, np.linalg.norm(full.weights)
    )
    loss, witness = exact_loss(refit.classifier(), target, enum_cap=enum_cap)
    if loss != 0 or rel > 1e-6:
        raise CertificationError(
            f"teaching set failed certification: refit loss={loss}, "
            f"witness={witness}, relative weight error={rel:.3e}"
        )
    return TeachingSet(
        examples=examples,
        certified=True,
        difference_count=len(kept),
        refit_weights=refit.weights,
        full_weights=full.weights,
    )


def _labels_on_domain(h: LinearThreshold) -> np.ndarray:
    """Exact labels of h on every point of its cube, in index order."""
    from .hypercube import scaled_integer_form, _INT64_SAFE, _exact_score_at_index

    d = h.dimension
    w, b, bound = scaled_integer_form(h)
    B = domain_bits(d)
    if bound < _INT64_SAFE:
        scores = B @ np.array(w, dtype=np.int64) + np.int64(b)
        return (scores >= 0).astype(np.int64)
    wf, bf = h.float_arrays()
    scores = B.astype(np.float64) @ wf + bf
    labels = (scores >= 0).astype(np.int64)
    tau = 8 * (d + 2) * np.finfo(np.float64).eps * (np.sum(np.abs(wf)) + abs(bf) + 1.0)
    for g in np.flatnonzero(np.abs(scores) <= tau):
        labels[g] = 1 if _exact_score_at_index(h, int(g)) >= 0 else 0
    return labels
