"""Exact-learning laboratory.

Disagreement-based critical sample sizes, provably sufficient teaching sets
for max-margin classifiers, gradient-flow dynamics on hypercube comparison
tasks, and propositional-logic reasoning data with forward-chaining traces.
"""

from .backend import BACKEND, NUMBA_ENABLED
from .data import LabeledDataset, LabeledExample
from .hypercube import (
    BitVector,
    LinearThreshold,
    NamedHypothesis,
    all_zero,
    evaluate,
    exact_loss,
    geq_compare,
    gt_compare,
    left_value,
    origin_indicator,
    right_value,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "NUMBA_ENABLED",
    "BitVector",
    "LinearThreshold",
    "NamedHypothesis",
    "LabeledDataset",
    "LabeledExample",
    "all_zero",
    "evaluate",
    "exact_loss",
    "geq_compare",
    "gt_compare",
    "left_value",
    "origin_indicator",
    "right_value",
    "__version__",
]
