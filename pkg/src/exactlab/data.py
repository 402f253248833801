"""Labeled examples and datasets over the binary cube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hypercube import BitVector, DimensionMismatchError


@dataclass(frozen=True)
class LabeledExample:
    x: BitVector
    y: int

    def __post_init__(self):
        if self.y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.y}")


@dataclass(frozen=True)
class LabeledDataset:
    """Ordered sequence of labeled points; repeats are allowed (i.i.d. draws)."""

    examples: tuple
    dimension: int

    def __post_init__(self):
        for ex in self.examples:
            if ex.x.dimension != self.dimension:
                raise DimensionMismatchError(
                    f"example dimension {ex.x.dimension} != dataset {self.dimension}"
                )

    @classmethod
    def from_pairs(cls, pairs, dimension=None) -> "LabeledDataset":
        examples = tuple(
            ex if isinstance(ex, LabeledExample) else LabeledExample(BitVector(tuple(ex[0])), int(ex[1]))
            for ex in pairs
        )
        if dimension is None:
            if not examples:
                raise ValueError("empty dataset needs an explicit dimension")
            dimension = examples[0].x.dimension
        return cls(examples, dimension)

    @classmethod
    def from_arrays(cls, X, y) -> "LabeledDataset":
        X = np.asarray(X)
        y = np.asarray(y)
        examples = tuple(
            LabeledExample(BitVector(tuple(int(v) for v in row)), int(lab))
            for row, lab in zip(X, y)
        )
        return cls(examples, X.shape[1])

    def as_arrays(self):
        X = np.array([ex.x.bits for ex in self.examples], dtype=np.int64).reshape(
            len(self.examples), self.dimension
        )
        y = np.array([ex.y for ex in self.examples], dtype=np.int64)
        return X, y

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)
