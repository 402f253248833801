"""Label-flip and coordinate-permutation actions on classifiers and data.

An action g = (permutation, flip) sends a point x to gx with
(gx)[perm[i]] = x[i] and a label y to 1-y when flip is set.  The induced
action on a hypothesis is (gh)(x) = flip(h(g^{-1} x)), so that labeled data
transforms consistently: if y = h(x) then the transformed label equals
(gh)(gx).

The complement of a threshold classifier is not itself a ">=0" threshold at
boundary points, so the flip action scales the classifier to integers and
returns (-2w, -2b-1): over integer scores s, not(s >= 0) == (-2s - 1 >= 0),
which makes the complement exact everywhere including ties.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence

from .data import LabeledDataset, LabeledExample
from .hypercube import BitVector, DimensionMismatchError, LinearThreshold, scaled_integer_form


class GroupSizeCapError(RuntimeError):
    """Group generation exceeded the exploration cap."""


@dataclass(frozen=True)
class SymmetryAction:
    """An element of the label-flip x coordinate-permutation group."""

    permutation: tuple
    label_flip: bool

    def __post_init__(self):
        perm = tuple(int(p) for p in self.permutation)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"not a permutation of 0..{len(perm)-1}: {perm}")
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "label_flip", bool(self.label_flip))

    @classmethod
    def identity(cls, d: int) -> "SymmetryAction":
        return cls(tuple(range(d)), False)

    @classmethod
    def flip(cls, d: int) -> "SymmetryAction":
        return cls(tuple(range(d)), True)

    @classmethod
    def from_permutation(cls, perm: Sequence[int], label_flip: bool = False):
        return cls(tuple(perm), label_flip)

    @property
    def dimension(self) -> int:
        return len(self.permutation)

    def is_identity(self) -> bool:
        return not self.label_flip and self.permutation == tuple(range(self.dimension))

    def compose(self, other: "SymmetryAction") -> "SymmetryAction":
        """self after other: (self.compose(other))(x) = self(other(x))."""
        if self.dimension != other.dimension:
            raise DimensionMismatchError("composing actions of different dimension")
        perm = tuple(self.permutation[other.permutation[i]] for i in range(self.dimension))
        return SymmetryAction(perm, self.label_flip ^ other.label_flip)

    def inverse(self) -> "SymmetryAction":
        inv = [0] * self.dimension
        for i, p in enumerate(self.permutation):
            inv[p] = i
        return SymmetryAction(tuple(inv), self.label_flip)

    def apply_point(self, x: BitVector) -> BitVector:
        if len(x) != self.dimension:
            raise DimensionMismatchError("point dimension mismatch")
        out = [0] * self.dimension
        for i, b in enumerate(x.bits):
            out[self.permutation[i]] = b
        return BitVector(tuple(out))

    def apply_label(self, y: int) -> int:
        return 1 - y if self.label_flip else y


def apply_action(g: SymmetryAction, h: LinearThreshold) -> LinearThreshold:
    """The transformed hypothesis gh with (gh)(x) = flip(h(g^{-1} x))."""
    if g.dimension != h.dimension:
        raise DimensionMismatchError("action/hypothesis dimension mismatch")
    new_w = [None] * h.dimension
    for i, w in enumerate(h.weights):
        new_w[g.permutation[i]] = w
    permuted = LinearThreshold(tuple(new_w), h.bias)
    if not g.label_flip:
        return permuted
    w_int, b_int, _ = scaled_integer_form(permuted)
    return LinearThreshold.from_ints([-2 * v for v in w_int], -2 * b_int - 1)


def apply_action_data(g: SymmetryAction, data: LabeledDataset) -> LabeledDataset:
    examples = tuple(
        LabeledExample(g.apply_point(ex.x), g.apply_label(ex.y)) for ex in data
    )
    return LabeledDataset(examples, data.dimension)


def block_swap(m: int, label_flip: bool = False) -> SymmetryAction:
    """Swap the LEFT and RIGHT halves of a 2m-bit comparison input."""
    perm = tuple(list(range(m, 2 * m)) + list(range(m)))
    return SymmetryAction(perm, label_flip)


def generate_group(
    generators: Iterable[SymmetryAction], cap: int = 100_000
) -> List[SymmetryAction]:
    """BFS closure of the generators (with inverses); raises above the cap.

    The returned list starts with the identity and is in deterministic BFS
    order given the generator order.
    """
    gens = list(generators)
    if not gens:
        raise ValueError("need at least one generator")
    d = gens[0].dimension
    closure = [SymmetryAction.identity(d)]
    seen = {(closure[0].permutation, closure[0].label_flip)}
    frontier = [closure[0]]
    gens_full = gens + [g.inverse() for g in gens]
    while frontier:
        nxt = []
        for elem in frontier:
            for g in gens_full:
                cand = g.compose(elem)
                key = (cand.permutation, cand.label_flip)
                if key not in seen:
                    if len(closure) >= cap:
                        raise GroupSizeCapError(
                            f"group exceeds exploration cap {cap}"
                        )
                    seen.add(key)
                    closure.append(cand)
                    nxt.append(cand)
        frontier = nxt
    return closure


def transposition_generators(d: int, label_flip: bool = True) -> List[SymmetryAction]:
    """Adjacent transpositions (generating all permutations), plus the label
    flip when requested: generators of the two built-in symmetry families."""
    gens = []
    for i in range(d - 1):
        perm = list(range(d))
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
        gens.append(SymmetryAction(tuple(perm), False))
    if label_flip:
        gens.append(SymmetryAction.flip(d))
    if not gens:
        gens.append(SymmetryAction.identity(d))
    return gens
