"""Disagreement probabilities, critical sizes, group actions."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exactlab.data import LabeledDataset
from exactlab.disagreement import (
    UNBOUNDED,
    FiniteSupport,
    UniformHypercube,
    critical_sample_size,
    disagreement_prob,
    failure_lower_bound,
    orbit_critical_sample_size,
)
from exactlab.hypercube import (
    BitVector,
    LinearThreshold,
    all_zero,
    enumerate_domain,
    exact_loss,
    geq_compare,
    gt_compare,
    left_value,
    origin_indicator,
    right_value,
)
from exactlab.symmetry import (
    SymmetryAction,
    apply_action,
    apply_action_data,
    block_swap,
    generate_group,
    transposition_generators,
)


def random_classifier(rng, d):
    return LinearThreshold.from_ints(rng.integers(-5, 6, size=d), int(rng.integers(-4, 5)))


# ---------------------------------------------------------------------------
# disagreement_prob
# ---------------------------------------------------------------------------

def test_exact_values():
    for m in range(1, 8):
        rep = disagreement_prob(geq_compare(m), gt_compare(m), UniformHypercube(2 * m))
        assert rep.probability == Fraction(1, 2**m)
        assert rep.method == "exact" and rep.confidence_halfwidth == 0.0
    rep = disagreement_prob(geq_compare(2), geq_compare(2), UniformHypercube(4))
    assert rep.probability == 0
    rep = disagreement_prob(all_zero(4), origin_indicator(4), UniformHypercube(4))
    assert rep.probability == Fraction(1, 16)


def test_finite_support_exact():
    points = (BitVector((0, 0)), BitVector((1, 1)))
    dist = FiniteSupport(points, (Fraction(1, 4), Fraction(3, 4)))
    rep = disagreement_prob(geq_compare(1), gt_compare(1), dist)
    # both support points sit on the diagonal where the two classifiers differ
    assert rep.probability == 1


def test_monte_carlo_matches_exact_within_halfwidth():
    """99% intervals should cover the exact value almost always."""
    rng = np.random.default_rng(7)
    covered = 0
    total = 200
    for i in range(total):
        d = int(rng.integers(2, 11))
        h1, h2 = random_classifier(rng, d), random_classifier(rng, d)
        dist = UniformHypercube(d)
        exact = disagreement_prob(h1, h2, dist).probability
        mc = disagreement_prob(h1, h2, dist, mode="monte_carlo", samples=4000, seed=int(rng.integers(2**32)))
        if abs(mc.probability - float(exact)) <= max(mc.confidence_halfwidth, 1e-9):
            covered += 1
    assert covered >= int(0.95 * total), covered


def test_pseudometric_on_random_triples():
    rng = np.random.default_rng(11)
    for _ in range(40):
        d = int(rng.integers(1, 11))
        dist = UniformHypercube(d)
        a, b, c = (random_classifier(rng, d) for _ in range(3))
        dab = disagreement_prob(a, b, dist).probability
        dbc = disagreement_prob(b, c, dist).probability
        dac = disagreement_prob(a, c, dist).probability
        assert dab == disagreement_prob(b, a, dist).probability
        assert disagreement_prob(a, a, dist).probability == 0
        assert dac <= dab + dbc


# ---------------------------------------------------------------------------
# critical sample sizes and the failure bound
# ---------------------------------------------------------------------------

def test_critical_sample_size_examples():
    assert critical_sample_size([Fraction(1, 32)]) == 16
    assert critical_sample_size([1]) == 0
    assert critical_sample_size([Fraction(1, 8)]) == 4
    assert critical_sample_size([0.5, 0.0]) == UNBOUNDED
    with pytest.raises(ValueError):
        critical_sample_size([])
    with pytest.raises(ValueError):
        critical_sample_size([1.5])


def test_failure_lower_bound_examples():
    assert failure_lower_bound(0, 0.3).power == 0.5
    b = failure_lower_bound(4, 1 - 2**-3)
    assert b.power == pytest.approx((7 / 8) ** 4 / 2, abs=1e-15)
    assert failure_lower_bound(5, 0.0).power == 0.0
    # the power bound dominates its linearization
    for n in range(0, 9):
        for agree in (0.1, 0.5, 0.875, 0.99):
            fb = failure_lower_bound(n, agree)
            assert fb.power >= fb.linear - 1e-15


# ---------------------------------------------------------------------------
# symmetry actions
# ---------------------------------------------------------------------------

def test_identity_action_fixes_hypotheses():
    h = geq_compare(2)
    assert apply_action(SymmetryAction.identity(4), h) == h


def test_label_flip_of_all_zero_is_constant_one():
    flipped = apply_action(SymmetryAction.flip(3), all_zero(3))
    assert all(flipped.evaluate(x) == 1 for x in enumerate_domain(3))


def test_flip_complements_everywhere_including_boundaries():
    rng = np.random.default_rng(23)
    for _ in range(20):
        d = int(rng.integers(1, 8))
        h = random_classifier(rng, d)
        hc = apply_action(SymmetryAction.flip(d), h)
        for x in enumerate_domain(d):
            assert hc.evaluate(x) == 1 - h.evaluate(x)


def test_block_swap_with_flip_turns_geq_into_gt():
    for m in (1, 2, 3):
        gh = apply_action(block_swap(m, label_flip=True), geq_compare(m))
        assert exact_loss(gh, gt_compare(m)).loss == 0


def test_swap_disagreement_matches_bruteforce():
    gh = apply_action(block_swap(2), geq_compare(2))
    rep = disagreement_prob(geq_compare(2), gh, UniformHypercube(4))
    gt_count = sum(1 for x in enumerate_domain(4) if left_value(x, 2) > right_value(x, 2))
    assert rep.probability == Fraction(2 * gt_count, 16)


@st.composite
def actions(draw, d=5):
    perm = tuple(draw(st.permutations(range(d))))
    flip = draw(st.booleans())
    return SymmetryAction(perm, flip)


@given(actions(), actions(), actions())
@settings(max_examples=80, deadline=None)
def test_group_axioms(g1, g2, g3):
    ident = SymmetryAction.identity(5)
    assert g1.compose(ident) == ident.compose(g1) == g1
    assert g1.compose(g1.inverse()).permutation == ident.permutation
    assert g1.compose(g1.inverse()).label_flip is False
    left = g1.compose(g2).compose(g3)
    right = g1.compose(g2.compose(g3))
    assert left == right


@given(actions(d=4), st.integers(0, 15))
@settings(max_examples=60, deadline=None)
def test_action_on_points_is_consistent_with_inverse(g, idx):
    x = BitVector.from_index(idx, 4)
    assert g.inverse().apply_point(g.apply_point(x)) == x


def test_hypothesis_action_matches_pointwise_definition():
    # (gh)(gx) == flip(h(x)) for random h, g, x
    rng = np.random.default_rng(5)
    for _ in range(30):
        d = int(rng.integers(1, 7))
        h = random_classifier(rng, d)
        perm = tuple(rng.permutation(d))
        g = SymmetryAction(perm, bool(rng.integers(0, 2)))
        gh = apply_action(g, h)
        for x in enumerate_domain(d):
            assert gh.evaluate(g.apply_point(x)) == g.apply_label(h.evaluate(x))


def test_action_on_data_matches_action_on_hypothesis():
    rng = np.random.default_rng(6)
    d = 5
    h = random_classifier(rng, d)
    X = rng.integers(0, 2, size=(12, d))
    data = LabeledDataset.from_arrays(X, [h.evaluate(BitVector(tuple(row))) for row in X])
    g = SymmetryAction(tuple(rng.permutation(d)), True)
    gdata = apply_action_data(g, data)
    gh = apply_action(g, h)
    for ex in gdata:
        assert gh.evaluate(ex.x) == ex.y


def test_action_preserves_uniform_disagreement():
    rng = np.random.default_rng(8)
    d = 6
    dist = UniformHypercube(d)
    for _ in range(10):
        h1, h2 = random_classifier(rng, d), random_classifier(rng, d)
        g = SymmetryAction(tuple(rng.permutation(d)), bool(rng.integers(0, 2)))
        p = disagreement_prob(h1, h2, dist).probability
        pg = disagreement_prob(apply_action(g, h1), apply_action(g, h2), dist).probability
        assert p == pg


# ---------------------------------------------------------------------------
# orbit bounds
# ---------------------------------------------------------------------------

def test_orbit_bound_comparison_m2():
    ob = orbit_critical_sample_size(
        geq_compare(2), transposition_generators(4), UniformHypercube(4)
    )
    assert ob.complete and ob.group_size == 2 * math.factorial(4)
    # an in-block transposition realizes disagreement 1/8, beating the
    # flip-plus-block-swap element's 1/4; the bound is 4 = 2^{d/2}
    assert ob.min_disagreement == Fraction(1, 8)
    assert ob.n_critical == 4
    assert ob.n_critical >= critical_sample_size([Fraction(1, 4)])


def test_orbit_bound_no_moving_element():
    gens = transposition_generators(3, label_flip=False)
    ob = orbit_critical_sample_size(origin_indicator(3), gens, UniformHypercube(3))
    assert ob.n_critical is None and ob.witness is None
    assert ob.group_size == math.factorial(3)


def test_orbit_identity_only_group():
    gens = [SymmetryAction.identity(3)]
    ob = orbit_critical_sample_size(geq_compare(1) if False else origin_indicator(3), gens, UniformHypercube(3))
    assert ob.n_critical is None and ob.group_size == 1


def test_orbit_cap_and_partial_mode():
    from exactlab.symmetry import GroupSizeCapError

    gens = transposition_generators(6)
    with pytest.raises(GroupSizeCapError):
        orbit_critical_sample_size(geq_compare(3), gens, UniformHypercube(6), cap=100)
    ob = orbit_critical_sample_size(
        geq_compare(3), gens, UniformHypercube(6), cap=100, allow_partial=True
    )
    assert not ob.complete and ob.group_size == 100
    full = orbit_critical_sample_size(geq_compare(3), gens, UniformHypercube(6), cap=2000)
    assert full.complete
    # the truncated bound is a weaker, still-valid lower bound
    if ob.n_critical is not None:
        assert ob.n_critical <= full.n_critical


def test_generate_group_closure_size():
    gens = transposition_generators(4, label_flip=False)
    assert len(generate_group(gens)) == math.factorial(4)
    gens = transposition_generators(4, label_flip=True)
    assert len(generate_group(gens)) == 2 * math.factorial(4)
