"""Forward chaining, generators, rendering, tokenizer, verification."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exactlab.logic import (
    GeneratorConfig,
    LogicProblem,
    OutOfVocabularyError,
    ParseError,
    ReasoningTrace,
    Rule,
    SPECIAL_TOKENS,
    TraceStep,
    default_vocabulary,
    detokenize,
    forward_chain,
    generate_dataset,
    lp_generate,
    naive_fixed_point,
    parse,
    problem_to_record,
    read_dataset,
    record_to_problem,
    render,
    rp_generate,
    tokenize,
    verify_answer,
    verify_trace,
    write_dataset,
)

FIG_PROBLEM = LogicProblem(
    rules=(Rule(("frail", "wrong"), "impartial"), Rule(("frail",), "grumpy")),
    facts=("frail",),
    query="grumpy",
    label="yes",
)
FIG_TEXT = (
    "Rules: If frail and wrong then impartial . If frail then grumpy . "
    "Facts: frail . Query: grumpy ? Reasoning: Facts: frail . "
    "If frail then grumpy . Newfact: grumpy . Facts: frail , grumpy . "
    "Answer: yes"
)


def random_problems(count, seed, recipe="rp", config=GeneratorConfig()):
    gen = rp_generate if recipe == "rp" else lp_generate
    return [gen(config, seed=s) for s in np.random.SeedSequence(seed).spawn(count)]


# ---------------------------------------------------------------------------
# forward chaining
# ---------------------------------------------------------------------------

def test_fig_example_chain_and_trace():
    chain = forward_chain(FIG_PROBLEM)
    assert "grumpy" in chain.truth and chain.depth == 1
    assert chain.trace.terminal == "proved"
    assert [s.rule.head for s in chain.trace.steps] == ["grumpy"]


def test_query_in_facts_depth_zero():
    p = LogicProblem((), ("calm",), "calm", "yes")
    chain = forward_chain(p)
    assert chain.depth == 0 and chain.trace.terminal == "proved" and not chain.trace.steps


def test_unfirable_rule_exhausts_at_depth_zero():
    p = LogicProblem((Rule(("calm", "dark"), "mild"),), ("calm",), "mild", "no")
    chain = forward_chain(p)
    assert chain.depth == 0 and chain.trace.terminal == "exhausted"
    assert chain.truth == frozenset({"calm"})


def test_rule_validation():
    with pytest.raises(ValueError):
        Rule((), "calm")
    with pytest.raises(ValueError):
        Rule(("calm",), "calm")


def test_chain_agrees_with_naive_oracle():
    rng = np.random.default_rng(0)
    for problem, _ in random_problems(300, 1):
        chain = forward_chain(problem)
        order = rng.permutation(len(problem.rules))
        assert naive_fixed_point(problem, order=list(order)) == chain.truth
        assert ("yes" if problem.query in chain.truth else "no") == problem.label


def test_monotonicity_adding_facts_grows_truth():
    rng = np.random.default_rng(2)
    for problem, _ in random_problems(100, 3):
        base = forward_chain(problem).truth
        extra = [p for p in problem.pool if p not in problem.facts]
        if not extra:
            continue
        added = extra[int(rng.integers(len(extra)))]
        bigger = LogicProblem(
            problem.rules, problem.facts + (added,), problem.query,
            "yes" if added == problem.query or problem.label == "yes" else problem.label,
            problem.pool, None,
        )
        grown = forward_chain(bigger).truth
        assert base <= grown


# ---------------------------------------------------------------------------
# generation statistics
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("recipe", ["rp", "lp"])
def test_generator_respects_config_ranges(recipe):
    out = random_problems(400, 11, recipe=recipe)
    for problem, trace in out:
        assert 5 <= len(problem.pool) <= 20
        assert len(problem.rules) <= 40
        assert 0 <= problem.depth <= 6
        assert all(1 <= len(r.body) <= 3 for r in problem.rules)
        assert problem.query in problem.pool
        assert set(problem.facts) <= set(problem.pool)
        assert verify_trace(problem, trace).accepted


def test_generator_determinism():
    a = rp_generate(GeneratorConfig(), seed=99)
    b = rp_generate(GeneratorConfig(), seed=99)
    assert a == b
    c = lp_generate(GeneratorConfig(), seed=99)
    d = lp_generate(GeneratorConfig(), seed=99)
    assert c == d


def test_rules_zero_config_label_is_fact_membership():
    config = GeneratorConfig(rule_count_range=(0, 0))
    for problem, _ in random_problems(100, 7, config=config):
        assert not problem.rules
        assert (problem.label == "yes") == (problem.query in problem.facts)
        assert problem.depth == 0


def test_lp_truth_stays_inside_intended_true():
    """Chained truth never escapes the facts' upward closure by consistent
    rules; spot-check the construction invariant on the final problems."""
    for problem, _ in random_problems(300, 13, recipe="lp"):
        chain = forward_chain(problem)
        assert set(problem.facts) <= chain.truth


def test_depth_matches_level_of_query():
    for problem, _ in random_problems(200, 17):
        chain = forward_chain(problem)
        assert chain.depth == problem.depth
        if problem.label == "yes":
            assert chain.levels[problem.query] == problem.depth
        else:
            assert chain.rounds == problem.depth


# ---------------------------------------------------------------------------
# rendering, parsing, tokenizing
# ---------------------------------------------------------------------------

def test_fig_surface_form_is_exact():
    trace = forward_chain(FIG_PROBLEM).trace
    assert render(FIG_PROBLEM, trace, style="with_reasoning") == FIG_TEXT


def test_fig_text_tokenizes_without_oov():
    ids = tokenize(FIG_TEXT)
    assert detokenize(ids) == FIG_TEXT


def test_vocabulary_is_bijective():
    vocab = default_vocabulary()
    assert len(vocab) == 150 + len(SPECIAL_TOKENS) == 167
    assert len({vocab.token_to_id[t] for t in vocab.tokens}) == len(vocab)
    two = tokenize("Answer: yes")
    assert len(two) == 2 and detokenize(two) == "Answer: yes"


def test_tokenize_rejects_oov():
    with pytest.raises(OutOfVocabularyError) as err:
        tokenize("Answer: maybe")
    assert err.value.position == 1


def test_parse_reports_position_and_reason():
    with pytest.raises(ParseError) as err:
        parse("Rules: Facts: frail . Query: frail . Answer: yes")
    assert err.value.position == 6  # the '.' where '?' belongs


def test_round_trips_on_generated_problems():
    for recipe in ("rp", "lp"):
        for problem, trace in random_problems(250, 19, recipe=recipe):
            for style, tr in (("direct", None), ("with_reasoning", trace)):
                text = render(problem, tr, style=style)
                p2, t2 = parse(text)
                assert p2.content_key() == problem.content_key()
                if style == "with_reasoning":
                    assert t2 == trace
                assert render(p2, t2, style=style) == text
                assert detokenize(tokenize(text)) == text


def test_exhausted_trace_renders_marker_before_answer():
    p = LogicProblem((Rule(("calm", "dark"), "mild"),), ("calm",), "mild", "no")
    trace = forward_chain(p).trace
    text = render(p, trace, style="with_reasoning")
    assert "No_other_facts_can_be_proven . Answer: no" in text
    p2, t2 = parse(text)
    assert t2.terminal == "exhausted"
    assert verify_trace(p2, t2).accepted


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_round_trip_property(seed):
    problem, trace = rp_generate(GeneratorConfig(retry_cap=50), seed=seed)
    text = render(problem, trace, style="with_reasoning")
    p2, t2 = parse(text)
    assert p2.content_key() == problem.content_key()
    assert t2 == trace


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def test_oracle_traces_verify():
    for problem, trace in random_problems(300, 23):
        assert verify_trace(problem, trace).accepted
        assert verify_answer(problem, problem.label)
        assert not verify_answer(problem, "yes" if problem.label == "no" else "no")


def mutate_trace(trace, problem, rng):
    """Break one structural property of a valid trace; None if impossible."""
    kind = rng.integers(0, 4)
    if kind == 0 and trace.steps:
        # fire a rule whose body is not satisfied (reuse a later step early)
        if len(trace.steps) >= 2:
            steps = (trace.steps[1],) + trace.steps[1:]
            return ReasoningTrace(trace.initial_facts, steps, trace.terminal, trace.final_facts)
        return None
    if kind == 1 and trace.steps:
        # claim a different new fact than the fired rule's head
        s0 = trace.steps[0]
        other = next((p for p in problem.pool if p != s0.rule.head), None)
        if other is None:
            return None
        steps = (TraceStep(s0.rule, other, s0.facts_before),) + trace.steps[1:]
        return ReasoningTrace(trace.initial_facts, steps, trace.terminal, trace.final_facts)
    if kind == 2:
        # drop an initial fact from the opening snapshot
        if not trace.initial_facts:
            return None
        return ReasoningTrace(trace.initial_facts[1:], trace.steps, trace.terminal,
                              trace.final_facts)
    # flip the terminal marker
    flipped = "proved" if trace.terminal == "exhausted" else "exhausted"
    return ReasoningTrace(trace.initial_facts, trace.steps, flipped, trace.final_facts)


def test_mutated_traces_are_rejected():
    rng = np.random.default_rng(29)
    rejected = checked = 0
    for problem, trace in random_problems(300, 29):
        mutant = mutate_trace(trace, problem, rng)
        if mutant is None or mutant == trace:
            continue
        checked += 1
        rejected += not verify_trace(problem, mutant).accepted
    assert checked > 200
    assert rejected == checked


def test_answer_and_trace_verdicts_are_independent():
    # correct answer, fabricated trace step: answer accepted, trace rejected
    problem, trace = next(
        (p, t) for p, t in random_problems(50, 31) if len(t.steps) >= 2
    )
    mutant = ReasoningTrace(
        trace.initial_facts, (trace.steps[1],) + trace.steps[1:], trace.terminal,
        trace.final_facts,
    )
    assert verify_answer(problem, problem.label)
    assert not verify_trace(problem, mutant).accepted


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------

def test_dataset_file_round_trip(tmp_path):
    config = GeneratorConfig(retry_cap=100)
    items = generate_dataset("rp", 40, config, master_seed=5)
    path = tmp_path / "data.jsonl"
    write_dataset(path, items, "rp", config, 5)
    manifest, loaded = read_dataset(path)
    assert manifest["count"] == 40 and manifest["recipe"] == "rp"
    assert len(loaded) == 40
    for (p1, t1), (p2, t2) in zip(items, loaded):
        assert p1 == p2 and t1 == t2


def test_record_round_trip():
    problem, trace = rp_generate(GeneratorConfig(), seed=77)
    rec = problem_to_record(problem, trace, 3)
    p2, t2 = record_to_problem(rec)
    assert p2 == problem and t2 == trace
    assert rec["text"] == render(problem, trace, style="with_reasoning")
