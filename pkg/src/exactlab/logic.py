"""Propositional logic problems with forward-chaining reasoning traces.

A problem is a set of definite clauses ("If p and q then r ."), a set of
facts, and a query predicate; the label is yes iff the query belongs to the
least model of the rules over the facts.  Traces record one rule firing per
step, in listed-rule order, until the query is proven or nothing more fires
(the exhausted marker token closes the trace).

Two generation recipes are provided.  Rule-priority (rp) samples facts and
rules first and reads truth values off the forward-chaining fixed point.
Label-priority (lp) first assigns intended truth values to the predicate
pool, then samples facts from the intended-true set and rules consistent
with the assignment (no rule may have an all-intended-true body and an
intended-false head); the final label is still recomputed by chaining.
Query selection balances labels with a fair coin, and a per-problem target
depth with rejection keeps every chaining depth represented in a dataset.

The token surface mirrors the canonical example:

    Rules: If wrong and frail then impartial . If frail then grumpy .
    Facts: frail . Query: grumpy ? Reasoning: Facts: frail .
    If frail then grumpy . Newfact: grumpy . Facts: frail , grumpy .
    Answer: yes

render/parse and tokenize/detokenize are exact inverses on this surface.
"""

from __future__ import annotations

import json
import random as _pyrandom
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

SPECIAL_TOKENS = (
    "Facts:",
    "Rules:",
    "Query:",
    "Answer:",
    "Reasoning:",
    "Newfact:",
    "yes",
    "no",
    "and",
    "Is",
    "Since",
    "If",
    "then",
    "?",
    ".",
    ",",
    "No_other_facts_can_be_proven",
)

# 150 zeroth-order predicate words (common adjectives, in the style of the
# canonical example's wrong/frail/impartial/grumpy)
PREDICATES = (
    "wrong", "frail", "impartial", "grumpy", "happy", "brave", "calm", "eager", "gentle", "proud",
    "quiet", "sharp", "tall", "short", "bright", "dark", "clever", "dull", "fierce", "kind",
    "lazy", "loyal", "mild", "neat", "noble", "plain", "quick", "rough", "smooth", "strong",
    "weak", "wise", "young", "old", "bold", "shy", "warm", "cold", "clean", "dirty",
    "sweet", "sour", "bitter", "fresh", "stale", "rich", "poor", "thick", "thin", "wide",
    "narrow", "deep", "shallow", "heavy", "light", "loud", "silent", "swift", "slow", "hard",
    "soft", "tough", "tender", "grand", "humble", "vivid", "pale", "crisp", "damp", "dry",
    "wet", "hollow", "solid", "rigid", "limp", "tidy", "messy", "polite", "rude", "honest",
    "sly", "greedy", "generous", "cheerful", "gloomy", "anxious", "serene", "clumsy", "graceful", "curious",
    "timid", "daring", "cautious", "fond", "wary", "merry", "stern", "witty", "solemn", "lively",
    "weary", "alert", "drowsy", "steady", "shaky", "sturdy", "flimsy", "glossy", "dusty", "shiny",
    "murky", "spry", "stiff", "supple", "brisk", "sluggish", "keen", "blunt", "subtle", "blatant",
    "modest", "vain", "patient", "restless", "faithful", "fickle", "earnest", "flippant", "sincere", "devious",
    "candid", "secretive", "upbeat", "sullen", "jolly", "crabby", "mellow", "tense", "placid", "agitated",
    "hearty", "feeble", "nimble", "awkward", "fancy", "simple", "smug", "meek", "stubborn", "gracious",
)

assert len(PREDICATES) == 150 and len(set(PREDICATES)) == 150
assert not set(PREDICATES) & set(SPECIAL_TOKENS)


class OutOfVocabularyError(ValueError):
    def __init__(self, word, position):
        self.word = word
        self.position = position
        super().__init__(f"unknown token {word!r} at position {position}")


class ParseError(ValueError):
    def __init__(self, position, reason):
        self.position = position
        self.reason = reason
        super().__init__(f"parse error at token {position}: {reason}")


class GenerationError(RuntimeError):
    """Retry budget exhausted without a problem matching the target label."""


class Vocabulary:
    """Bijective word <-> id map over specials + predicates."""

    def __init__(self, predicates: Sequence[str] = PREDICATES):
        predicates = tuple(predicates)
        if len(set(predicates)) != len(predicates):
            raise ValueError("duplicate predicates")
        if set(predicates) & set(SPECIAL_TOKENS):
            raise ValueError("predicates collide with special tokens")
        self.predicates = predicates
        self.tokens = SPECIAL_TOKENS + predicates
        self.token_to_id = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def tokenize(self, text: str) -> List[int]:
        ids = []
        for pos, word in enumerate(text.split()):
            tid = self.token_to_id.get(word)
            if tid is None:
                raise OutOfVocabularyError(word, pos)
            ids.append(tid)
        return ids

    def detokenize(self, ids: Sequence[int]) -> str:
        return " ".join(self.tokens[i] for i in ids)


_DEFAULT_VOCAB = Vocabulary()


def default_vocabulary() -> Vocabulary:
    return _DEFAULT_VOCAB


def tokenize(text: str) -> List[int]:
    return _DEFAULT_VOCAB.tokenize(text)


def detokenize(ids: Sequence[int]) -> str:
    return _DEFAULT_VOCAB.detokenize(ids)


@dataclass(frozen=True)
class Rule:
    """Definite clause: body predicates jointly imply the head."""

    body: tuple
    head: str

    def __post_init__(self):
        body = tuple(self.body)
        if not body:
            raise ValueError("rule body must be non-empty")
        if len(set(body)) != len(body):
            raise ValueError("duplicate predicate in body")
        if self.head in body:
            raise ValueError("head may not appear in its own body")
        object.__setattr__(self, "body", tuple(sorted(body)))


@dataclass(frozen=True)
class TraceStep:
    rule: Rule
    new_fact: str
    facts_before: tuple


@dataclass(frozen=True)
class ReasoningTrace:
    initial_facts: tuple
    steps: tuple
    terminal: str  # "proved" | "exhausted"
    final_facts: tuple


@dataclass(frozen=True)
class LogicProblem:
    rules: tuple
    facts: tuple
    query: str
    label: str  # "yes" | "no"
    pool: Optional[tuple] = None
    depth: Optional[int] = None

    def __post_init__(self):
        if self.label not in ("yes", "no"):
            raise ValueError("label must be yes or no")
        if len(set(self.facts)) != len(self.facts):
            raise ValueError("duplicate facts")

    def content_key(self):
        """The part of the problem visible in the token surface."""
        return (self.rules, self.facts, self.query, self.label)


@dataclass(frozen=True)
class ChainResult:
    truth: frozenset
    levels: dict  # predicate -> round at which it became true
    rounds: int  # productive rounds until the fixed point
    depth: int  # rounds until the query's status was decided
    trace: ReasoningTrace


def forward_chain(problem: LogicProblem) -> ChainResult:
    """Least model, per-predicate derivation rounds, and a canonical trace.

    Truth values come from simultaneous rounds (every applicable rule fires
    per round); the trace fires one rule at a time, always the first
    applicable one in listed order, stopping at the proof of the query or at
    exhaustion.  The fixed point is order-independent, so both views agree
    on the label.
    """
    for rule in problem.rules:
        if not rule.body:
            raise ValueError("malformed rule: empty body")
    levels = {p: 0 for p in problem.facts}
    truth = set(problem.facts)
    rounds = 0
    while True:
        new = set()
        for rule in problem.rules:
            if rule.head not in truth and all(b in truth for b in rule.body):
                new.add(rule.head)
        if not new:
            break
        rounds += 1
        for p in new:
            levels[p] = rounds
        truth |= new
    if problem.query in truth:
        depth = levels[problem.query]
    else:
        depth = rounds

    facts_list = list(problem.facts)
    facts_set = set(facts_list)
    steps = []
    terminal = "exhausted"
    if problem.query in facts_set:
        terminal = "proved"
    else:
        while True:
            fired = None
            for rule in problem.rules:
                if rule.head not in facts_set and all(b in facts_set for b in rule.body):
                    fired = rule
                    break
            if fired is None:
                terminal = "exhausted"
                break
            steps.append(TraceStep(fired, fired.head, tuple(facts_list)))
            facts_list.append(fired.head)
            facts_set.add(fired.head)
            if fired.head == problem.query:
                terminal = "proved"
                break
    trace = ReasoningTrace(
        initial_facts=tuple(problem.facts),
        steps=tuple(steps),
        terminal=terminal,
        final_facts=tuple(facts_list),
    )
    return ChainResult(frozenset(truth), levels, rounds, depth, trace)


def naive_fixed_point(problem: LogicProblem, order: Optional[Sequence[int]] = None) -> frozenset:
    """Independent oracle: fire one rule at a time in an arbitrary fixed
    order until nothing changes."""
    rules = list(problem.rules)
    if order is not None:
        rules = [rules[i] for i in order]
    truth = set(problem.facts)
    changed = True
    while changed:
        changed = False
        for rule in rules:
            if rule.head not in truth and all(b in truth for b in rule.body):
                truth.add(rule.head)
                changed = True
    return frozenset(truth)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    predicate_pool_range: tuple = (5, 20)
    rule_count_range: tuple = (0, 40)
    body_size_choices: tuple = (1, 2, 3)
    max_depth: int = 6
    retry_cap: int = 500
    yes_probability: float = 0.5

    def __post_init__(self):
        lo, hi = self.predicate_pool_range
        if not (2 <= lo <= hi <= len(PREDICATES)):
            raise ValueError("bad predicate pool range")
        rlo, rhi = self.rule_count_range
        if not (0 <= rlo <= rhi):
            raise ValueError("bad rule count range")
        if self.max_depth < 0 or self.retry_cap < 1:
            raise ValueError("bad max_depth or retry_cap")


def _chain_masks(facts_mask: int, rules):
    """Fixed point over bitmasks: (truth_mask, {bit: round}, rounds)."""
    truth = facts_mask
    rounds = 0
    level_of = {}
    while True:
        new = 0
        for bm, hb in rules:
            if (bm & ~truth) == 0 and not (truth >> hb) & 1:
                new |= 1 << hb
        new &= ~truth
        if not new:
            break
        rounds += 1
        truth |= new
        m = new
        while m:
            b = (m & -m).bit_length() - 1
            level_of[b] = rounds
            m &= m - 1
    return truth, level_of, rounds


def _sample_distinct(rnd, upper: int, size: int):
    """size distinct ints from range(upper), tiny-size rejection sampling."""
    if size >= upper:
        return list(range(upper))
    out = []
    while len(out) < size:
        v = rnd.randrange(upper)
        if v not in out:
            out.append(v)
    return out


def _sample_attempt(rnd, recipe, config, target_depth):
    """One structural draw as index bitmasks.

    Deep target depths bias the draw (within the configured ranges) toward
    few facts and many rules, and for lp toward a larger intended-true set;
    that keeps rejection sampling for depth coverage affordable.
    """
    lo, hi = config.predicate_pool_range
    rlo, rhi = config.rule_count_range
    P = rnd.randint(lo, hi)
    deep = target_depth >= 2
    if recipe == "lp":
        p_true = min(0.9, 0.5 + 0.06 * target_depth) if deep else 0.5
        true_mask = 0
        for i in range(P):
            if rnd.random() < p_true:
                true_mask |= 1 << i
        trues = [i for i in range(P) if (true_mask >> i) & 1]
    else:
        true_mask = None
        trues = None
    # facts
    if recipe == "lp":
        if not trues:
            facts = []
        else:
            cap = 2 if deep else min(len(trues), max(1, P // 3))
            cap = min(cap, len(trues))
            facts = sorted(rnd.sample(trues, rnd.randint(1, cap)))
    else:
        cap = 2 if deep else max(1, P // 3)
        facts = sorted(_sample_distinct(rnd, P, rnd.randint(1, min(cap, P))))
    facts_mask = 0
    for f in facts:
        facts_mask |= 1 << f
    # rules
    floor = max(rlo, min(rhi, 8 + 4 * target_depth)) if deep else rlo
    rules_n = rnd.randint(floor, rhi)
    sizes = tuple(config.body_size_choices)
    rules = []
    seen = set()
    tries = 0
    while len(rules) < rules_n and tries < rules_n * 8 + 20:
        tries += 1
        size = min(sizes[rnd.randrange(len(sizes))], P - 1)
        if size < 1:
            break
        bm = 0
        for b in _sample_distinct(rnd, P, size):
            bm |= 1 << b
        hb = rnd.randrange(P)
        if (bm >> hb) & 1:
            continue
        if true_mask is not None and (bm & ~true_mask) == 0 and not (true_mask >> hb) & 1:
            continue  # lp consistency: all-intended-true body, false head
        key = (bm, hb)
        if key in seen:
            continue
        seen.add(key)
        rules.append((bm, hb))
    return P, facts_mask, rules


def _generate(recipe: str, config: GeneratorConfig, seed) -> Tuple[LogicProblem, ReasoningTrace]:
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    state = ss.generate_state(2)
    rnd = _pyrandom.Random((int(state[0]) << 32) | int(state[1]))
    want_yes = rnd.random() < config.yes_probability
    target_depth = rnd.randint(0, config.max_depth)
    best = None  # (gap, P, facts_mask, rules, query_bit, depth)
    for _ in range(config.retry_cap):
        P, facts_mask, rules = _sample_attempt(rnd, recipe, config, target_depth)
        truth, levels, rounds = _chain_masks(facts_mask, rules)
        for b in range(P):
            if (facts_mask >> b) & 1:
                levels[b] = 0
        if want_yes:
            candidates = [b for b, l in levels.items() if l == target_depth]
            if candidates:
                qb = candidates[rnd.randrange(len(candidates))]
                return _finalize_masks(rnd, P, facts_mask, rules, qb, "yes", target_depth)
            usable = [(abs(l - target_depth), b) for b, l in levels.items() if l <= config.max_depth]
            if usable:
                gap, pick = min(usable)
                if best is None or gap < best[0]:
                    best = (gap, P, facts_mask, rules, pick, levels[pick])
        else:
            false_bits = [b for b in range(P) if not (truth >> b) & 1]
            if false_bits and rounds == target_depth:
                qb = false_bits[rnd.randrange(len(false_bits))]
                return _finalize_masks(rnd, P, facts_mask, rules, qb, "no", target_depth)
            if false_bits and rounds <= config.max_depth:
                gap = abs(rounds - target_depth)
                if best is None or gap < best[0]:
                    qb = false_bits[rnd.randrange(len(false_bits))]
                    best = (gap, P, facts_mask, rules, qb, rounds)
    if best is None:
        raise GenerationError(
            f"no {'yes' if want_yes else 'no'}-labeled problem within retry cap"
        )
    _, P, facts_mask, rules, qb, depth = best
    return _finalize_masks(rnd, P, facts_mask, rules, qb, "yes" if want_yes else "no", depth)


def _finalize_masks(rnd, P, facts_mask, rules_masks, query_bit, label, depth):
    """Map a bitmask attempt to named predicates and finish the problem."""
    names = sorted(rnd.sample(PREDICATES, P))
    rules = tuple(
        Rule(tuple(names[b] for b in range(P) if (bm >> b) & 1), names[hb])
        for bm, hb in rules_masks
    )
    facts = tuple(names[b] for b in range(P) if (facts_mask >> b) & 1)
    return _finalize(names, facts, rules, names[query_bit], label, depth)


def _finalize(pool, facts, rules, query, label, depth):
    problem = LogicProblem(
        rules=tuple(rules),
        facts=tuple(facts),
        query=query,
        label=label,
        pool=tuple(pool),
        depth=int(depth),
    )
    chain = forward_chain(problem)
    # the chaining oracle is the ground truth, by construction
    assert ("yes" if query in chain.truth else "no") == label
    return problem, chain.trace


def rp_generate(config: GeneratorConfig = GeneratorConfig(), seed=None):
    """Rule-priority problem: sample structure, read labels off the chain."""
    return _generate("rp", config, seed)


def lp_generate(config: GeneratorConfig = GeneratorConfig(), seed=None):
    """Label-priority problem: intended truth values first, then consistent
    facts and rules; the final label is recomputed by chaining."""
    return _generate("lp", config, seed)


def generate_dataset(recipe: str, count: int, config: GeneratorConfig, master_seed: int):
    """Deterministic batch generation via spawned per-problem seeds.

    Parallel workers splitting the same master seed would produce the same
    multiset of problems.
    """
    if recipe not in ("rp", "lp"):
        raise ValueError("recipe must be rp or lp")
    seeds = np.random.SeedSequence(master_seed).spawn(count)
    gen = rp_generate if recipe == "rp" else lp_generate
    return [gen(config, seed=s) for s in seeds]


# ---------------------------------------------------------------------------
# rendering and parsing
# ---------------------------------------------------------------------------

def _render_rule(rule: Rule) -> List[str]:
    toks = ["If"]
    for i, b in enumerate(rule.body):
        if i:
            toks.append("and")
        toks.append(b)
    toks += ["then", rule.head, "."]
    return toks


def _render_fact_list(facts: Sequence[str]) -> List[str]:
    toks = ["Facts:"]
    for i, f in enumerate(facts):
        if i:
            toks.append(",")
        toks.append(f)
    toks.append(".")
    return toks


def render(
    problem: LogicProblem,
    trace: Optional[ReasoningTrace] = None,
    style: str = "direct",
) -> str:
    """Token text of the problem, optionally with its reasoning trace."""
    if style not in ("direct", "with_reasoning"):
        raise ValueError("style must be direct or with_reasoning")
    toks = ["Rules:"]
    for rule in problem.rules:
        toks += _render_rule(rule)
    toks += _render_fact_list(problem.facts)
    toks += ["Query:", problem.query, "?"]
    if style == "with_reasoning":
        if trace is None:
            trace = forward_chain(problem).trace
        toks.append("Reasoning:")
        toks += _render_fact_list(trace.initial_facts)
        running = list(trace.initial_facts)
        for step in trace.steps:
            toks += _render_rule(step.rule)
            toks += ["Newfact:", step.new_fact, "."]
            running.append(step.new_fact)
            toks += _render_fact_list(running)
        if trace.terminal == "exhausted":
            toks += ["No_other_facts_can_be_proven", "."]
    toks += ["Answer:", problem.label]
    return " ".join(toks)


class _TokenCursor:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None:
            raise ParseError(self.pos, f"unexpected end of text (wanted {expected!r})")
        if expected is not None and tok != expected:
            raise ParseError(self.pos, f"expected {expected!r}, found {tok!r}")
        self.pos += 1
        return tok

    def take_predicate(self):
        tok = self.peek()
        if tok is None:
            raise ParseError(self.pos, "unexpected end of text (wanted a predicate)")
        self.pos += 1
        if tok not in _DEFAULT_VOCAB.token_to_id:
            raise OutOfVocabularyError(tok, self.pos - 1)
        if tok in SPECIAL_TOKENS:
            raise ParseError(self.pos - 1, f"expected a predicate, found {tok!r}")
        return tok


def _parse_rule(cur: _TokenCursor) -> Rule:
    cur.take("If")
    body = [cur.take_predicate()]
    while cur.peek() == "and":
        cur.take("and")
        body.append(cur.take_predicate())
    cur.take("then")
    head = cur.take_predicate()
    cur.take(".")
    try:
        return Rule(tuple(body), head)
    except ValueError as exc:
        raise ParseError(cur.pos, str(exc))


def _parse_fact_list(cur: _TokenCursor) -> tuple:
    cur.take("Facts:")
    facts = []
    if cur.peek() != ".":
        facts.append(cur.take_predicate())
        while cur.peek() == ",":
            cur.take(",")
            facts.append(cur.take_predicate())
    cur.take(".")
    return tuple(facts)


def parse(text: str):
    """Inverse of render: (problem, trace or None).

    The reconstructed problem carries no pool/depth metadata (those live in
    the structured dataset records, not the token surface).
    """
    tokens = text.split()
    cur = _TokenCursor(tokens)
    cur.take("Rules:")
    rules = []
    while cur.peek() == "If":
        rules.append(_parse_rule(cur))
    facts = _parse_fact_list(cur)
    cur.take("Query:")
    query = cur.take_predicate()
    cur.take("?")
    trace = None
    if cur.peek() == "Reasoning:":
        cur.take("Reasoning:")
        initial = _parse_fact_list(cur)
        running = list(initial)
        steps = []
        terminal = "proved"
        while cur.peek() == "If":
            rule = _parse_rule(cur)
            cur.take("Newfact:")
            new_fact = cur.take_predicate()
            cur.take(".")
            steps.append(TraceStep(rule, new_fact, tuple(running)))
            running.append(new_fact)
            after = _parse_fact_list(cur)
            if after != tuple(running):
                raise ParseError(cur.pos, "facts snapshot does not extend the previous one")
        if cur.peek() == "No_other_facts_can_be_proven":
            cur.take("No_other_facts_can_be_proven")
            cur.take(".")
            terminal = "exhausted"
        trace = ReasoningTrace(initial, tuple(steps), terminal, tuple(running))
    cur.take("Answer:")
    label = cur.take()
    if label not in ("yes", "no"):
        raise ParseError(cur.pos - 1, f"answer must be yes or no, found {label!r}")
    if cur.peek() is not None:
        raise ParseError(cur.pos, f"trailing tokens starting with {cur.peek()!r}")
    problem = LogicProblem(tuple(rules), facts, query, label)
    return problem, trace


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceVerdict:
    accepted: bool
    step_index: Optional[int] = None
    reason: str = ""


def verify_trace(problem: LogicProblem, trace: ReasoningTrace) -> TraceVerdict:
    """Check every firing against the problem; reject at the first violation.

    Acceptance requires: the initial snapshot matches the problem's facts,
    each step fires a listed rule whose body is satisfied and whose head is
    new, proved traces end exactly at the proof of the query, and exhausted
    traces leave no applicable rule while the query stays underived.
    """
    if set(trace.initial_facts) != set(problem.facts):
        return TraceVerdict(False, None, "initial facts differ from the problem's")
    rule_set = set(problem.rules)
    running = list(trace.initial_facts)
    running_set = set(running)
    for i, step in enumerate(trace.steps):
        if step.rule not in rule_set:
            return TraceVerdict(False, i, "fired rule is not part of the problem")
        if tuple(step.facts_before) != tuple(running):
            return TraceVerdict(False, i, "facts snapshot out of sync")
        if not all(b in running_set for b in step.rule.body):
            return TraceVerdict(False, i, "rule body not satisfied")
        if step.rule.head in running_set:
            return TraceVerdict(False, i, "head already derived")
        if step.new_fact != step.rule.head:
            return TraceVerdict(False, i, "new fact does not match the rule head")
        running.append(step.new_fact)
        running_set.add(step.new_fact)
    if tuple(trace.final_facts) != tuple(running):
        return TraceVerdict(False, None, "final facts snapshot out of sync")
    if trace.terminal == "proved":
        if problem.query not in running_set:
            return TraceVerdict(False, None, "claimed proved but query underived")
        if trace.steps and trace.steps[-1].new_fact != problem.query:
            return TraceVerdict(False, len(trace.steps) - 1, "trace continues past the proof")
        if not trace.steps and problem.query not in trace.initial_facts:
            return TraceVerdict(False, None, "empty proof of a non-fact query")
    elif trace.terminal == "exhausted":
        if problem.query in running_set:
            return TraceVerdict(False, None, "claimed exhausted but query derived")
        for rule in problem.rules:
            if rule.head not in running_set and all(b in running_set for b in rule.body):
                return TraceVerdict(False, None, "an applicable rule was left unfired")
    else:
        return TraceVerdict(False, None, f"unknown terminal {trace.terminal!r}")
    return TraceVerdict(True)


def verify_answer(problem: LogicProblem, answer: str) -> bool:
    """Accept iff the answer equals the forward-chaining label."""
    if answer not in ("yes", "no"):
        return False
    chain = forward_chain(problem)
    truth_label = "yes" if problem.query in chain.truth else "no"
    return answer == truth_label


# ---------------------------------------------------------------------------
# structured records
# ---------------------------------------------------------------------------

def problem_to_record(problem: LogicProblem, trace: Optional[ReasoningTrace], index: int) -> dict:
    rec = {
        "kind": "problem",
        "id": index,
        "rules": [[list(r.body), r.head] for r in problem.rules],
        "facts": list(problem.facts),
        "query": problem.query,
        "label": problem.label,
        "pool": list(problem.pool) if problem.pool else None,
        "depth": problem.depth,
        "text": render(problem, trace, style="with_reasoning" if trace else "direct"),
    }
    if trace is not None:
        rec["trace"] = {
            "initial_facts": list(trace.initial_facts),
            "steps": [
                [[list(s.rule.body), s.rule.head], s.new_fact, list(s.facts_before)]
                for s in trace.steps
            ],
            "terminal": trace.terminal,
            "final_facts": list(trace.final_facts),
        }
    return rec


def record_to_problem(rec: dict):
    rules = tuple(Rule(tuple(body), head) for body, head in rec["rules"])
    problem = LogicProblem(
        rules=rules,
        facts=tuple(rec["facts"]),
        query=rec["query"],
        label=rec["label"],
        pool=tuple(rec["pool"]) if rec.get("pool") else None,
        depth=rec.get("depth"),
    )
    trace = None
    if "trace" in rec:
        t = rec["trace"]
        steps = tuple(
            TraceStep(Rule(tuple(rb), rh), nf, tuple(fb))
            for (rb, rh), nf, fb in t["steps"]
        )
        trace = ReasoningTrace(
            tuple(t["initial_facts"]), steps, t["terminal"], tuple(t["final_facts"])
        )
    return problem, trace


def write_dataset(path, problems_with_traces, recipe: str, config: GeneratorConfig, seed: int):
    """Line-delimited records with a leading manifest record."""
    manifest = {
        "kind": "manifest",
        "recipe": recipe,
        "count": len(problems_with_traces),
        "seed": seed,
        "config": {
            "predicate_pool_range": list(config.predicate_pool_range),
            "rule_count_range": list(config.rule_count_range),
            "body_size_choices": list(config.body_size_choices),
            "max_depth": config.max_depth,
            "retry_cap": config.retry_cap,
            "yes_probability": config.yes_probability,
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(manifest, sort_keys=True) + "\n")
        for i, (problem, trace) in enumerate(problems_with_traces):
            fh.write(json.dumps(problem_to_record(problem, trace, i), sort_keys=True) + "\n")


def read_dataset(path):
    """(manifest, [(problem, trace), ...]) from a dataset file."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines:
        raise ValueError("empty dataset file")
    manifest = json.loads(lines[0])
    if manifest.get("kind") != "manifest":
        raise ValueError("first line must be the manifest record")
    items = []
    for line in lines[1:]:
        rec = json.loads(line)
        items.append(record_to_problem(rec))
    return manifest, items
