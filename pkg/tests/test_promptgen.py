from __future__ import annotations

import json

import pytest

from dp_scout import promptgen
from dp_scout.annotations import PatternInstance, RoleAssignment
from dp_scout.corpus import Snippet
from dp_scout.errors import ConfigError
from dp_scout.promptgen import (
    FALLBACK_SENTENCE,
    PromptPair,
    TokenBudget,
    enumerate_pairs,
    estimate_tokens,
    prompt_digest,
    register_estimator,
    render_prompt,
)

EXAMPLE = PatternInstance(1, "Composite", "p", (RoleAssignment("Component", "a.Shape"), RoleAssignment("Leaf", "a.Dot")))
TARGET = PatternInstance(2, "Composite", "q", (RoleAssignment("Component", "b.Node"),))
SNIPPETS = {
    1: Snippet((("a.Shape", "interface Shape {}"), ("a.Dot", "class Dot implements Shape {}"))),
    2: Snippet((("b.Node", "interface Node {}"),)),
}


def test_bytes4_estimate():
    budget = TokenBudget()
    assert estimate_tokens("", budget) == 0
    assert estimate_tokens("abcd", budget) == 1
    assert estimate_tokens("abcde", budget) == 2
    assert estimate_tokens("é" * 4, budget) == 2  # 8 UTF-8 bytes


def test_budget_validation():
    assert TokenBudget().available == 128_000 - 4096
    for reserved in (0, 128_000, 200_000):
        with pytest.raises(ConfigError):
            TokenBudget(reserved_output=reserved)


def test_unknown_estimator():
    with pytest.raises(ConfigError, match="unknown token estimator"):
        estimate_tokens("x", TokenBudget(estimator_id="nope"))


def test_registered_estimator(monkeypatch):
    monkeypatch.setattr(promptgen, "_ESTIMATORS", dict(promptgen._ESTIMATORS))
    register_estimator("chars", len)
    assert estimate_tokens("abcdef", TokenBudget(estimator_id="chars")) == 6


def test_render_prompt_structure():
    m1, m2 = render_prompt(EXAMPLE, SNIPPETS[1], SNIPPETS[2], "Composite")
    assert m1.startswith("You are a skilled software architect.")
    assert "specific design pattern Composite." in m1
    assert f'respond with the text: "{FALLBACK_SENTENCE}"' in m1
    assert "File: a.Dot\n```java\nclass Dot implements Shape {}\n```\n\nFile: a.Shape" in m1
    assert '```xml\n<?xml version="1.0" ?>\n<microArchitecture number="1" designPatternName="Composite" project="p">' in m1
    # the example snippet precedes its annotation
    assert m1.index("File: a.Shape") < m1.index("<microArchitecture")
    assert m2 == SNIPPETS[2].rendered


def test_render_prompt_rejects_bad_inputs():
    with pytest.raises(ValueError):
        render_prompt(EXAMPLE, Snippet(()), SNIPPETS[2], "Composite")
    with pytest.raises(ValueError, match="lacks annotated classes"):
        render_prompt(EXAMPLE, SNIPPETS[2], SNIPPETS[2], "Composite")


def test_prompt_digest_separates_messages():
    assert prompt_digest("ab", "c") != prompt_digest("a", "bc")
    assert prompt_digest("x", "y") == prompt_digest("x", "y")


def test_pair_validation():
    with pytest.raises(ValueError):
        PromptPair(1, 1, "Composite", FALLBACK_SENTENCE, "m2", 1)
    with pytest.raises(ValueError):
        PromptPair(1, 2, "Composite", "no fallback here", "m2", 1)


def test_enumerate_pairs_estimates_and_orders():
    plan = enumerate_pairs([TARGET, EXAMPLE], SNIPPETS, TokenBudget())
    assert [(p.example_id, p.target_id) for p in plan.included] == [(1, 2), (2, 1)]
    budget = TokenBudget()
    for p in plan.included:
        assert p.token_estimate == estimate_tokens(p.message_1, budget) + estimate_tokens(p.message_2, budget)
    record = plan.included[0].plan_record(1)
    assert record["prompt_digest"] == plan.included[0].digest
    json.dumps(record)


def test_same_project_excluded_unless_allowed():
    other = PatternInstance(3, "Composite", "p", (RoleAssignment("Leaf", "a.Dot"),))
    snippets = {**SNIPPETS, 3: SNIPPETS[1]}
    plan = enumerate_pairs([EXAMPLE, other], snippets, TokenBudget())
    assert not plan.included
    assert {e.reason for e in plan.excluded} == {"same project"}
    allowed = enumerate_pairs([EXAMPLE, other], snippets, TokenBudget(), allow_same_project=True)
    assert len(allowed) == 2 and all(p.same_project for p in allowed)


def test_fixture_plan(fixture_corpus):
    from dp_scout import pipeline

    plan = pipeline.build_plan(fixture_corpus)
    assert [(p.example_id, p.target_id) for p in plan.included] == [
        (4, 143), (65, 75), (65, 129), (65, 143), (75, 65), (75, 143), (98, 143),
        (129, 65), (129, 143), (143, 4), (143, 65), (143, 75), (143, 98), (143, 129),
    ]
    assert len(plan.excluded) == 16
    assert all(e.reason == "exceeds token budget" for e in plan.excluded)
