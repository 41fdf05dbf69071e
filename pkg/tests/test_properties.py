from __future__ import annotations

import random

from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import fqn, java_like_source, pattern_instance
from dp_scout.annotations import COMPOSITE, PatternInstance, RoleAssignment, canonical_annotation_xml
from dp_scout.corpus import Snippet, strip_comments
from dp_scout.detection import parse_response
from dp_scout.evaluation import NO_ROLE, ScoredUnit, aggregate_matrix
from dp_scout.names import in_package, package_of
from dp_scout.promptgen import TokenBudget, estimate_tokens

LABELS = st.sampled_from([*COMPOSITE.roles, NO_ROLE])


@given(java_like_source())
def test_strip_matches_fragment_oracle(case):
    raw, clean, _ = case
    assert strip_comments(raw) == clean


@given(st.text(max_size=200), st.text(max_size=50))
def test_estimate_is_monotone(text, suffix):
    budget = TokenBudget()
    assert estimate_tokens(text + suffix, budget) >= estimate_tokens(text, budget)


@given(st.lists(st.tuples(fqn(), st.text(max_size=20)), unique_by=lambda e: e[0], max_size=8), st.randoms())
def test_snippet_order_independent(entries, rnd):
    shuffled = list(entries)
    rnd.shuffle(shuffled)
    assert Snippet(tuple(entries)).rendered == Snippet(tuple(shuffled)).rendered


@given(fqn())
def test_in_package_dot_boundary(name):
    pkg = package_of(name)
    assert in_package(name, pkg)
    if pkg:
        assert not in_package(name, pkg + "x")


@given(st.lists(st.tuples(LABELS, LABELS), max_size=40), st.randoms())
def test_aggregate_permutation_invariant(pairs, rnd):
    units = [ScoredUnit(i, f"c{i}", p, t) for i, (p, t) in enumerate(pairs)]
    shuffled = list(units)
    rnd.shuffle(shuffled)
    assert aggregate_matrix(units, COMPOSITE.roles) == aggregate_matrix(shuffled, COMPOSITE.roles)


@settings(max_examples=50)
@given(pattern_instance())
def test_canonical_xml_parses_as_response(inst):
    pred = parse_response(f"```xml\n{canonical_annotation_xml(inst, COMPOSITE)}\n```")
    assert {(a.role, a.class_fqn) for a in pred.assignments} == {(a.role, a.class_fqn) for a in inst.assignments}


def test_canonical_xml_is_deterministic():
    rnd = random.Random(5)
    pairs = [RoleAssignment(r, f"p.C{i}") for i, r in enumerate(COMPOSITE.roles * 3)]
    texts = set()
    for _ in range(5):
        rnd.shuffle(pairs)
        texts.add(canonical_annotation_xml(PatternInstance(1, "Composite", "x", tuple(pairs)), COMPOSITE))
    assert len(texts) == 1
