from __future__ import annotations

import json

import pytest

from dp_scout.annotations import (
    COMPOSITE,
    PatternInstance,
    RoleAssignment,
    RoleVocabulary,
    canonical_annotation_xml,
    drop_report_json,
    filter_complete,
    parse_ground_truth,
    parse_pmart_native,
)
from dp_scout.corpus import ClassIndex, ClassUnit
from dp_scout.errors import AnnotationError, ConfigError, VocabularyError

SAMPLE = """<?xml version="1.0"?>
<microArchitectures>
  <microArchitecture number=" 65 " designPatternName="Composite" project="junit">
    <roles>
      <role name="Leaf"><class>  junit.framework.TestCase
      </class></role>
      <role name="Component"><class>junit.framework.Test</class></role>
      <role name="Composite"><class>junit.framework.TestSuite</class></role>
    </roles>
  </microArchitecture>
  <microArchitecture number="7" designPatternName="Observer">
    <roles><role name="Subject"><class>a.B</class></role></roles>
  </microArchitecture>
</microArchitectures>
"""


def test_parse_trims_and_skips_other_patterns():
    [inst] = parse_ground_truth(SAMPLE, COMPOSITE)
    assert inst.instance_id == 65
    assert inst.project_id == "junit"
    assert RoleAssignment("Leaf", "junit.framework.TestCase") in inst.assignments
    assert inst.root_package == "junit.framework"
    assert inst.role_counts(COMPOSITE) == {"Client": 0, "Component": 1, "Composite": 1, "Leaf": 1}


def test_unknown_role_is_vocabulary_error():
    xml = '<microArchitecture number="1" designPatternName="Composite"><roles><role name="Decorator"><class>a.B</class></role></roles></microArchitecture>'
    with pytest.raises(VocabularyError) as info:
        parse_ground_truth(xml, COMPOSITE)
    assert info.value.role == "Decorator"
    [inst] = parse_ground_truth(xml, COMPOSITE, lenient=True)
    assert inst.assignments == (RoleAssignment("Decorator", "a.B"),)


def test_malformed_xml_reports_position():
    with pytest.raises(AnnotationError, match="line 2"):
        parse_ground_truth("<microArchitecture>\n<roles>", COMPOSITE)


def test_duplicate_pair_strict_vs_lenient():
    xml = ('<microArchitecture number="2" designPatternName="Composite"><roles>'
           '<role name="Leaf"><class>a.B</class><class>a.B</class></role></roles></microArchitecture>')
    with pytest.raises(AnnotationError):
        parse_ground_truth(xml, COMPOSITE)
    [inst] = parse_ground_truth(xml, COMPOSITE, lenient=True)
    assert len(inst.assignments) == 1


def test_same_class_may_hold_two_roles():
    xml = ('<microArchitecture number="3" designPatternName="Composite"><roles>'
           '<role name="Leaf"><class>a.B</class></role><role name="Composite"><class>a.B</class></role>'
           "</roles></microArchitecture>")
    [inst] = parse_ground_truth(xml, COMPOSITE)
    assert inst.classes == ["a.B"]
    assert len(inst.assignments) == 2


def test_empty_instance_rejected():
    with pytest.raises(AnnotationError):
        PatternInstance(1, "Composite", "", ())


def test_order_independent_equality():
    a = PatternInstance(1, "Composite", "p", (RoleAssignment("Leaf", "x.A"), RoleAssignment("Component", "x.B")))
    b = PatternInstance(1, "Composite", "p", (RoleAssignment("Component", "x.B"), RoleAssignment("Leaf", "x.A")))
    assert a == b


def test_canonical_xml_layout():
    inst = PatternInstance(
        4, "Composite", "",
        (RoleAssignment("Leaf", "a.Z"), RoleAssignment("Leaf", "a.Y"), RoleAssignment("Client", "b.C")),
    )
    assert canonical_annotation_xml(inst, COMPOSITE) == "\n".join([
        '<?xml version="1.0" ?>',
        '<microArchitecture number="4" designPatternName="Composite">',
        "  <roles>",
        '    <role name="Client">',
        "      <class>b.C</class>",
        "    </role>",
        '    <role name="Leaf">',
        "      <class>a.Y</class>",
        "      <class>a.Z</class>",
        "    </role>",
        "  </roles>",
        "</microArchitecture>",
    ])


def test_canonical_round_trip_of_sample():
    [inst] = parse_ground_truth(SAMPLE, COMPOSITE)
    assert parse_ground_truth(canonical_annotation_xml(inst, COMPOSITE), COMPOSITE) == [inst]


def test_pmart_native_import():
    xml = """<designPatterns>
  <designPattern name="Composite">
    <microArchitectures>
      <microArchitecture number="129">
        <roles>
          <components><component><entity> net.sourceforge.pmd.ast.Node </entity></component></components>
          <composites><composite><entity>net.sourceforge.pmd.ast.SimpleNode</entity></composite></composites>
          <leaves><leaf><entity>net.sourceforge.pmd.ast.ASTCompilationUnit</entity></leaf></leaves>
        </roles>
      </microArchitecture>
    </microArchitectures>
  </designPattern>
  <designPattern name="Observer"><microArchitectures/></designPattern>
</designPatterns>"""
    [inst] = parse_pmart_native(xml, COMPOSITE, project_id="pmd")
    assert inst.instance_id == 129
    assert inst.project_id == "pmd"
    assert inst.role_counts(COMPOSITE) == {"Client": 0, "Component": 1, "Composite": 1, "Leaf": 1}


def test_vocabulary_validation():
    with pytest.raises(ValueError):
        RoleVocabulary("X", ())
    with pytest.raises(ValueError):
        RoleVocabulary("X", ("A", "A"))


def _index(project, *fqns):
    return ClassIndex(project, {f: ClassUnit(f, f + ".java", "", "") for f in fqns})


def test_filter_complete_and_drop_report():
    good = PatternInstance(1, "Composite", "p", (RoleAssignment("Leaf", "a.A"),))
    bad = PatternInstance(2, "Composite", "p", (RoleAssignment("Leaf", "a.A"), RoleAssignment("Leaf", "a.Missing")))
    retained, dropped = filter_complete([good, bad], {"p": _index("p", "a.A")})
    assert retained == [good]
    assert dropped[0].missing_fqns == ("a.Missing",)
    assert json.loads(drop_report_json(dropped)) == [{"instance_id": 2, "missing_fqns": ["a.Missing"]}]


def test_filter_complete_unknown_project():
    inst = PatternInstance(1, "Composite", "q", (RoleAssignment("Leaf", "a.A"),))
    with pytest.raises(ConfigError):
        filter_complete([inst], {"p": _index("p", "a.A")})


def test_fixture_ground_truth_counts(fixture_corpus):
    import corpus_factory as cf

    by_id = {i.instance_id: i for i in fixture_corpus.retained}
    assert sorted(by_id) == [4, 65, 75, 98, 129, 143]
    # participating classes per instance, as published
    assert {i: len(inst.classes) for i, inst in by_id.items()} == {4: 17, 65: 39, 75: 35, 98: 29, 129: 3, 143: 5}
    for d in cf.INSTANCES:
        assert by_id[d.number].role_counts() == {r: len(v) for r, v in d.roles.items()}
