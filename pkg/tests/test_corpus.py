from __future__ import annotations

import pytest

import corpus_factory as cf
from dp_scout.corpus import (
    ClassIndex,
    Snippet,
    assemble_snippet,
    extract_decls,
    index_project,
    strip_comments,
    units_from_source,
)
from dp_scout.errors import EmptySnippetError, IngestError, LexError


@pytest.mark.parametrize(
    "src, expected",
    [
        ("int a; // note\nint b;", "int a; \nint b;"),
        ('String s = "// not a comment";', 'String s = "// not a comment";'),
        ("/* a */ int x; /* b\n c */", " int x; "),
        ("char c = '/'; char d = '\\'';", "char c = '/'; char d = '\\'';"),
        ('String s = "esc \\" /* still */";', 'String s = "esc \\" /* still */";'),
        ("a / b /c", "a / b /c"),
        ("x // end", "x "),
        ("/** doc */class A {}", "class A {}"),
    ],
)
def test_strip_comments(src, expected):
    assert strip_comments(src) == expected


@pytest.mark.parametrize(
    "src, reason, offset",
    [
        ("int a; /* open", "unterminated block comment", 7),
        ('String s = "abc', "unterminated string literal", 11),
        ("char c = 'x", "unterminated char literal", 9),
        ('String s = "ä" + "ö', "unterminated string literal", 18),  # char index 17, "ä" is two bytes
    ],
)
def test_lex_errors_report_byte_offset(src, reason, offset):
    with pytest.raises(LexError) as info:
        strip_comments(src)
    assert info.value.reason == reason
    assert info.value.offset == offset
    assert f"byte offset {offset}" in str(info.value)


def test_fixture_files_match_oracle():
    for project in cf.PROJECTS:
        for f in cf.generate_project(project):
            assert strip_comments(f.raw) == f.clean, f.rel_path


def test_extract_decls_line_broken_declaration():
    src = "package junit.ui;\n\npublic class TestRunner extends\njunit.awtui.TestRunner {\n}\n"
    assert extract_decls(src) == ("junit.ui", ["TestRunner"])


def test_extract_decls_kinds_and_nesting():
    src = """package a.b;
import x.y.*;
@interface Marker { String value(); }
public enum E { A, B; class Inner {} }
interface F { class Nested {} }
final class Z { void m() { class Local {} Object o = new Object() { }; } }
"""
    assert extract_decls(src) == ("a.b", ["Marker", "E", "F", "Z"])


def test_extract_decls_default_package():
    assert extract_decls("class A {}\nclass B {}\n") == ("", ["A", "B"])


def test_class_literal_is_not_a_declaration():
    src = "package p;\nclass A { Object c = String.class; }\n"
    assert extract_decls(src) == ("p", ["A"])


def test_multi_type_file_splits_with_prologue():
    raw = "package p;\nimport x.Y;\n\npublic class A { }\n// helper\nclass B { int i; }\n"
    units = units_from_source(raw, "p/A.java")
    assert [u.fqn for u in units] == ["p.A", "p.B"]
    assert units[0].clean_source == "package p;\nimport x.Y;\n\npublic class A { }"
    assert units[1].clean_source == "package p;\nimport x.Y;\n\nclass B { int i; }"
    assert all(u.raw_source == raw for u in units)


def test_file_without_types_yields_nothing():
    assert units_from_source("package p;\n// only a comment\n", "p/package-info.java") == []


def test_malformed_package_is_lex_error():
    with pytest.raises(LexError):
        units_from_source("package ;\nclass A {}", "A.java")


def _write(root, rel, text):
    path = root / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def test_index_project_and_manifest(tmp_path):
    _write(tmp_path, "a/B.java", "package a;\n/* x */class B {}\n")
    _write(tmp_path, "a/c/D.java", "package a.c;\nclass D {}\nclass E {}\n")
    index = index_project(tmp_path, "demo")
    assert list(index.units) == ["a.B", "a.c.D", "a.c.E"]
    manifest = index.manifest()
    assert manifest["project_id"] == "demo"
    assert manifest["units"][0] == {"fqn": "a.B", "path": "a/B.java", "byte_len": len("package a;\nclass B {}\n")}


def test_duplicate_fqn_names_both_paths(tmp_path):
    _write(tmp_path, "one/A.java", "package p;\nclass A {}\n")
    _write(tmp_path, "two/A.java", "package p;\nclass A {}\n")
    with pytest.raises(IngestError, match="one/A.java.*two/A.java"):
        index_project(tmp_path, "dup")


def test_lex_error_names_file(tmp_path):
    _write(tmp_path, "p/Bad.java", "package p;\nclass Bad { String s = \"open; }\n")
    _write(tmp_path, "p/Good.java", "package p;\nclass Good {}\n")
    with pytest.raises(LexError) as info:
        index_project(tmp_path, "x")
    assert info.value.path == "p/Bad.java"
    lenient = index_project(tmp_path, "x", lenient=True)
    assert list(lenient.units) == ["p.Good"]
    assert lenient.skipped[0][0] == "p/Bad.java"


def test_latin1_fallback(tmp_path):
    (tmp_path / "A.java").write_bytes("class A { String s = \"caf\xe9\"; }\n".encode("latin-1"))
    index = index_project(tmp_path, "enc")
    assert "café" in index.units["A"].clean_source


def test_missing_root(tmp_path):
    with pytest.raises(IngestError):
        index_project(tmp_path / "nope", "x")


def test_snippet_ordering_and_rendering():
    snippet = Snippet((("b.Z", "class Z {}\n"), ("a.Y", "\nclass Y {}")))
    assert snippet.rendered == "File: a.Y\n```java\nclass Y {}\n```\n\nFile: b.Z\n```java\nclass Z {}\n```"
    assert snippet.classes == {"a.Y", "b.Z"}


def test_assemble_snippet_respects_dot_boundary(fixture_corpus):
    index = fixture_corpus.indexes["pmd"]
    snippet = assemble_snippet(index, "net.sourceforge.pmd.ast")
    assert len(snippet) == 108
    assert not any(c.startswith("net.sourceforge.pmd.astviewer") for c in snippet.classes)
    assert any(c.startswith("net.sourceforge.pmd.astviewer") for c in index.units)


def test_assemble_snippet_empty():
    with pytest.raises(EmptySnippetError):
        assemble_snippet(ClassIndex("x", {}), "a")


def test_fixture_root_package_counts(fixture_corpus):
    counts = {i: len(s) for i, s in fixture_corpus.snippets.items()}
    assert counts == cf.expected_root_counts()


def test_fixture_multi_type_files_present(fixture_corpus):
    shared = [u for idx in fixture_corpus.indexes.values() for u in idx.units.values()
              if not u.file_path.endswith(u.fqn.rpartition(".")[2] + ".java")]
    assert shared, "fixture should contain files declaring more than one type"
