"""Ground-truth design-pattern annotations.

Two XML layouts are read:

* the normalized layout used throughout this package (and in prompts)::

    <microArchitecture number="65" designPatternName="Composite" project="junit">
      <roles>
        <role name="Leaf"><class>junit.framework.TestCase</class></role>
      </roles>
    </microArchitecture>

  Any number of ``microArchitecture`` elements may sit under an arbitrary
  wrapper element.

* the per-program repository layout, where each role is a plural/singular
  element pair holding ``entity`` children (see :func:`parse_pmart_native`).
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterable, Mapping
from xml.sax.saxutils import escape, quoteattr

from .corpus import ClassIndex
from .errors import AnnotationError, ConfigError, VocabularyError
from .names import common_root_package


@dataclass(frozen=True)
class RoleVocabulary:
    pattern_name: str
    roles: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.roles:
            raise ValueError("a role vocabulary needs at least one role")
        if len(set(self.roles)) != len(self.roles):
            raise ValueError(f"duplicate roles in vocabulary for {self.pattern_name}")
        if any(not r or r != r.strip() for r in self.roles):
            raise ValueError("role names must be non-empty and unpadded")

    def __contains__(self, role: object) -> bool:
        return role in self.roles

    def order(self, role: str) -> tuple[int, str]:
        """Sort key placing vocabulary roles first, in vocabulary order."""
        try:
            return (self.roles.index(role), "")
        except ValueError:
            return (len(self.roles), role)


COMPOSITE = RoleVocabulary("Composite", ("Client", "Component", "Composite", "Leaf"))

_VOCABULARIES: dict[str, RoleVocabulary] = {COMPOSITE.pattern_name: COMPOSITE}


def register_vocabulary(vocab: RoleVocabulary) -> None:
    _VOCABULARIES[vocab.pattern_name] = vocab


def vocabulary_for(pattern_name: str) -> RoleVocabulary | None:
    return _VOCABULARIES.get(pattern_name)


@dataclass(frozen=True, order=True)
class RoleAssignment:
    role: str
    class_fqn: str


@dataclass(frozen=True)
class PatternInstance:
    """One annotated micro-architecture.

    Assignments are kept sorted, so two instances that differ only in the order
    their roles were listed compare equal.
    """

    instance_id: int
    pattern_name: str
    project_id: str
    assignments: tuple[RoleAssignment, ...]

    def __post_init__(self) -> None:
        assignments = tuple(sorted(self.assignments))
        if not assignments:
            raise AnnotationError(f"instance {self.instance_id} has no role assignments")
        if len(set(assignments)) != len(assignments):
            raise AnnotationError(f"instance {self.instance_id} repeats a (role, class) pair")
        object.__setattr__(self, "assignments", assignments)

    @property
    def classes(self) -> list[str]:
        return sorted({a.class_fqn for a in self.assignments})

    @property
    def root_package(self) -> str:
        return common_root_package(self.classes)

    def role_counts(self, vocab: RoleVocabulary | None = None) -> dict[str, int]:
        counts: dict[str, int] = {r: 0 for r in vocab.roles} if vocab else {}
        for a in self.assignments:
            counts[a.role] = counts.get(a.role, 0) + 1
        return counts


def _xml_root(xml: str) -> ET.Element:
    try:
        return ET.fromstring(xml)
    except ET.ParseError as exc:
        line, col = exc.position
        raise AnnotationError(f"malformed annotation XML at line {line}, column {col}: {exc}") from exc


def _text(el: ET.Element) -> str:
    return (el.text or "").strip()


def _instance_from_element(
    el: ET.Element,
    vocab: RoleVocabulary | None,
    lenient: bool,
    default_project: str,
) -> PatternInstance:
    raw_number = el.get("number", "").strip()
    try:
        number = int(raw_number)
    except ValueError:
        if not lenient:
            raise AnnotationError(f"microArchitecture has invalid number {raw_number!r}") from None
        number = 0
    pattern = el.get("designPatternName", "").strip() or (vocab.pattern_name if vocab else "")
    project = el.get("project", "").strip() or default_project

    seen: dict[RoleAssignment, None] = {}
    for role_el in el.iter("role"):
        role = role_el.get("name", "").strip()
        if not role:
            raise AnnotationError(f"instance {number}: role element without a name")
        if not lenient and vocab is not None and role not in vocab:
            raise VocabularyError(role, vocab.pattern_name)
        for cls_el in role_el.iter("class"):
            fqn = _text(cls_el)
            if not fqn:
                raise AnnotationError(f"instance {number}: empty class for role {role}")
            a = RoleAssignment(role, fqn)
            if a in seen and not lenient:
                raise AnnotationError(f"instance {number} repeats ({role}, {fqn})")
            seen[a] = None
    return PatternInstance(number, pattern, project, tuple(seen))


def parse_ground_truth(
    xml: str,
    vocab: RoleVocabulary | None,
    *,
    lenient: bool = False,
    project_id: str = "",
) -> list[PatternInstance]:
    """Parse normalized annotation XML.

    Whitespace around attribute values and class names is trimmed. In strict
    mode, roles outside ``vocab`` raise :class:`VocabularyError` and
    micro-architectures of other patterns are skipped. Lenient mode lets
    unknown roles, missing numbers and repeated pairs through; it is what the
    response parser uses.
    """
    root = _xml_root(xml)
    elements = [root] if root.tag == "microArchitecture" else list(root.iter("microArchitecture"))
    out = []
    for el in elements:
        pattern = el.get("designPatternName", "").strip()
        if not lenient and vocab is not None and pattern and pattern != vocab.pattern_name:
            continue
        out.append(_instance_from_element(el, vocab, lenient, project_id))
    return out


def parse_pmart_native(xml: str, vocab: RoleVocabulary, *, project_id: str = "") -> list[PatternInstance]:
    """Import adapter for the repository's native per-program layout::

        <designPattern name="Composite">
          <microArchitectures>
            <microArchitecture number="4">
              <roles>
                <components><component><entity> a.B </entity></component></components>
                <leaves><leaf><entity>a.C</entity></leaf>...</leaves>
              </roles>
            </microArchitecture>
          </microArchitectures>
        </designPattern>

    Role element names are matched case-insensitively against the vocabulary.
    """
    root = _xml_root(xml)
    by_lower = {r.lower(): r for r in vocab.roles}
    patterns = [root] if root.tag == "designPattern" else list(root.iter("designPattern"))
    out = []
    for dp in patterns:
        if dp.get("name", "").strip() != vocab.pattern_name:
            continue
        for ma in dp.iter("microArchitecture"):
            number = int(ma.get("number", "").strip())
            assignments = []
            roles_el = ma.find("roles")
            for group in roles_el if roles_el is not None else []:
                for role_el in group:
                    role = by_lower.get(role_el.tag.lower())
                    if role is None:
                        raise VocabularyError(role_el.tag, vocab.pattern_name)
                    for entity in role_el.iter("entity"):
                        if _text(entity):
                            assignments.append(RoleAssignment(role, _text(entity)))
            out.append(PatternInstance(number, vocab.pattern_name, project_id, tuple(dict.fromkeys(assignments))))
    return out


def canonical_annotation_xml(instance: PatternInstance, vocab: RoleVocabulary | None = None) -> str:
    """Deterministic normalized XML for one instance (roles in vocabulary order)."""
    vocab = vocab or vocabulary_for(instance.pattern_name)
    by_role: dict[str, list[str]] = {}
    for a in instance.assignments:
        by_role.setdefault(a.role, []).append(a.class_fqn)
    key = vocab.order if vocab else (lambda r: (0, r))
    attrs = f"number={quoteattr(str(instance.instance_id))} designPatternName={quoteattr(instance.pattern_name)}"
    if instance.project_id:
        attrs += f" project={quoteattr(instance.project_id)}"
    lines = ['<?xml version="1.0" ?>', f"<microArchitecture {attrs}>", "  <roles>"]
    for role in sorted(by_role, key=key):
        lines.append(f"    <role name={quoteattr(role)}>")
        lines.extend(f"      <class>{escape(fqn)}</class>" for fqn in sorted(by_role[role]))
        lines.append("    </role>")
    lines += ["  </roles>", "</microArchitecture>"]
    return "\n".join(lines)


@dataclass(frozen=True)
class DroppedInstance:
    instance: PatternInstance
    missing_fqns: tuple[str, ...]

    def to_json(self) -> dict:
        return {"instance_id": self.instance.instance_id, "missing_fqns": list(self.missing_fqns)}


@dataclass
class FilterResult:
    retained: list[PatternInstance] = field(default_factory=list)
    dropped: list[DroppedInstance] = field(default_factory=list)

    def __iter__(self):
        return iter((self.retained, self.dropped))


def filter_complete(
    instances: Iterable[PatternInstance],
    indexes: Mapping[str, ClassIndex],
) -> FilterResult:
    """Keep instances whose every annotated class resolves in its project's index."""
    result = FilterResult()
    for inst in instances:
        if inst.project_id not in indexes:
            raise ConfigError(f"instance {inst.instance_id} references unknown project {inst.project_id!r}")
        index = indexes[inst.project_id]
        missing = tuple(fqn for fqn in inst.classes if fqn not in index)
        if missing:
            result.dropped.append(DroppedInstance(inst, missing))
        else:
            result.retained.append(inst)
    return result


def drop_report_json(dropped: Iterable[DroppedInstance]) -> str:
    return json.dumps([d.to_json() for d in dropped], indent=2) + "\n"
