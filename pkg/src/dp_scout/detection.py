"""Turn raw model output into predictions and label hallucinations."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable

from .annotations import RoleAssignment, RoleVocabulary, parse_ground_truth
from .errors import AnnotationError
from .gateway import PairKey
from .names import simple_name
from .promptgen import FALLBACK_SENTENCE

ANNOTATIONS = "annotations"
NONE_FOUND = "none_found"
MALFORMED = "malformed"

KNOWN = "known"
HALLUCINATED_CLASS = "hallucinated_class"
HALLUCINATED_ROLE = "hallucinated_role"

_BLOCK = re.compile(r"<microArchitecture\b.*?</microArchitecture\s*>", re.DOTALL)
_FENCE_OPEN = re.compile(r"\A```[^\n]*\n?")
_FENCE_CLOSE = re.compile(r"\n?```\Z")


@dataclass(frozen=True)
class PredictedAssignment:
    role: str
    class_fqn: str
    class_status: str | None = None
    role_status: str | None = None

    def to_json(self) -> dict:
        return {
            "role": self.role,
            "class_fqn": self.class_fqn,
            "class_status": self.class_status,
            "role_status": self.role_status,
        }


@dataclass(frozen=True)
class Prediction:
    pair_key: PairKey | None
    kind: str
    assignments: tuple[PredictedAssignment, ...] = ()
    raw_text: str = ""

    def __post_init__(self) -> None:
        if self.kind != ANNOTATIONS and self.assignments:
            raise ValueError(f"a {self.kind} prediction carries no assignments")

    @property
    def hallucinated_classes(self) -> int:
        return sum(a.class_status == HALLUCINATED_CLASS for a in self.assignments)

    @property
    def hallucinated_roles(self) -> int:
        return sum(a.role_status == HALLUCINATED_ROLE for a in self.assignments)

    def role_counts(self) -> dict[str, int]:
        counts: dict[str, int] = defaultdict(int)
        for a in self.assignments:
            counts[a.role] += 1
        return dict(counts)

    def to_json(self) -> dict:
        return {
            "pair_key": None
            if self.pair_key is None
            else {
                "example_id": self.pair_key.example_id,
                "target_id": self.pair_key.target_id,
                "model_name": self.pair_key.model_name,
            },
            "kind": self.kind,
            "assignments": [a.to_json() for a in self.assignments],
            "hallucinated_classes": self.hallucinated_classes,
            "hallucinated_roles": self.hallucinated_roles,
            "raw_text": self.raw_text,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Prediction":
        key = PairKey.from_json(d["pair_key"]) if d.get("pair_key") else None
        return cls(
            key,
            d["kind"],
            tuple(PredictedAssignment(**a) for a in d["assignments"]),
            d.get("raw_text", ""),
        )


def _unfence(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        text = _FENCE_OPEN.sub("", text, count=1)
        text = _FENCE_CLOSE.sub("", text.rstrip(), count=1)
    return text.strip()


def is_fallback(text: str) -> bool:
    """Exact, case-sensitive match of the fallback sentence (optionally quoted)."""
    body = _unfence(text)
    if len(body) >= 2 and body[0] == body[-1] == '"':
        body = body[1:-1]
    return body == FALLBACK_SENTENCE


def parse_response(raw_text: str, pair_key: PairKey | None = None) -> Prediction:
    """Classify a response as none-found, a set of annotations, or malformed.

    Every ``microArchitecture`` block in the text is parsed, fenced or not,
    and their assignments are merged with duplicates removed. A response that
    has no block, or any block that does not parse, is malformed.
    """
    if is_fallback(raw_text):
        return Prediction(pair_key, NONE_FOUND)
    blocks = _BLOCK.findall(raw_text)
    if not blocks:
        return Prediction(pair_key, MALFORMED, raw_text=raw_text)
    merged: dict[RoleAssignment, None] = {}
    try:
        for block in blocks:
            for inst in parse_ground_truth(block, None, lenient=True):
                for a in inst.assignments:
                    merged.setdefault(a, None)
    except AnnotationError:
        return Prediction(pair_key, MALFORMED, raw_text=raw_text)
    if not merged:
        return Prediction(pair_key, MALFORMED, raw_text=raw_text)
    return Prediction(
        pair_key,
        ANNOTATIONS,
        tuple(PredictedAssignment(a.role, a.class_fqn) for a in merged),
    )


def classify_hallucinations(
    pred: Prediction,
    target_classes: Iterable[str],
    vocab: RoleVocabulary,
    *,
    simple_name_fallback: bool = False,
) -> Prediction:
    """Label each assignment's class and role as known or hallucinated.

    With ``simple_name_fallback`` a class name that is not an exact FQN in the
    target snippet is resolved when exactly one snippet class shares its simple
    name; the assignment is then rewritten to that FQN.
    """
    if pred.kind != ANNOTATIONS:
        return pred
    classes = frozenset(target_classes)
    by_simple: dict[str, list[str]] = defaultdict(list)
    if simple_name_fallback:
        for fqn in classes:
            by_simple[simple_name(fqn)].append(fqn)

    labelled: dict[tuple[str, str], PredictedAssignment] = {}
    for a in pred.assignments:
        fqn = a.class_fqn
        if fqn not in classes and simple_name_fallback:
            candidates = by_simple.get(simple_name(fqn), [])
            if len(candidates) == 1:
                fqn = candidates[0]
        out = replace(
            a,
            class_fqn=fqn,
            class_status=KNOWN if fqn in classes else HALLUCINATED_CLASS,
            role_status=KNOWN if a.role in vocab else HALLUCINATED_ROLE,
        )
        labelled.setdefault((out.role, out.class_fqn), out)
    return replace(pred, assignments=tuple(labelled.values()))
