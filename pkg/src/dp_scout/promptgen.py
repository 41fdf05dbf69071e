"""Prompt rendering and example/target pair planning under a token budget."""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .annotations import PatternInstance, canonical_annotation_xml
from .corpus import Snippet
from .errors import ConfigError
from .names import common_root_package

__all__ = [
    "FALLBACK_SENTENCE",
    "TokenBudget",
    "PromptPair",
    "ExcludedPair",
    "PairPlan",
    "common_root_package",
    "estimate_tokens",
    "register_estimator",
    "render_prompt",
    "enumerate_pairs",
    "prompt_digest",
]

FALLBACK_SENTENCE = "No instance found."

Estimator = Callable[[str], int]


def _bytes_over_four(text: str) -> int:
    return math.ceil(len(text.encode("utf-8")) / 4)


_ESTIMATORS: dict[str, Estimator] = {"bytes4": _bytes_over_four}


def register_estimator(name: str, fn: Estimator) -> None:
    _ESTIMATORS[name] = fn


def estimators() -> list[str]:
    return sorted(_ESTIMATORS)


@dataclass(frozen=True)
class TokenBudget:
    context_limit: int = 128_000
    reserved_output: int = 4096
    estimator_id: str = "bytes4"

    def __post_init__(self) -> None:
        if not 0 < self.reserved_output < self.context_limit:
            raise ConfigError(
                f"reserved_output must lie in (0, {self.context_limit}); got {self.reserved_output}"
            )

    @property
    def available(self) -> int:
        return self.context_limit - self.reserved_output


def estimate_tokens(text: str, budget: TokenBudget) -> int:
    try:
        fn = _ESTIMATORS[budget.estimator_id]
    except KeyError:
        raise ConfigError(
            f"unknown token estimator {budget.estimator_id!r} (known: {', '.join(estimators())})"
        ) from None
    return fn(text)


_PROMPT_HEAD = """\
You are a skilled software architect. Your task is to identify design patterns in source code snippets and create XML annotations for them.

### Instructions:
1. Wait for a subsequent prompt that will contain the source code to analyze.
2. Once the source code is provided, analyze it for the presence of the specific design pattern {pattern}.
3. If the design pattern is found, create a valid XML annotation for each instance within the snippet.
4. If no pattern is found, simply respond with the text: "{fallback}"

Important:
- Do not provide any additional explanations, outputs, or analyses beyond what is requested.
- If the pattern is found, only output the XML annotation(s).
- If the pattern is not found, only output "{fallback}"

Example:

Source Code Snippet:

{snippet}

XML Annotation:

```xml
{annotation}
```
"""


def render_prompt(
    example: PatternInstance,
    example_snippet: Snippet,
    target_snippet: Snippet,
    pattern_name: str,
) -> tuple[str, str]:
    """Build the instruction/example message and the target-code message."""
    if not len(example_snippet) or not len(target_snippet):
        raise ValueError("cannot render a prompt around an empty snippet")
    missing = set(example.classes) - example_snippet.classes
    if missing:
        raise ValueError(f"example snippet lacks annotated classes: {sorted(missing)}")
    message_1 = _PROMPT_HEAD.format(
        pattern=pattern_name,
        fallback=FALLBACK_SENTENCE,
        snippet=example_snippet.rendered,
        annotation=canonical_annotation_xml(example),
    )
    return message_1, target_snippet.rendered


def prompt_digest(message_1: str, message_2: str) -> str:
    return hashlib.sha256(json.dumps([message_1, message_2]).encode("utf-8")).hexdigest()


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PromptPair:
    example_id: int
    target_id: int
    pattern_name: str
    message_1: str
    message_2: str
    token_estimate: int
    example_project: str = ""
    target_project: str = ""

    def __post_init__(self) -> None:
        if self.example_id == self.target_id:
            raise ValueError("a prompt pair needs two distinct instances")
        if FALLBACK_SENTENCE not in self.message_1:
            raise ValueError("message_1 lacks the fallback sentence")

    @property
    def same_project(self) -> bool:
        return self.example_project == self.target_project

    @property
    def digest(self) -> str:
        return prompt_digest(self.message_1, self.message_2)

    def plan_record(self, run_id: int) -> dict:
        return {
            "run_id": run_id,
            "example_id": self.example_id,
            "target_id": self.target_id,
            "pattern_name": self.pattern_name,
            "example_project": self.example_project,
            "target_project": self.target_project,
            "same_project": self.same_project,
            "token_estimate": self.token_estimate,
            "message_1_sha256": _sha(self.message_1),
            "message_2_sha256": _sha(self.message_2),
            "prompt_digest": self.digest,
        }


@dataclass(frozen=True)
class ExcludedPair:
    example_id: int
    target_id: int
    token_estimate: int
    reason: str

    def to_json(self) -> dict:
        return {
            "example_id": self.example_id,
            "target_id": self.target_id,
            "token_estimate": self.token_estimate,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class PairPlan:
    included: tuple[PromptPair, ...]
    excluded: tuple[ExcludedPair, ...]

    def __iter__(self):
        return iter(self.included)

    def __len__(self) -> int:
        return len(self.included)


def enumerate_pairs(
    instances: Iterable[PatternInstance],
    snippets: Mapping[int, Snippet],
    budget: TokenBudget,
    *,
    allow_same_project: bool = False,
    workers: int = 4,
) -> PairPlan:
    """Every ordered (example, target) pairing whose prompt fits the budget.

    Output is ordered by example id, then target id. Same-project pairings are
    excluded unless ``allow_same_project`` is set.
    """
    by_id = {inst.instance_id: inst for inst in instances}
    ids = sorted(by_id)
    candidates = [(e, t) for e in ids for t in ids if e != t]

    def build(pair: tuple[int, int]) -> PromptPair | ExcludedPair:
        ex, tg = by_id[pair[0]], by_id[pair[1]]
        m1, m2 = render_prompt(ex, snippets[ex.instance_id], snippets[tg.instance_id], ex.pattern_name)
        estimate = estimate_tokens(m1, budget) + estimate_tokens(m2, budget)
        if ex.project_id == tg.project_id and not allow_same_project:
            return ExcludedPair(ex.instance_id, tg.instance_id, estimate, "same project")
        if estimate > budget.available:
            return ExcludedPair(ex.instance_id, tg.instance_id, estimate, "exceeds token budget")
        return PromptPair(
            ex.instance_id, tg.instance_id, ex.pattern_name, m1, m2, estimate,
            example_project=ex.project_id, target_project=tg.project_id,
        )

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        built = list(pool.map(build, candidates))
    return PairPlan(
        tuple(b for b in built if isinstance(b, PromptPair)),
        tuple(b for b in built if isinstance(b, ExcludedPair)),
    )
