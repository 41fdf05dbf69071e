"""Pipeline configuration (JSON). Relative paths resolve against the config file."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import jsonschema

from .annotations import COMPOSITE, RoleVocabulary, register_vocabulary
from .errors import UsageError
from .gateway import ModelConfig
from .promptgen import TokenBudget

BACKENDS = ("live", "replay", "record")

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dp-scout pipeline configuration",
    "type": "object",
    "required": ["projects", "ground_truth"],
    "additionalProperties": False,
    "properties": {
        "pattern": {
            "type": "object",
            "required": ["name", "roles"],
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string", "minLength": 1},
                "roles": {"type": "array", "items": {"type": "string", "minLength": 1}, "minItems": 1, "uniqueItems": True},
            },
        },
        "projects": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "root"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "name": {"type": "string"},
                    "root": {"type": "string", "minLength": 1},
                },
            },
        },
        "ground_truth": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["path"],
                "additionalProperties": False,
                "properties": {
                    "path": {"type": "string", "minLength": 1},
                    "format": {"enum": ["normalized", "pmart"]},
                    "project": {"type": "string"},
                },
            },
        },
        "budget": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "context_limit": {"type": "integer", "minimum": 1},
                "reserved_output": {"type": "integer", "minimum": 1},
                "estimator": {"type": "string"},
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "model_name": {"type": "string", "minLength": 1},
                "endpoint_url": {"type": "string"},
                "temperature": {"type": "number"},
                "max_output_tokens": {"type": "integer", "minimum": 1},
                "timeout": {"type": "number", "exclusiveMinimum": 0},
                "retries": {"type": "integer", "minimum": 0},
                "backoff_base": {"type": "number", "minimum": 0},
            },
        },
        "backend": {"enum": list(BACKENDS)},
        "cassette": {"type": "string"},
        "out": {"type": "string"},
        "allow_same_project": {"type": "boolean"},
        "lenient": {"type": "boolean"},
        "simple_name_fallback": {"type": "boolean"},
        "parallelism": {"type": "integer", "minimum": 1},
    },
}


@dataclass(frozen=True)
class ProjectSpec:
    id: str
    root: Path
    name: str = ""

    @property
    def display_name(self) -> str:
        return self.name or self.id


@dataclass(frozen=True)
class GroundTruthSpec:
    path: Path
    format: str = "normalized"
    project: str = ""


@dataclass(frozen=True)
class PipelineConfig:
    projects: tuple[ProjectSpec, ...]
    ground_truth: tuple[GroundTruthSpec, ...]
    vocab: RoleVocabulary = COMPOSITE
    budget: TokenBudget = field(default_factory=TokenBudget)
    model: ModelConfig = field(default_factory=lambda: ModelConfig("gpt-4"))
    backend: str = "replay"
    cassette: Path | None = None
    out: Path = Path("out")
    allow_same_project: bool = False
    lenient: bool = False
    simple_name_fallback: bool = False
    parallelism: int = 1

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise UsageError(f"backend must be one of {', '.join(BACKENDS)}")
        ids = [p.id for p in self.projects]
        if len(set(ids)) != len(ids):
            raise UsageError("project ids must be unique")

    def project(self, project_id: str) -> ProjectSpec:
        for p in self.projects:
            if p.id == project_id:
                return p
        raise KeyError(project_id)

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        model_name = overrides.pop("model", None)
        cfg = replace(self, **{k: v for k, v in overrides.items() if v is not None})
        if model_name:
            cfg = replace(cfg, model=replace(cfg.model, model_name=model_name))
        return cfg


def parse_config(data: Any, base_dir: Path) -> PipelineConfig:
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"invalid config at {where}: {exc.message}") from None

    def resolve(p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else base_dir / path

    vocab = COMPOSITE
    if "pattern" in data:
        vocab = RoleVocabulary(data["pattern"]["name"], tuple(data["pattern"]["roles"]))
        register_vocabulary(vocab)
    budget_d = data.get("budget", {})
    budget = TokenBudget(
        context_limit=budget_d.get("context_limit", 128_000),
        reserved_output=budget_d.get("reserved_output", 4096),
        estimator_id=budget_d.get("estimator", "bytes4"),
    )
    model = ModelConfig(**{"model_name": "gpt-4", **data.get("model", {})})
    return PipelineConfig(
        projects=tuple(ProjectSpec(p["id"], resolve(p["root"]), p.get("name", "")) for p in data["projects"]),
        ground_truth=tuple(
            GroundTruthSpec(resolve(g["path"]), g.get("format", "normalized"), g.get("project", ""))
            for g in data["ground_truth"]
        ),
        vocab=vocab,
        budget=budget,
        model=model,
        backend=data.get("backend", "replay"),
        cassette=resolve(data["cassette"]) if "cassette" in data else None,
        out=resolve(data.get("out", "out")),
        allow_same_project=data.get("allow_same_project", False),
        lenient=data.get("lenient", False),
        simple_name_fallback=data.get("simple_name_fallback", False),
        parallelism=data.get("parallelism", 1),
    )


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    return parse_config(data, path.resolve().parent)
