"""Pipeline stages: validate, plan, run, eval, report.

Each stage reads the previous stage's artifacts from the output directory and
writes its own. Outputs carry no timestamps, so re-running a stage on
unchanged inputs reproduces its files byte for byte.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import annotations as ann
from .config import PipelineConfig
from .corpus import ClassIndex, Snippet, assemble_snippet, index_project
from .detection import ANNOTATIONS, Prediction, classify_hallucinations, parse_response
from .errors import AnnotationError, ConfigError, StageError, TransportError
from .evaluation import (
    VARIANTS,
    RoleConfusionMatrix,
    RunMetrics,
    ScoredUnit,
    aggregate_matrix,
    matrix_metrics,
    run_binary_metrics,
    score_run,
)
from .gateway import (
    OK,
    Cassette,
    Gateway,
    LiveBackend,
    ModelResponse,
    RecordingBackend,
    ReplayBackend,
    RunStore,
    run_plan,
)
from .promptgen import PairPlan, enumerate_pairs
from .reporting import (
    InstanceRow,
    RoleCountRow,
    Table,
    instances_table,
    matrix_table,
    roles_table,
    runs_table,
)

log = logging.getLogger(__name__)

PLAN = "plan.jsonl"
PLAN_EXCLUDED = "plan_excluded.jsonl"
RUNS = "runs.jsonl"
PREDICTIONS = "predictions.jsonl"
UNITS = "units.jsonl"
METRICS = "metrics.jsonl"
MATRIX = "matrix.json"


def _jsonl(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in records)


def _read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageError(f"{path.name} not found in {path.parent}; run `{stage}` first")
    return path


def load_instances(config: PipelineConfig) -> list[ann.PatternInstance]:
    instances: list[ann.PatternInstance] = []
    for spec in config.ground_truth:
        try:
            xml = spec.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read ground truth {spec.path}: {exc}") from exc
        if spec.format == "pmart":
            found = ann.parse_pmart_native(xml, config.vocab, project_id=spec.project)
        else:
            found = ann.parse_ground_truth(xml, config.vocab, project_id=spec.project)
        instances.extend(found)
    seen: set[int] = set()
    for inst in instances:
        if inst.instance_id in seen:
            raise AnnotationError(f"instance number {inst.instance_id} occurs twice for {config.vocab.pattern_name}")
        seen.add(inst.instance_id)
    return sorted(instances, key=lambda i: i.instance_id)


@dataclass
class Corpus:
    config: PipelineConfig
    indexes: dict[str, ClassIndex]
    instances: list[ann.PatternInstance]
    retained: list[ann.PatternInstance]
    dropped: list[ann.DroppedInstance]
    unresolved: list[str] = field(default_factory=list)
    snippets: dict[int, Snippet] = field(default_factory=dict)

    def instance(self, instance_id: int) -> ann.PatternInstance:
        for inst in self.retained:
            if inst.instance_id == instance_id:
                return inst
        raise KeyError(instance_id)


def load_corpus(config: PipelineConfig, *, require_paths: bool = True) -> Corpus:
    """Index every project, parse ground truth, filter, and build snippets.

    With ``require_paths`` false a missing project root is recorded as
    unresolved and treated as an empty project, so its instances get dropped.
    """
    indexes: dict[str, ClassIndex] = {}
    unresolved: list[str] = []
    for project in config.projects:
        if not project.root.is_dir():
            if require_paths:
                raise ConfigError(f"project root {project.root} for {project.id} does not exist")
            unresolved.append(str(project.root))
            indexes[project.id] = ClassIndex(project.id, {})
            continue
        indexes[project.id] = index_project(project.root, project.id, lenient=config.lenient)
    instances = load_instances(config)
    retained, dropped = ann.filter_complete(instances, indexes)
    corpus = Corpus(config, indexes, instances, retained, dropped, unresolved)
    for inst in retained:
        corpus.snippets[inst.instance_id] = assemble_snippet(indexes[inst.project_id], inst.root_package)
    return corpus


# -- validate ---------------------------------------------------------------


def validate(config: PipelineConfig) -> tuple[str, bool]:
    """Table of retained instances plus drop list; ``ok`` is False on any problem."""
    corpus = load_corpus(config, require_paths=False)
    rows = []
    for inst in corpus.retained:
        root = inst.root_package
        rows.append(
            InstanceRow(
                inst.instance_id,
                config.project(inst.project_id).display_name,
                root,
                len(inst.classes),
                len(inst.assignments),
                len(corpus.snippets[inst.instance_id]),
                "" if root else "blank root package: entire project used",
            )
        )
    parts = [instances_table(rows).markdown()]
    if corpus.dropped:
        parts.append("### Dropped instances\n")
        for d in corpus.dropped:
            parts.append(f"- {d.instance.instance_id} ({d.instance.project_id}): missing {', '.join(d.missing_fqns)}")
        parts.append("")
    if corpus.unresolved:
        parts.append("### Unresolved paths\n")
        parts.extend(f"- {p}" for p in corpus.unresolved)
        parts.append("")
    skipped = [(pid, path, why) for pid, idx in corpus.indexes.items() for path, why in idx.skipped]
    if skipped:
        parts.append("### Skipped files (lenient)\n")
        parts.extend(f"- {pid}/{path}: {why}" for pid, path, why in skipped)
        parts.append("")
    text = "\n".join(parts)

    out = config.out
    _write(out / "validation.md", text)
    _write(out / "drop_report.json", ann.drop_report_json(corpus.dropped))
    for pid, idx in corpus.indexes.items():
        _write(out / "index" / f"{pid}.json", json.dumps(idx.manifest(), indent=2) + "\n")
    for inst in corpus.retained:
        _write(out / "annotations" / f"{inst.instance_id}.xml", ann.canonical_annotation_xml(inst, config.vocab) + "\n")
    ok = not corpus.dropped and not corpus.unresolved
    return text, ok


# -- plan -------------------------------------------------------------------


def build_plan(corpus: Corpus) -> PairPlan:
    cfg = corpus.config
    return enumerate_pairs(corpus.retained, corpus.snippets, cfg.budget, allow_same_project=cfg.allow_same_project)


def plan(config: PipelineConfig) -> tuple[PairPlan, str]:
    corpus = load_corpus(config)
    pair_plan = build_plan(corpus)
    records = [p.plan_record(i) for i, p in enumerate(pair_plan.included, 1)]
    _write(config.out / PLAN, _jsonl(records))
    _write(config.out / PLAN_EXCLUDED, _jsonl(e.to_json() for e in pair_plan.excluded))
    rows = [
        (str(r["run_id"]), str(r["example_id"]), str(r["target_id"]), str(r["token_estimate"]), "included"
         + (" (same project)" if r["same_project"] else ""))
        for r in records
    ]
    rows += [("-", str(e.example_id), str(e.target_id), str(e.token_estimate), f"excluded: {e.reason}") for e in pair_plan.excluded]
    table = Table(
        f"Prompt plan (budget {config.budget.available} of {config.budget.context_limit} tokens)",
        ("Run", "Example", "Target", "Token estimate", "Status"),
        tuple(rows),
    )
    return pair_plan, table.markdown()


def _load_plan(config: PipelineConfig) -> list[dict]:
    return _read_jsonl(_require(config.out / PLAN, "plan"))


# -- run --------------------------------------------------------------------


def make_backend(config: PipelineConfig, *, overwrite: bool = False):
    if config.backend == "replay":
        if config.cassette is None:
            raise ConfigError("replay backend needs a cassette")
        if not config.cassette.exists():
            raise ConfigError(f"cassette {config.cassette} not found")
        return ReplayBackend(Cassette(config.cassette))
    live = LiveBackend()
    if config.backend == "record":
        if config.cassette is None:
            raise ConfigError("record backend needs a cassette")
        return RecordingBackend(live, Cassette(config.cassette), overwrite=overwrite)
    return live


def run(config: PipelineConfig, *, backend=None, overwrite: bool = False) -> list[ModelResponse]:
    """Execute every planned pair for ``config.model``.

    The prompts are re-rendered from the corpus and must match the digests
    recorded in the plan. Earlier responses for the same model are replaced.
    """
    records = _load_plan(config)
    corpus = load_corpus(config)
    rendered = {(p.example_id, p.target_id): p for p in build_plan(corpus).included}
    work = []
    for r in records:
        pair = rendered.get((r["example_id"], r["target_id"]))
        if pair is None or pair.digest != r["prompt_digest"]:
            raise StageError(
                f"plan entry {r['run_id']} ({r['example_id']}, {r['target_id']}) no longer matches the corpus; re-run `plan`"
            )
        work.append((r["run_id"], pair))

    backend = backend or make_backend(config, overwrite=overwrite)
    store = RunStore(config.out / RUNS)
    model = config.model.model_name
    kept = [resp for resp in store.read() if resp.pair_key.model_name != model]
    store.rewrite(kept)
    done, failures = run_plan(Gateway(backend, store), work, config.model, parallelism=config.parallelism)
    store.rewrite(store.read())
    if failures:
        raise TransportError(
            f"{len(failures)} of {len(work)} requests failed; first: {failures[0]}", failures[0].status
        )
    return done


# -- eval -------------------------------------------------------------------


def evaluate(config: PipelineConfig) -> dict[str, dict[int, dict[str, RunMetrics]]]:
    plan_records = {r["run_id"]: r for r in _load_plan(config)}
    responses = RunStore(_require(config.out / RUNS, "run")).read()
    corpus = load_corpus(config)
    vocab = config.vocab

    predictions: list[dict] = []
    units_out: list[dict] = []
    metrics: dict[str, dict[int, dict[str, RunMetrics]]] = defaultdict(dict)
    units_by_model: dict[str, list[ScoredUnit]] = defaultdict(list)
    for resp in sorted(responses, key=lambda r: (r.pair_key.model_name, r.run_id)):
        model = resp.pair_key.model_name
        record = plan_records.get(resp.run_id)
        if record is None or (record["example_id"], record["target_id"]) != (resp.pair_key.example_id, resp.pair_key.target_id):
            raise StageError(f"run {resp.run_id} in {RUNS} does not match {PLAN}; re-run `run`")
        if resp.transport_status != OK:
            log.warning("run %d (%s) has no response (%s); skipped", resp.run_id, model, resp.transport_status)
            continue
        target = corpus.instance(resp.pair_key.target_id)
        snippet = corpus.snippets[target.instance_id]
        pred = classify_hallucinations(
            parse_response(resp.raw_text, resp.pair_key),
            snippet.classes,
            vocab,
            simple_name_fallback=config.simple_name_fallback,
        )
        units = score_run(pred, target, snippet.classes, vocab=vocab, run_id=resp.run_id)
        units_by_model[model].extend(units)
        metrics[model][resp.run_id] = {v: run_binary_metrics(units, v, run_id=resp.run_id) for v in VARIANTS}
        predictions.append({"run_id": resp.run_id, **pred.to_json()})
        units_out.extend({"model_name": model, **u.to_json()} for u in units)

    out = config.out
    _write(out / PREDICTIONS, _jsonl(predictions))
    _write(out / UNITS, _jsonl(units_out))
    _write(
        out / METRICS,
        _jsonl(
            {"model_name": model, **m.to_json()}
            for model in sorted(metrics)
            for run_id in sorted(metrics[model])
            for m in metrics[model][run_id].values()
        ),
    )
    matrices = {}
    for model in sorted(units_by_model):
        m = aggregate_matrix(units_by_model[model], vocab.roles)
        matrices[model] = {
            **m.to_json(),
            "metrics": {
                v: {
                    "precision": mm.precision,
                    "recall": mm.recall,
                    "grand_total": mm.grand_total,
                }
                for v in VARIANTS
                for mm in [matrix_metrics(m, v)]
            },
        }
    _write(out / MATRIX, json.dumps(matrices, indent=2, sort_keys=True) + "\n")
    return dict(metrics)


# -- report -----------------------------------------------------------------


def report(config: PipelineConfig) -> dict[str, str]:
    """Render Markdown and CSV reports from the eval artifacts. Returns {filename: text}."""
    out = config.out
    plan_records = sorted(_load_plan(config), key=lambda r: r["run_id"])
    metric_rows = _read_jsonl(_require(out / METRICS, "eval"))
    matrices = json.loads(_require(out / MATRIX, "eval").read_text(encoding="utf-8"))
    pred_rows = _read_jsonl(_require(out / PREDICTIONS, "eval"))
    instances = {i.instance_id: i for i in load_instances(config)}
    vocab = config.vocab

    by_model: dict[str, dict[int, dict[str, RunMetrics]]] = defaultdict(lambda: defaultdict(dict))
    for row in metric_rows:
        m = RunMetrics(row["run_id"], row["tp"], row["fp"], row["fn"], row["tn"], row["variant"])
        by_model[row["model_name"]][row["run_id"]][row["variant"]] = m
    models = sorted(set(by_model) | set(matrices))

    predicted: dict[int, dict[str, dict[str, int] | None]] = defaultdict(dict)
    for row in pred_rows:
        pred = Prediction.from_json(row)
        counts = pred.role_counts() if pred.kind == ANNOTATIONS else None
        predicted[row["run_id"]][pred.pair_key.model_name] = counts

    tables: dict[str, Table] = {}
    for model in models:
        tables[f"runs_{model}"] = runs_table(model, by_model.get(model, {}))
        if model in matrices:
            tables[f"matrix_{model}"] = matrix_table(model, _matrix_from_json(matrices[model], vocab.roles))
    role_rows = [
        RoleCountRow(
            r["run_id"],
            r["example_id"],
            r["target_id"],
            instances[r["example_id"]].role_counts(vocab),
            instances[r["target_id"]].role_counts(vocab),
            {model: predicted[r["run_id"]].get(model) for model in models},
        )
        for r in plan_records
    ]
    tables["roles"] = roles_table(vocab.roles, models, role_rows)

    files = {"report.md": "# Design pattern detection report\n\n" + "\n".join(t.markdown() for t in tables.values())}
    for name, table in tables.items():
        files[f"{_safe(name)}.csv"] = table.csv()
    for name, text in files.items():
        _write(out / name, text)
    return files


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def _matrix_from_json(d: dict, roles) -> RoleConfusionMatrix:
    cells = {r: dict(zip(d["columns"], row)) for r, row in zip(d["rows"], d["cells"])}
    return RoleConfusionMatrix.from_cells(roles, cells)
