"""Scoring predictions against ground truth.

Every scored unit is a (predicted label, truth label) pair for one class.
Rows of the confusion matrix are predicted labels and columns are truth
labels, so row-wise ratios are precision and column-wise ratios are recall.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

from .annotations import PatternInstance, RoleVocabulary
from .detection import ANNOTATIONS, HALLUCINATED_CLASS as _HC_STATUS, HALLUCINATED_ROLE as _HR_STATUS, Prediction
from .errors import ScoringError

NO_ROLE = "No Role"
HALLUCINATED_CLASS = "Hallucinated Class"
HALLUCINATED_ROLE = "Hallucinated Role"

WITH_HALLUCINATION = "with_hallucination"
WITHOUT_HALLUCINATION = "without_hallucination"
VARIANTS = (WITH_HALLUCINATION, WITHOUT_HALLUCINATION)


@dataclass(frozen=True, order=True)
class ScoredUnit:
    run_id: int
    class_fqn: str
    predicted: str
    truth: str

    @property
    def is_hallucination(self) -> bool:
        return self.truth == HALLUCINATED_CLASS or self.predicted == HALLUCINATED_ROLE

    def to_json(self) -> dict:
        return {"run_id": self.run_id, "class_fqn": self.class_fqn, "predicted": self.predicted, "truth": self.truth}


def score_run(
    pred: Prediction,
    truth: PatternInstance,
    snippet_classes: Iterable[str],
    *,
    vocab: RoleVocabulary | None = None,
    run_id: int = 0,
) -> list[ScoredUnit]:
    """Break one run into per-class units.

    * a predicted (class, role) equal to a truth pair is a TP unit;
    * every truth pair without an identical prediction adds a (No Role, role) unit;
    * any other prediction on a snippet class is an FP unit whose truth label is
      a different truth role of that class, or No Role;
    * predictions naming classes outside the snippet land in the Hallucinated
      Class column, predictions with unknown roles in the Hallucinated Role row;
    * snippet classes that are neither annotated nor predicted are (No Role, No Role).

    Responses without annotations (none-found or malformed) predict nothing.
    """
    snippet = frozenset(snippet_classes)
    order = vocab.order if vocab else (lambda r: (0, r))
    truth_roles: dict[str, list[str]] = {}
    for a in truth.assignments:
        if a.class_fqn not in snippet:
            raise ScoringError(
                f"truth class {a.class_fqn} of instance {truth.instance_id} is not in the target snippet"
            )
        truth_roles.setdefault(a.class_fqn, []).append(a.role)
    for roles in truth_roles.values():
        roles.sort(key=order)
    truth_pairs = {(a.class_fqn, a.role) for a in truth.assignments}

    assignments = pred.assignments if pred.kind == ANNOTATIONS else ()
    predicted_pairs = {
        (a.class_fqn, a.role)
        for a in assignments
        if a.class_status != _HC_STATUS and a.role_status != _HR_STATUS
    }

    units: list[ScoredUnit] = []
    predicted_classes: set[str] = set()
    for a in assignments:
        if a.class_status is None or a.role_status is None:
            raise ScoringError("prediction must be classified for hallucinations before scoring")
        if a.class_status == _HC_STATUS:
            row = HALLUCINATED_ROLE if a.role_status == _HR_STATUS else a.role
            units.append(ScoredUnit(run_id, a.class_fqn, row, HALLUCINATED_CLASS))
            continue
        predicted_classes.add(a.class_fqn)
        roles = truth_roles.get(a.class_fqn, [])
        if a.role_status == _HR_STATUS:
            units.append(ScoredUnit(run_id, a.class_fqn, HALLUCINATED_ROLE, roles[0] if roles else NO_ROLE))
        elif (a.class_fqn, a.role) in truth_pairs:
            units.append(ScoredUnit(run_id, a.class_fqn, a.role, a.role))
        else:
            unmatched = [r for r in roles if (a.class_fqn, r) not in predicted_pairs]
            other = unmatched or [r for r in roles if r != a.role]
            units.append(ScoredUnit(run_id, a.class_fqn, a.role, other[0] if other else NO_ROLE))

    for fqn, role in sorted(truth_pairs):
        if (fqn, role) not in predicted_pairs:
            units.append(ScoredUnit(run_id, fqn, NO_ROLE, role))
    for fqn in sorted(snippet - truth_roles.keys() - predicted_classes):
        units.append(ScoredUnit(run_id, fqn, NO_ROLE, NO_ROLE))
    return sorted(units)


def round3(x: float) -> float:
    """Half-up rounding to three decimals, for reporting."""
    return float(Decimal(repr(x)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def prf(tp: int, fp: int, fn: int, tn: int) -> tuple[float, float, float, float]:
    """Precision, recall, F1 and accuracy; degenerate denominators give 0."""
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    total = tp + fp + fn + tn
    acc = (tp + tn) / total if total else 0.0
    return p, r, f1, acc


@dataclass(frozen=True)
class RunMetrics:
    run_id: int
    tp: int
    fp: int
    fn: int
    tn: int
    variant: str = WITH_HALLUCINATION
    precision: float = field(init=False)
    recall: float = field(init=False)
    f1: float = field(init=False)
    accuracy: float = field(init=False)

    def __post_init__(self) -> None:
        p, r, f1, a = prf(self.tp, self.fp, self.fn, self.tn)
        object.__setattr__(self, "precision", p)
        object.__setattr__(self, "recall", r)
        object.__setattr__(self, "f1", f1)
        object.__setattr__(self, "accuracy", a)

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return self.tp, self.fp, self.fn, self.tn

    def rounded(self) -> tuple[float, float, float, float]:
        return tuple(round3(v) for v in (self.precision, self.recall, self.f1, self.accuracy))

    def to_json(self) -> dict:
        p, r, f1, a = self.rounded()
        return {
            "run_id": self.run_id,
            "variant": self.variant,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "precision": p,
            "recall": r,
            "f1": f1,
            "accuracy": a,
        }


def _keep(variant: str):
    if variant == WITH_HALLUCINATION:
        return lambda u: True
    if variant == WITHOUT_HALLUCINATION:
        return lambda u: not u.is_hallucination
    raise ValueError(f"unknown variant {variant!r}")


def run_binary_metrics(units: Iterable[ScoredUnit], variant: str = WITH_HALLUCINATION, *, run_id: int | None = None) -> RunMetrics:
    """Collapse one run's units to TP/FP/FN/TN with No Role as the negative class."""
    keep = _keep(variant)
    units = [u for u in units if keep(u)]
    if run_id is None:
        run_id = units[0].run_id if units else 0
    tp = fp = fn = tn = 0
    for u in units:
        if u.predicted == NO_ROLE:
            if u.truth == NO_ROLE:
                tn += 1
            else:
                fn += 1
        elif u.predicted == u.truth:
            tp += 1
        else:
            fp += 1
    return RunMetrics(run_id, tp, fp, fn, tn, variant)


@dataclass(frozen=True)
class RoleConfusionMatrix:
    """Counts indexed ``cells[predicted][truth]``."""

    roles: tuple[str, ...]
    cells: Mapping[str, Mapping[str, int]]

    @property
    def rows(self) -> tuple[str, ...]:
        return (HALLUCINATED_ROLE, *self.roles, NO_ROLE)

    @property
    def columns(self) -> tuple[str, ...]:
        return (HALLUCINATED_CLASS, *self.roles, NO_ROLE)

    @classmethod
    def empty(cls, roles: Sequence[str]) -> "RoleConfusionMatrix":
        m = cls(tuple(roles), {})
        return cls(m.roles, {r: {c: 0 for c in m.columns} for r in m.rows})

    @classmethod
    def from_cells(cls, roles: Sequence[str], cells: Mapping[str, Mapping[str, int]]) -> "RoleConfusionMatrix":
        """Build from a partial ``{row: {column: count}}`` mapping; absent cells are 0."""
        m = cls.empty(roles)
        full = {r: dict(cols) for r, cols in m.cells.items()}
        for r, cols in cells.items():
            for c, n in cols.items():
                if r not in full or c not in full[r]:
                    raise ValueError(f"no cell ({r}, {c}) in a matrix over {list(roles)}")
                if n < 0:
                    raise ValueError("cell counts must be non-negative")
                full[r][c] = n
        return cls(m.roles, full)

    def cell(self, predicted: str, truth: str) -> int:
        return self.cells[predicted][truth]

    def _rows_cols(self, variant: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
        if variant == WITHOUT_HALLUCINATION:
            return self.rows[1:], self.columns[1:]
        return self.rows, self.columns

    def row_total(self, label: str, variant: str = WITH_HALLUCINATION) -> int:
        _, cols = self._rows_cols(variant)
        return sum(self.cells[label][c] for c in cols)

    def column_total(self, label: str, variant: str = WITH_HALLUCINATION) -> int:
        rows, _ = self._rows_cols(variant)
        return sum(self.cells[r][label] for r in rows)

    def grand_total(self, variant: str = WITH_HALLUCINATION) -> int:
        rows, cols = self._rows_cols(variant)
        return sum(self.cells[r][c] for r in rows for c in cols)

    def to_json(self) -> dict:
        return {
            "rows": list(self.rows),
            "columns": list(self.columns),
            "cells": [[self.cells[r][c] for c in self.columns] for r in self.rows],
        }


def aggregate_matrix(units: Iterable[ScoredUnit], roles: Sequence[str]) -> RoleConfusionMatrix:
    counts = Counter((u.predicted, u.truth) for u in units)
    nested: dict[str, dict[str, int]] = {}
    for (p, t), n in counts.items():
        nested.setdefault(p, {})[t] = n
    return RoleConfusionMatrix.from_cells(roles, nested)


@dataclass(frozen=True)
class MatrixMetrics:
    variant: str
    precision: dict[str, float | None]
    recall: dict[str, float | None]
    row_totals: dict[str, int]
    column_totals: dict[str, int]
    grand_total: int


def matrix_metrics(m: RoleConfusionMatrix, variant: str = WITH_HALLUCINATION) -> MatrixMetrics:
    """Per-label precision (row-wise) and recall (column-wise).

    Only labels that are both a row and a column have a diagonal; the
    hallucination pseudo-labels and zero denominators give ``None``.
    """
    rows, cols = m._rows_cols(variant)
    row_totals = {r: m.row_total(r, variant) for r in rows}
    col_totals = {c: m.column_total(c, variant) for c in cols}
    labels = (*m.roles, NO_ROLE)
    precision: dict[str, float | None] = {}
    recall: dict[str, float | None] = {}
    for label in labels:
        diag = m.cells[label][label]
        precision[label] = diag / row_totals[label] if row_totals[label] else None
        recall[label] = diag / col_totals[label] if col_totals[label] else None
    if variant == WITH_HALLUCINATION:
        precision[HALLUCINATED_ROLE] = None
        recall[HALLUCINATED_CLASS] = None
    return MatrixMetrics(variant, precision, recall, row_totals, col_totals, m.grand_total(variant))
