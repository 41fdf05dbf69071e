"""Plain-text renderers for the report tables (Markdown and CSV).

Both formats are built from the same list of formatted string cells, so the
numbers in a CSV file and its Markdown twin are identical by construction.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .evaluation import (
    HALLUCINATED_CLASS,
    HALLUCINATED_ROLE,
    WITH_HALLUCINATION,
    WITHOUT_HALLUCINATION,
    RoleConfusionMatrix,
    RunMetrics,
    matrix_metrics,
    round3,
)


def fmt_metric(x: float) -> str:
    """``0.4444`` -> ``.444``; zero (including zero-division) prints as ``0``."""
    if x == 0:
        return "0"
    s = f"{round3(x):.3f}"
    return s[1:] if s.startswith("0.") else s


def fmt_ratio(x: float | None) -> str:
    return "-" if x is None else fmt_metric(x)


@dataclass(frozen=True)
class Table:
    title: str
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def markdown(self) -> str:
        def line(cells: Sequence[str]) -> str:
            return "| " + " | ".join(c.replace("|", "\\|") for c in cells) + " |"

        out = [f"### {self.title}", "", line(self.header), line(["---"] * len(self.header))]
        out.extend(line(r) for r in self.rows)
        return "\n".join(out) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()


@dataclass(frozen=True)
class InstanceRow:
    instance_id: int
    project: str
    root_package: str
    participating_classes: int
    role_assignments: int
    root_package_classes: int
    note: str = ""


def instances_table(rows: Iterable[InstanceRow]) -> Table:
    return Table(
        "Design pattern instances",
        (
            "Instance",
            "Project",
            "Common Root Package",
            "# Classes Participating",
            "# Role Assignments",
            "# Classes in Root Package",
            "Note",
        ),
        tuple(
            (
                str(r.instance_id),
                r.project,
                r.root_package,
                str(r.participating_classes),
                str(r.role_assignments),
                str(r.root_package_classes),
                r.note,
            )
            for r in rows
        ),
    )


def runs_table(model: str, metrics: Mapping[int, Mapping[str, RunMetrics]]) -> Table:
    """One row per run with both metric variants side by side."""
    header = ["Run"]
    for label in ("with", "without"):
        header += [f"{label} {h}" for h in ("TP", "FP", "FN", "TN", "P", "R", "F1", "A")]
    rows = []
    for run_id in sorted(metrics):
        row = [str(run_id)]
        for variant in (WITH_HALLUCINATION, WITHOUT_HALLUCINATION):
            m = metrics[run_id][variant]
            row += [str(v) for v in m.counts]
            row += [fmt_metric(v) for v in (m.precision, m.recall, m.f1, m.accuracy)]
        rows.append(tuple(row))
    return Table(f"Results per prediction run ({model})", tuple(header), tuple(rows))


def matrix_table(model: str, m: RoleConfusionMatrix) -> Table:
    """Rows are predictions, columns ground truth; totals and ratios in the margins."""
    with_m = matrix_metrics(m, WITH_HALLUCINATION)
    without_m = matrix_metrics(m, WITHOUT_HALLUCINATION)
    header = (
        "Predicted \\ Truth",
        *m.columns,
        "Classification Overall (with)",
        "Precision (with)",
        "Classification Overall (without)",
        "Precision (without)",
    )
    rows = []
    for r in m.rows:
        hallucinated = r == HALLUCINATED_ROLE
        rows.append(
            (
                r,
                *(str(m.cell(r, c)) for c in m.columns),
                str(with_m.row_totals[r]),
                fmt_ratio(with_m.precision.get(r)),
                "-" if hallucinated else str(without_m.row_totals[r]),
                "-" if hallucinated else fmt_ratio(without_m.precision.get(r)),
            )
        )
    pad = ("", "", "", "")

    def col_total(mm, c: str) -> str:
        return "-" if c not in mm.column_totals else str(mm.column_totals[c])

    rows.append(("Truth overall (with)", *(col_total(with_m, c) for c in m.columns), str(with_m.grand_total), "", "", ""))
    rows.append(("Recall (with)", *(fmt_ratio(with_m.recall.get(c)) for c in m.columns), *pad))
    rows.append(("Truth overall (without)", *(col_total(without_m, c) for c in m.columns), "", "", str(without_m.grand_total), ""))
    rows.append(("Recall (without)", *(fmt_ratio(without_m.recall.get(c)) if c != HALLUCINATED_CLASS else "-" for c in m.columns), *pad))
    return Table(f"Confusion matrix ({model})", header, tuple(rows))


@dataclass(frozen=True)
class RoleCountRow:
    run_id: int
    example_id: int
    target_id: int
    example_counts: Mapping[str, int]
    target_counts: Mapping[str, int]
    predicted: Mapping[str, Mapping[str, int] | None]  # model -> counts, None when nothing was annotated


def roles_table(roles: Sequence[str], models: Sequence[str], rows: Iterable[RoleCountRow]) -> Table:
    header = ["Run", "Example (E)", "Target (T)"]
    for role in roles:
        header += [f"{role} E", f"{role} T", *(f"{role} {model}" for model in models)]
    out = []
    for r in rows:
        cells = [str(r.run_id), str(r.example_id), str(r.target_id)]
        for role in roles:
            cells += [str(r.example_counts.get(role, 0)), str(r.target_counts.get(role, 0))]
            for model in models:
                counts = r.predicted.get(model)
                cells.append("-" if counts is None else str(counts.get(role, 0)))
        out.append(tuple(cells))
    return Table("Role counts per example and run", tuple(header), tuple(out))

