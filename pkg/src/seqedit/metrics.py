"""Evaluation quantities and table emission.

Per-domain error, the unweighted average over seen domains (awer), relative
reduction versus a baseline (werr, percent), long-format stage curves, and
deterministic CSV/JSON rendering with 6-significant-digit decimals.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ValidationError


def awer(errors: Sequence[float]) -> float:
    """Unweighted arithmetic mean of per-domain errors (equal domain weights)."""
    values = list(errors)
    if not values:
        raise ValidationError("awer needs at least one domain error")
    if any(not math.isfinite(v) for v in values):
        raise ValidationError(f"non-finite domain error in {values!r}")
    return sum(values) / len(values)


def werr(baseline_awer: float, method_awer: float) -> float:
    """Relative error reduction vs the baseline, in percent (negative = worse)."""
    if not (math.isfinite(baseline_awer) and baseline_awer > 0):
        raise ValidationError(f"baseline awer must be positive, got {baseline_awer!r}")
    return 100.0 * (baseline_awer - method_awer) / baseline_awer


@dataclass
class MetricsTable:
    """Per-domain errors at one stage plus their aggregate.

    ``per_domain`` covers exactly the seen domains 0..stage; ``awer`` is
    their equal-weight mean; ``werr`` is present only when a baseline at the
    same stage was supplied.
    """

    stage: int
    method: str
    per_domain: dict[int, float]
    awer: float
    werr: float | None = None

    def __post_init__(self):
        if not self.per_domain:
            raise ValidationError("empty per_domain map")
        expected = list(range(self.stage + 1))
        if sorted(self.per_domain) != expected:
            raise ValidationError(
                f"metrics must cover exactly domains {expected}, got {sorted(self.per_domain)}"
            )
        mean = awer([self.per_domain[d] for d in expected])
        if abs(mean - self.awer) > 1e-6:
            raise ValidationError(f"awer {self.awer} != mean of per-domain errors {mean}")

    @classmethod
    def build(
        cls,
        stage: int,
        method: str,
        per_domain: Mapping[int, float],
        baseline_awer: float | None = None,
    ) -> "MetricsTable":
        errors = dict(per_domain)
        mean = awer([errors[d] for d in sorted(errors)])
        reduction = None if baseline_awer is None else werr(baseline_awer, mean)
        return cls(stage=stage, method=method, per_domain=errors, awer=mean, werr=reduction)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "method": self.method,
            "per_domain": {str(d): self.per_domain[d] for d in sorted(self.per_domain)},
            "awer": self.awer,
            "werr": self.werr,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MetricsTable":
        return cls(
            stage=obj["stage"],
            method=obj["method"],
            per_domain={int(d): float(v) for d, v in obj["per_domain"].items()},
            awer=obj["awer"],
            werr=obj.get("werr"),
        )


def stage_curve(records_by_method: Mapping[str, Sequence]) -> list[tuple[int, str, float]]:
    """Long-format (stage, method, awer) rows for plotting the seen-domain curve.

    Every method must cover a contiguous stage range 1..T; the awer of the
    edited checkpoint is reported.
    """
    rows = []
    for method, records in records_by_method.items():
        if not records:
            raise ValidationError(f"method {method!r} has no stage records")
        stages = sorted(r.stage for r in records)
        expected = list(range(1, max(stages) + 1))
        if stages != expected:
            missing = sorted(set(expected) - set(stages))
            raise ValidationError(f"method {method!r} missing stages {missing}")
        for record in sorted(records, key=lambda r: r.stage):
            rows.append((record.stage, method, record.metrics_edited.awer))
    return rows


def fmt_num(value) -> str:
    """Render a number with 6 significant digits; ints stay integral."""
    if value is None:
        return ""
    if isinstance(value, bool):
        raise ValidationError("bool is not a table value")
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".6g")


@dataclass
class Table:
    """A rectangular table with a fixed column order."""

    columns: list[str]
    rows: list[list]

    def render_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValidationError(f"row width {len(row)} != {len(self.columns)} columns")
            lines.append(",".join(v if isinstance(v, str) else fmt_num(v) for v in row))
        return "\n".join(lines) + "\n"

    def render_markdown(self) -> str:
        cells = [[v if isinstance(v, str) else fmt_num(v) for v in row] for row in self.rows]
        widths = [
            max(len(self.columns[i]), *(len(r[i]) for r in cells)) if cells else len(self.columns[i])
            for i in range(len(self.columns))
        ]
        def line(parts):
            return "| " + " | ".join(p.ljust(w) for p, w in zip(parts, widths)) + " |"
        out = [line(self.columns), line(["-" * w for w in widths])]
        out.extend(line(r) for r in cells)
        return "\n".join(out) + "\n"


def metrics_to_table(tables: Sequence[MetricsTable], n_domains: int | None = None) -> Table:
    """Fixed-order comparison table: stage, method, domain_0.., awer, werr."""
    if not tables:
        raise ValidationError("no metrics tables to render")
    if n_domains is None:
        n_domains = max(t.stage for t in tables) + 1
    columns = ["stage", "method"] + [f"domain_{d}" for d in range(n_domains)] + ["awer", "werr"]
    rows = []
    for t in tables:
        row = [t.stage, t.method]
        row += [t.per_domain.get(d) for d in range(n_domains)]
        row += [t.awer, t.werr]
        rows.append(row)
    return Table(columns, rows)


def curve_to_table(rows: Sequence[tuple[int, str, float]]) -> Table:
    return Table(["stage", "method", "awer"], [[s, m, a] for s, m, a in rows])


def emit(table, fmt: str, destination: str | Path) -> None:
    """Write a table as CSV or JSON; identical inputs yield identical bytes.

    Accepts a Table (CSV rows / JSON list of row objects) or a list of
    MetricsTable (JSON mirrors the MetricsTable field names exactly).
    """
    if fmt not in ("csv", "json"):
        raise ValidationError(f"unknown emit format {fmt!r}")
    if isinstance(table, Table):
        if fmt == "csv":
            payload = table.render_csv()
        else:
            payload = json.dumps(
                [dict(zip(table.columns, row)) for row in table.rows], indent=2, sort_keys=False
            ) + "\n"
    else:
        tables = list(table)
        if not tables or not all(isinstance(t, MetricsTable) for t in tables):
            raise ValidationError("emit expects a Table or a non-empty list of MetricsTable")
        if fmt == "csv":
            payload = metrics_to_table(tables).render_csv()
        else:
            payload = json.dumps([t.to_dict() for t in tables], indent=2) + "\n"
    Path(destination).write_text(payload)
