"""Result tables, rendered as CSV for machines and as aligned Markdown for people."""

from __future__ import annotations
import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return str(float(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _md_cell(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, Fraction):
        v = float(v)
    if isinstance(v, float):
        return f"{v:.3f}" if abs(v) < 1e6 else f"{v:.4g}"
    return str(v)


@dataclass
class Table:
    """Rows of values under fixed column names. None marks a cell with no value (e.g. a skipped measurement).

    Cells listed in `bold` as (row, column name) are highlighted in the Markdown rendering.

    """

    columns: Sequence[str]
    rows: list[tuple] = field(default_factory=list)
    title: str | None = None
    bold: set[tuple[int, str]] = field(default_factory=set)

    def add(self, *values) -> int:
        assert len(values) == len(self.columns), f"row has {len(values)} values for {len(self.columns)} columns"
        self.rows.append(tuple(values))
        return len(self.rows) - 1

    def column(self, name: str) -> list:
        i = list(self.columns).index(name)
        return [row[i] for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_csv_cell(v) for v in row])
        return buf.getvalue()

    def to_markdown(self) -> str:
        cells = []
        for r, row in enumerate(self.rows):
            line = []
            for name, v in zip(self.columns, row):
                text = _md_cell(v)
                line.append(f"**{text}**" if (r, name) in self.bold else text)
            cells.append(line)
        widths = [max([len(c)] + [len(line[i]) for line in cells]) for i, c in enumerate(self.columns)]

        def fmt(values):
            return "| " + " | ".join(v.ljust(w) for v, w in zip(values, widths)) + " |"

        lines = [f"### {self.title}", ""] if self.title else []
        lines.append(fmt(self.columns))
        lines.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
        lines.extend(fmt(line) for line in cells)
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        """fmt is "csv" or "md"."""
        return self.to_csv() if fmt == "csv" else self.to_markdown()
