"""Human-readable tables from consolidated metric CSVs."""

from __future__ import annotations

import csv
from pathlib import Path

__all__ = ["render_metric_table"]

METRICS = ("w1", "kl", "pehe")


def _parse_report_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"method", "arm", "split"}
        if reader.fieldnames is None or not required.issubset(
            reader.fieldnames
        ):
            raise ValueError(f"{path}: not a consolidated metrics CSV")
        return list(reader)


def _fmt(mean: str, std: str) -> str:
    if mean in ("", None):
        return "-"
    m = float(mean)
    s = float(std) if std not in ("", None) else 0.0
    return f"{m:.3f} +/- {s:.3f}"


def render_metric_table(report_csvs, output_path) -> Path:
    """Write one aligned text table; the lowest mean per metric within each
    (arm, split) group is marked with '*'. Deterministic for fixed input."""
    rows = []
    for path in report_csvs:
        rows.extend(_parse_report_csv(path))
    if not rows:
        raise ValueError("no rows in the given report CSVs")
    rows.sort(key=lambda r: (r["arm"], r["split"], r["method"]))

    best = {}
    for row in rows:
        for metric in METRICS:
            value = row.get(f"{metric}_mean") or ""
            if value == "":
                continue
            key = (row["arm"], row["split"], metric)
            current = best.get(key)
            if current is None or float(value) < current:
                best[key] = float(value)

    header = ["method", "arm", "split"] + [f"{m}_mean +/- std" for m in METRICS]
    table_rows = [header]
    for row in rows:
        cells = [row["method"], row["arm"], row["split"]]
        for metric in METRICS:
            cell = _fmt(row.get(f"{metric}_mean"), row.get(f"{metric}_std"))
            key = (row["arm"], row["split"], metric)
            value = row.get(f"{metric}_mean") or ""
            if value != "" and best.get(key) == float(value):
                cell += " *"
            cells.append(cell)
        table_rows.append(cells)

    widths = [max(len(r[c]) for r in table_rows) for c in range(len(header))]
    lines = []
    for i, cells in enumerate(table_rows):
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    out = Path(output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    return out
