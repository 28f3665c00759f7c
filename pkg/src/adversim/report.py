"""Report assembly and deterministic emission as JSON, CSV, and SVG."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import IoError

SVG_W, SVG_H = 640, 400
MARGIN = 54
SERIES_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                 "#8c564b", "#e377c2", "#7f7f7f")


@dataclass
class Report:
    success_rows: list[dict] = field(default_factory=list)
    realism_rows: list[dict] = field(default_factory=list)
    training_rows: list[dict] = field(default_factory=list)
    search_curves: list[tuple[str, list[tuple[float, float]]]] = field(default_factory=list)
    training_curves: list[tuple[str, list[tuple[float, float]]]] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)


SUCCESS_COLUMNS = ("method", "n_attackers", "agent", "success_rate", "mean_cost_s")
REALISM_COLUMNS = ("method", "accel_kl", "abnormal_jerk_rate")
TRAINING_COLUMNS = ("dataset", "condition", "crash_rate", "crash_half_variance",
                    "route_completion", "completion_half_variance")


def _csv_text(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def svg_line_chart(series, title: str, xlabel: str, ylabel: str) -> str:
    """Hand-rolled SVG line chart: one <polyline> per series, fixed layout,
    no timestamps, so identical inputs yield identical bytes."""
    xs = [x for _, pts in series for x, _ in pts]
    ys = [y for _, pts in series for _, y in pts]
    if xs:
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0
    if x_hi - x_lo < 1e-12:
        x_hi = x_lo + 1.0
    if y_hi - y_lo < 1e-12:
        y_hi = y_lo + 1.0

    def px(x):
        return MARGIN + (x - x_lo) / (x_hi - x_lo) * (SVG_W - 2 * MARGIN)

    def py(y):
        return SVG_H - MARGIN - (y - y_lo) / (y_hi - y_lo) * (SVG_H - 2 * MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}">',
        f'<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>',
        f'<text x="{SVG_W / 2:.1f}" y="20" text-anchor="middle" '
        f'font-size="14">{title}</text>',
        f'<line x1="{MARGIN}" y1="{SVG_H - MARGIN}" x2="{SVG_W - MARGIN}" '
        f'y2="{SVG_H - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" '
        f'y2="{SVG_H - MARGIN}" stroke="black"/>',
        f'<text x="{SVG_W / 2:.1f}" y="{SVG_H - 12}" text-anchor="middle" '
        f'font-size="11">{xlabel}</text>',
        f'<text x="14" y="{SVG_H / 2:.1f}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {SVG_H / 2:.1f})">{ylabel}</text>',
        f'<text x="{MARGIN}" y="{SVG_H - MARGIN + 14}" font-size="9">{x_lo:.6g}</text>',
        f'<text x="{SVG_W - MARGIN}" y="{SVG_H - MARGIN + 14}" text-anchor="end" '
        f'font-size="9">{x_hi:.6g}</text>',
        f'<text x="{MARGIN - 4}" y="{SVG_H - MARGIN}" text-anchor="end" '
        f'font-size="9">{y_lo:.6g}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 4}" text-anchor="end" '
        f'font-size="9">{y_hi:.6g}</text>',
    ]
    for i, (label, pts) in enumerate(series):
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        if pts:
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
            parts.append(f'<polyline points="{coords}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{SVG_W - MARGIN + 4}" y="{MARGIN + 14 * i}" '
                     f'font-size="10" fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(report: Report, out_dir: str,
                formats: set[str] = frozenset({"json", "csv", "svg"})) -> list[str]:
    """Write the report files; byte-identical output for identical inputs."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        written: list[str] = []

        if "json" in formats:
            obj = {
                "success_rates": report.success_rows,
                "realism": report.realism_rows,
                "training": report.training_rows,
                "search_curves": [{"label": lbl, "points": pts}
                                  for lbl, pts in report.search_curves],
                "training_curves": [{"label": lbl, "points": pts}
                                    for lbl, pts in report.training_curves],
                "provenance": report.provenance,
                "thresholds": {"accel_range_mps2": [-8.0, 8.0], "accel_bins": 21,
                               "laplace_alpha": 1.0, "jerk_threshold_mps3": 10.0},
            }
            path = os.path.join(out_dir, "report.json")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(json.dumps(obj, sort_keys=True, indent=2))
                fh.write("\n")
            written.append(path)

        if "csv" in formats:
            for name, cols, rows in (
                    ("success_rates.csv", SUCCESS_COLUMNS, report.success_rows),
                    ("realism.csv", REALISM_COLUMNS, report.realism_rows),
                    ("training.csv", TRAINING_COLUMNS, report.training_rows)):
                path = os.path.join(out_dir, name)
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write(_csv_text(cols, rows))
                written.append(path)

        if "svg" in formats:
            path = os.path.join(out_dir, "search_curve.svg")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(svg_line_chart(report.search_curves,
                                        "Attack success rate by search iteration",
                                        "iteration", "success rate"))
            written.append(path)
            path = os.path.join(out_dir, "training_curve.svg")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(svg_line_chart(report.training_curves,
                                        "Test metrics by training step",
                                        "training step", "metric value"))
            written.append(path)
        return written
    except OSError as exc:
        raise IoError(f"cannot write report: {exc}") from exc
