"""Minimal static SVG line charts with +-1 sd error bars."""
from __future__ import annotations

import csv
import math
from collections import OrderedDict
from pathlib import Path
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 40, 50


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _ticks(lo: float, hi: float, k: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / k))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= k:
            step *= m
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def line_chart(series: "OrderedDict[str, list[tuple[float, float, float]]]", path, *,
               xlabel: str, ylabel: str, title: str = "", logx: bool = False,
               hlines: list[tuple[str, float]] = ()) -> Path:
    """Write an SVG with one polyline per series; points are ``(x, y, sd)``."""
    if not series:
        raise ValueError("nothing to plot")
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    xs = [tx(x) for pts in series.values() for x, _, _ in pts]
    ys = [y + s for pts in series.values() for _, y, s in pts]
    ys += [y - s for pts in series.values() for _, y, s in pts]
    ys += [v for _, v in hlines]
    xs = [v for v in xs if math.isfinite(v)]
    ys = [v for v in ys if math.isfinite(v)]
    if not xs or not ys:
        raise ValueError("no finite values to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x0 == x1:
        x0, x1 = x0 - 1, x1 + 1
    if y0 == y1:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (tx(x) - x0) / (x1 - x0) * pw

    def py(y):
        return TOP + (y1 - y) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{LEFT + pw / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _ticks(x0, x1):
        xv = 10 ** t if logx else t
        X = LEFT + (t - x0) / (x1 - x0) * pw
        out.append(f'<line x1="{X:.1f}" y1="{TOP + ph}" x2="{X:.1f}" y2="{TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{X:.1f}" y="{TOP + ph + 16}" text-anchor="middle">{_fmt(xv)}</text>')
    for t in _ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{LEFT - 4}" y1="{Y:.1f}" x2="{LEFT}" y2="{Y:.1f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{Y + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>')

    legend_y = TOP + 10
    for k, (label, value) in enumerate(hlines):
        color = PALETTE[(len(series) + k) % len(PALETTE)]
        Y = py(value)
        out.append(f'<line x1="{LEFT}" y1="{Y:.1f}" x2="{LEFT + pw}" y2="{Y:.1f}" '
                   f'stroke="{color}" stroke-dasharray="5,4"/>')
        out.append(f'<text x="{LEFT + pw + 10}" y="{legend_y:.1f}" fill="{color}">{escape(label)}</text>')
        legend_y += 15
    for k, (label, pts) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = sorted(pts)
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y, _ in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        for x, y, s in pts:
            if s > 0 and math.isfinite(s):
                X = px(x)
                out.append(f'<line x1="{X:.2f}" y1="{py(y - s):.2f}" x2="{X:.2f}" y2="{py(y + s):.2f}" '
                           f'stroke="{color}" stroke-opacity="0.6"/>')
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.5" fill="{color}"/>')
        out.append(f'<text x="{LEFT + pw + 10}" y="{legend_y:.1f}" fill="{color}">{escape(label)}</text>')
        legend_y += 15
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


def plot_csv(results_csv, out_path, x: str, y: str, series: list[str] | None = None,
             err: str | None = None, where: dict[str, str] | None = None,
             logx: bool = False, title: str = "") -> Path:
    """Plot columns of an (aggregated) results CSV.

    ``series`` columns split rows into lines (label ``col=value``), ``err``
    names the sd column, and ``where`` keeps only rows whose columns equal
    the given strings.
    """
    rows = read_csv(results_csv)
    if not rows:
        raise ValueError(f"{results_csv}: no data rows")
    series = series or []
    where = where or {}
    cols = set(rows[0])
    for c in [x, y, *series, *([err] if err else []), *where]:
        if c not in cols:
            raise ValueError(f"unknown column {c!r}; available: {sorted(cols)}")
    rows = [r for r in rows if all(r[k] == v for k, v in where.items())]
    if not rows:
        raise ValueError("no rows match the filter")
    lines: OrderedDict[str, list] = OrderedDict()
    for r in rows:
        label = ", ".join(f"{c}={r[c]}" for c in series) or y
        sd = float(r[err]) if err else 0.0
        lines.setdefault(label, []).append((float(r[x]), float(r[y]), 0.0 if math.isnan(sd) else sd))
    return line_chart(lines, out_path, xlabel=x, ylabel=y, logx=logx, title=title)
