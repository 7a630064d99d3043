"""Static SVG emission for benchmark results: box plots, rankings, overlays.

A tiny hand-rolled writer keeps the output byte-deterministic for a given
input, which makes golden-file comparisons meaningful; no plotting toolkit
metadata or timestamps ever enter the files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

MODEL_COLORS = {
    "siqnn-nn": "#1f77b4",
    "siqnn": "#17becf",
    "nn": "#ff7f0e",
    "gpr": "#2ca02c",
    "svr": "#d62728",
}
_FALLBACK_COLORS = ("#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22")


def _color(model: str, i: int) -> str:
    return MODEL_COLORS.get(model, _FALLBACK_COLORS[i % len(_FALLBACK_COLORS)])


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class SvgCanvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        ]

    def line(self, x1, y1, x2, y2, color="#000", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{width}"{d}/>'
        )

    def rect(self, x, y, w, h, fill="none", stroke="#000"):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            f'fill="{fill}" stroke="{stroke}"/>'
        )

    def circle(self, x, y, r, fill="#000"):
        self.parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}" fill="{fill}"/>')

    def cross(self, x, y, size, color="#000"):
        s = size / 2
        self.line(x - s, y - s, x + s, y + s, color, 1.5)
        self.line(x - s, y + s, x + s, y - s, color, 1.5)

    def polyline(self, xs, ys, color, width=1.5, dash=None):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{d}/>'
        )

    def text(self, x, y, s, size=11, anchor="start", color="#000"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" font-family="sans-serif" '
            f'text-anchor="{anchor}" fill="{color}">{s}</text>'
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.parts + ["</svg>"]))


class _Axes:
    """Linear pixel mapping with optional log10 y."""

    def __init__(self, x0, y0, w, h, xlim, ylim, logy=False):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xlim, self.ylim, self.logy = xlim, ylim, logy

    def x(self, v):
        lo, hi = self.xlim
        return self.x0 + (v - lo) / (hi - lo or 1.0) * self.w

    def y(self, v):
        lo, hi = self.ylim
        if self.logy:
            v, lo, hi = np.log10(v), np.log10(lo), np.log10(hi)
        return self.y0 + self.h - (v - lo) / (hi - lo or 1.0) * self.h

    def frame(self, canvas, xlabel, ylabel, title=""):
        canvas.rect(self.x0, self.y0, self.w, self.h, stroke="#333")
        canvas.text(self.x0 + self.w / 2, self.y0 + self.h + 32, xlabel, anchor="middle")
        canvas.text(self.x0 - 46, self.y0 + self.h / 2, ylabel, anchor="middle")
        if title:
            canvas.text(self.x0 + self.w / 2, self.y0 - 8, title, anchor="middle", size=13)

    def y_ticks_log(self, canvas):
        lo = int(np.floor(np.log10(self.ylim[0])))
        hi = int(np.ceil(np.log10(self.ylim[1])))
        for e in range(lo, hi + 1):
            v = 10.0**e
            if self.ylim[0] <= v <= self.ylim[1]:
                py = self.y(v)
                canvas.line(self.x0 - 4, py, self.x0, py)
                canvas.text(self.x0 - 7, py + 4, f"1e{e}", anchor="end", size=10)


def _legend(canvas, models, x, y):
    for i, model in enumerate(models):
        canvas.line(x, y + 16 * i, x + 18, y + 16 * i, _color(model, i), 3)
        canvas.text(x + 24, y + 4 + 16 * i, model, size=10)


def svg_boxplot(rows: list[dict], path: str | Path, title: str = "") -> None:
    """MSE box plots grouped by training-set size, one box per model."""
    if not rows:
        raise ValueError("no box-plot rows to draw")
    sizes = sorted({r["size"] for r in rows})
    models = sorted({r["model"] for r in rows})
    vals = [v for r in rows for v in
            [r["whisker_lo"], r["whisker_hi"], r["median"]] + r["outliers"]]
    vals = [v for v in vals if v > 0]
    ylim = (min(vals) / 3, max(vals) * 3)
    canvas = SvgCanvas(760, 420)
    ax = _Axes(70, 40, 650, 320, (-0.5, len(sizes) - 0.5), ylim, logy=True)
    ax.frame(canvas, "training set size", "test MSE", title or "MSE by model and size")
    ax.y_ticks_log(canvas)
    slot = 0.8 / max(1, len(models))
    for si, size in enumerate(sizes):
        canvas.text(ax.x(si), ax.y0 + ax.h + 16, str(size), anchor="middle", size=10)
        for mi, model in enumerate(models):
            row = next((r for r in rows if r["size"] == size and r["model"] == model), None)
            if row is None:
                continue
            cx = ax.x(si - 0.4 + slot * (mi + 0.5))
            half_w = slot * 0.35 * ax.w / len(sizes)
            color = _color(model, mi)
            y_q1, y_q3 = ax.y(max(row["q1"], ylim[0])), ax.y(max(row["q3"], ylim[0]))
            canvas.rect(cx - half_w, y_q3, 2 * half_w, max(0.5, y_q1 - y_q3),
                        fill="none", stroke=color)
            y_med = ax.y(max(row["median"], ylim[0]))
            canvas.line(cx - half_w, y_med, cx + half_w, y_med, color, 2)
            canvas.line(cx, y_q3, cx, ax.y(max(row["whisker_hi"], ylim[0])), color)
            canvas.line(cx, y_q1, cx, ax.y(max(row["whisker_lo"], ylim[0])), color)
            for out in row["outliers"]:
                if out > 0:
                    canvas.circle(cx, ax.y(min(max(out, ylim[0]), ylim[1])), 1.5, color)
    _legend(canvas, models, 640, 52)
    canvas.save(path)


def svg_ranking(rows: list[dict], path: str | Path, title: str = "") -> None:
    """Mean model rank vs training-set size with SEM error bars."""
    if not rows:
        raise ValueError("no ranking rows to draw")
    sizes = sorted({r["size"] for r in rows})
    models = sorted({r["model"] for r in rows})
    n_models = max(5, len(models))
    canvas = SvgCanvas(720, 400)
    ax = _Axes(70, 40, 600, 300, (min(sizes) - 0.3, max(sizes) + 0.3),
               (0.8, n_models + 0.2))
    ax.frame(canvas, "training set size", "average rank", title or "Average model rank")
    for rank in range(1, n_models + 1):
        py = ax.y(rank)
        canvas.line(ax.x0 - 4, py, ax.x0, py)
        canvas.text(ax.x0 - 7, py + 4, str(rank), anchor="end", size=10)
        canvas.line(ax.x0, py, ax.x0 + ax.w, py, "#eee")
    for size in sizes:
        canvas.text(ax.x(size), ax.y0 + ax.h + 16, str(size), anchor="middle", size=10)
    for mi, model in enumerate(models):
        pts = sorted((r["size"], r["mean_rank"], r["sem"]) for r in rows
                     if r["model"] == model)
        if not pts:
            continue
        color = _color(model, mi)
        xs = [ax.x(p[0]) for p in pts]
        ys = [ax.y(p[1]) for p in pts]
        canvas.polyline(xs, ys, color, 2)
        for (size, mean, sem), px, py in zip(pts, xs, ys):
            canvas.circle(px, py, 2.5, color)
            if sem > 0:
                canvas.line(px, ax.y(mean - sem), px, ax.y(mean + sem), color)
    _legend(canvas, models, 600, 52)
    canvas.save(path)


def svg_overlay(r_grid: np.ndarray, exact: np.ndarray,
                predictions: dict[str, np.ndarray], train_r: np.ndarray,
                train_y: np.ndarray, path: str | Path, title: str = "",
                ylabel: str = "target") -> None:
    """Dissociation-curve overlay: exact dashed, models solid, train crosses."""
    all_y = np.concatenate([exact] + [np.asarray(p) for p in predictions.values()])
    pad = 0.08 * (all_y.max() - all_y.min() or 1.0)
    ylim = (float(all_y.min() - pad), float(all_y.max() + pad))
    canvas = SvgCanvas(720, 400)
    ax = _Axes(70, 40, 600, 300, (float(r_grid.min()), float(r_grid.max())), ylim)
    ax.frame(canvas, "R (Angstrom)", ylabel, title)
    for frac in (0.0, 0.5, 1.0):
        rv = r_grid.min() + frac * (r_grid.max() - r_grid.min())
        canvas.text(ax.x(rv), ax.y0 + ax.h + 16, f"{rv:.2f}", anchor="middle", size=10)
        yv = ylim[0] + frac * (ylim[1] - ylim[0])
        canvas.text(ax.x0 - 7, ax.y(yv) + 4, f"{yv:.3f}", anchor="end", size=10)
    canvas.polyline([ax.x(v) for v in r_grid], [ax.y(v) for v in exact], "#000", 1.5,
                    dash="5,4")
    for mi, (model, pred) in enumerate(sorted(predictions.items())):
        canvas.polyline([ax.x(v) for v in r_grid], [ax.y(v) for v in np.asarray(pred)],
                        _color(model, mi), 1.8)
    for rv, yv in zip(train_r, train_y):
        canvas.cross(ax.x(rv), ax.y(yv), 9, "#000")
    _legend(canvas, sorted(predictions), 600, 52)
    canvas.save(path)
