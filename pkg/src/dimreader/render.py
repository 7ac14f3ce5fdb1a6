"""SVG and JSON output for generalised-axis plots."""

from __future__ import annotations

import json
from xml.sax.saxutils import escape

import numpy as np

from .field import IsolineSet, ScalarGrid, padded_bounds

PALETTE = (
    "#e41a1c",
    "#377eb8",
    "#4daf4a",
    "#984ea3",
    "#ff7f00",
    "#a65628",
    "#f781bf",
    "#999999",
    "#66c2a5",
    "#ffd92f",
)


def _fmt(x):
    return f"{x:.3f}"


def axes_document(points, vectors, isolines, grid: ScalarGrid | None = None, extra=None):
    """The JSON-ready dict: points, vectors, grid and isolines (plus ``extra`` keys)."""
    doc = {
        "points": np.asarray(points, dtype=float).tolist(),
        "vectors": np.asarray(getattr(vectors, "vectors", vectors), dtype=float).tolist(),
        "grid": grid.to_dict() if grid is not None else None,
        "isolines": isolines.to_list() if isinstance(isolines, IsolineSet) else list(isolines or []),
    }
    if extra:
        doc.update(extra)
    return doc


def dumps(doc):
    """Canonical JSON text (fixed key order, repr floats), so equal inputs give equal bytes."""
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def render_svg(points, vectors=None, isolines=None, labels=None, bounds=None, size=600, vector_scale=None, title=None):
    """SVG with one ``circle`` per point and one ``path`` per isoline.

    Isolines are shaded from light (low level) to dark (high level), so a
    point moves from light to dark lines as the perturbed quantity grows.
    """
    points = np.asarray(points, dtype=float)
    if bounds is None:
        bounds = padded_bounds(points)
    x0, x1, y0, y1 = bounds
    margin = 20.0
    span = max(x1 - x0, y1 - y0)
    scale = (size - 2 * margin) / span

    def px(p):
        return margin + (p[..., 0] - x0) * scale, size - margin - (p[..., 1] - y0) * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
    ]
    if title:
        out.append(f"<title>{escape(str(title))}</title>")
    out.append(f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>')

    lines = list(isolines) if isolines is not None else []
    if lines:
        levels = sorted({line.level for line in lines})
        rank = {lv: i for i, lv in enumerate(levels)}
        out.append('<g class="isolines" fill="none" stroke-width="1.5">')
        for line in lines:
            t = rank[line.level] / max(len(levels) - 1, 1)
            shade = int(round(220 - 190 * t))
            xs, ys = px(np.asarray(line.polyline))
            d = "M" + " L".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(xs, ys))
            if line.closed:
                d += " Z"
            out.append(
                f'<path class="isoline" data-level="{line.level!r}" '
                f'stroke="rgb({shade},{shade},{shade})" d="{d}"/>'
            )
        out.append("</g>")

    if vectors is not None:
        vecs = np.asarray(getattr(vectors, "vectors", vectors), dtype=float)
        lengths = np.linalg.norm(vecs, axis=1)
        if vector_scale is None:
            top = lengths.max() if len(lengths) else 0.0
            vector_scale = 0.05 * span / top if top > 0 else 0.0
        tips = points + vecs * vector_scale
        ax, ay = px(points)
        bx, by = px(tips)
        out.append('<g class="vectors" stroke="#555555" stroke-width="0.8">')
        for a, b, c, d in zip(ax, ay, bx, by):
            out.append(f'<line class="vector" x1="{_fmt(a)}" y1="{_fmt(b)}" x2="{_fmt(c)}" y2="{_fmt(d)}"/>')
        out.append("</g>")

    if labels is not None:
        classes = {c: i for i, c in enumerate(dict.fromkeys(labels))}
        colors = [PALETTE[classes[c] % len(PALETTE)] for c in labels]
    else:
        colors = ["#333333"] * len(points)
    cx, cy = px(points)
    out.append('<g class="points" stroke="black" stroke-width="0.3">')
    for a, b, col in zip(cx, cy, colors):
        out.append(f'<circle class="point" cx="{_fmt(a)}" cy="{_fmt(b)}" r="3" fill="{col}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_axes(points, vectors, isolines, labels=None, grid=None, show_vectors=True, extra=None):
    """Return ``(svg_text, json_document)`` for one generalised-axis plot."""
    bounds = grid.bounds if grid is not None else None
    svg = render_svg(points, vectors if show_vectors else None, isolines, labels, bounds=bounds)
    return svg, axes_document(points, vectors, isolines, grid, extra)
