"""Deterministic SVG scatterplots.

Output is plain text assembled with fixed-precision coordinates and a fixed
categorical palette, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import numpy as np

# classic 10-color categorical palette
PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
)

CANVAS = 800
MARGIN = 40
LEGEND_WIDTH = 110
POINT_RADIUS = 2.0


def _coord(x: float) -> str:
    return f"{x:.3f}"


def scatter_svg(points: np.ndarray, labels: np.ndarray | None = None) -> str:
    """One circle per point; categorical label colors and a legend when
    labels are given, single color otherwise."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"points must be (N, 2), got {points.shape}")
    if labels is not None and len(labels) != len(points):
        raise ValueError("labels length does not match point count")

    span = CANVAS - 2 * MARGIN
    xmin, ymin = points.min(axis=0)
    xmax, ymax = points.max(axis=0)
    scale = max(xmax - xmin, ymax - ymin)
    if scale <= 0:
        scale = 1.0
    # isotropic mapping, y up, cloud centered
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    sx = lambda x: MARGIN + span * (0.5 + (x - cx) / scale)
    sy = lambda y: MARGIN + span * (0.5 - (y - cy) / scale)

    width = CANVAS + (LEGEND_WIDTH if labels is not None else 0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{CANVAS}" '
        f'viewBox="0 0 {width} {CANVAS}">',
        f'<rect width="{width}" height="{CANVAS}" fill="white"/>',
    ]
    if labels is None:
        for x, y in points:
            out.append(
                f'<circle cx="{_coord(sx(x))}" cy="{_coord(sy(y))}" '
                f'r="{POINT_RADIUS}" fill="{PALETTE[0]}"/>'
            )
    else:
        labels = np.asarray(labels)
        uniq = sorted(set(int(v) for v in labels))
        color = {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(uniq)}
        for (x, y), lab in zip(points, labels):
            out.append(
                f'<circle cx="{_coord(sx(x))}" cy="{_coord(sy(y))}" '
                f'r="{POINT_RADIUS}" fill="{color[int(lab)]}"/>'
            )
        for i, lab in enumerate(uniq):
            ly = MARGIN + 18 * i
            # rect swatches keep the circle count equal to the point count
            out.append(
                f'<rect x="{CANVAS + 10}" y="{ly - 5}" width="10" height="10" '
                f'fill="{color[lab]}"/>'
            )
            out.append(
                f'<text x="{CANVAS + 28}" y="{ly + 4}" font-family="sans-serif" '
                f'font-size="12">{lab}</text>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save_scatter_svg(points: np.ndarray, labels: np.ndarray | None, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(scatter_svg(points, labels))


def precision_recall_svg(rows: list[tuple[int, float, float]]) -> str:
    """Polyline chart of a precision/recall curve over k (unit y axis)."""
    if not rows:
        raise ValueError("empty curve")
    span = CANVAS - 2 * MARGIN
    kmax = max(k for k, _, _ in rows)
    sx = lambda k: MARGIN + span * (k - 1) / max(kmax - 1, 1)
    sy = lambda v: MARGIN + span * (1.0 - v)

    def polyline(values, color):
        pts = " ".join(f"{_coord(sx(k))},{_coord(sy(v))}" for k, v in values)
        return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" '
        f'viewBox="0 0 {CANVAS} {CANVAS}">',
        f'<rect width="{CANVAS}" height="{CANVAS}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" '
        'fill="none" stroke="#cccccc"/>',
        polyline([(k, p) for k, p, _ in rows], PALETTE[0]),
        polyline([(k, r) for k, _, r in rows], PALETTE[1]),
        f'<text x="{MARGIN}" y="{MARGIN - 10}" font-family="sans-serif" font-size="12" '
        f'fill="{PALETTE[0]}">precision</text>',
        f'<text x="{MARGIN + 80}" y="{MARGIN - 10}" font-family="sans-serif" font-size="12" '
        f'fill="{PALETTE[1]}">recall</text>',
        f'<text x="{CANVAS - MARGIN - 10}" y="{CANVAS - MARGIN + 16}" '
        f'font-family="sans-serif" font-size="12">k={kmax}</text>',
        "</svg>",
    ]
    return "\n".join(out) + "\n"
