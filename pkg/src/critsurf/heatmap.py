"""Deterministic SVG rendering of cell matrices and rank scatter plots.

The files are built by plain string assembly with fixed attribute order,
fixed float formatting, and no timestamps or generated identifiers, so
rendering the same specification twice yields byte-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = ["HeatmapSpec", "emit_heatmap", "emit_rank_scatter"]

_POSITIVE_RGB = (178, 24, 43)  # warm end of the diverging scale
_NEGATIVE_RGB = (33, 102, 172)  # cool end
_NEUTRAL_RGB = (255, 255, 255)

_GRID_PX = 440
_MARGIN_LEFT = 70
_MARGIN_TOP = 50
_MARGIN_BOTTOM = 60
_LEGEND_GAP = 30
_LEGEND_W = 22
_LEGEND_TEXT_W = 90


@dataclass(frozen=True, eq=False)
class HeatmapSpec:
    """A square matrix plus rendering choices.

    The color scale is diverging and symmetric about zero: the largest
    absolute entry saturates both ends, zero is rendered neutral.
    """

    values: np.ndarray
    out_path: str
    title: str = ""
    annotate: bool = False

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] < 1:
            raise InputError(f"values must be a nonempty square matrix, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("heatmap values must be finite")
        object.__setattr__(self, "values", values.copy())


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _blend(fraction: float) -> str:
    """Color for a signed fraction in [-1, 1]; 0 maps to neutral."""
    if fraction >= 0:
        target = _POSITIVE_RGB
        w = min(fraction, 1.0)
    else:
        target = _NEGATIVE_RGB
        w = min(-fraction, 1.0)
    rgb = tuple(round(n + (t - n) * w) for n, t in zip(_NEUTRAL_RGB, target))
    return f"#{rgb[0]:02x}{rgb[1]:02x}{rgb[2]:02x}"


def _svg_document(width: float, height: float, body: list[str]) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _axis_elements(width_px: float) -> list[str]:
    parts = []
    x0, y0 = _MARGIN_LEFT, _MARGIN_TOP
    parts.append(
        f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(_GRID_PX)}" '
        f'height="{_fmt(_GRID_PX)}" fill="none" stroke="#333333" stroke-width="1"/>'
    )
    for frac in (0.0, 0.5, 1.0):
        x = x0 + frac * _GRID_PX
        y = y0 + (1.0 - frac) * _GRID_PX
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y0 + _GRID_PX + 18)}" font-family="sans-serif" '
            f'font-size="12" text-anchor="middle" fill="#333333">{_fmt(frac)}</text>'
        )
        parts.append(
            f'<text x="{_fmt(x0 - 8)}" y="{_fmt(y + 4)}" font-family="sans-serif" '
            f'font-size="12" text-anchor="end" fill="#333333">{_fmt(frac)}</text>'
        )
    parts.append(
        f'<text x="{_fmt(x0 + _GRID_PX / 2)}" y="{_fmt(y0 + _GRID_PX + 40)}" '
        f'font-family="sans-serif" font-size="13" text-anchor="middle" '
        f'fill="#333333">u</text>'
    )
    parts.append(
        f'<text x="{_fmt(x0 - 45)}" y="{_fmt(y0 + _GRID_PX / 2)}" '
        f'font-family="sans-serif" font-size="13" text-anchor="middle" '
        f'fill="#333333">v</text>'
    )
    return parts


def emit_heatmap(spec: HeatmapSpec) -> None:
    """Render the matrix on the unit square and write an SVG file.

    Row index runs along u (horizontal), column index along v
    (vertical, bottom to top), matching the orientation of the
    cell-averaged surfaces.  A legend bar documents the scale.
    """
    values = spec.values
    k = values.shape[0]
    vmax = float(np.abs(values).max())
    scale = vmax if vmax > 0.0 else 1.0
    cell = _GRID_PX / k
    width = _MARGIN_LEFT + _GRID_PX + _LEGEND_GAP + _LEGEND_W + _LEGEND_TEXT_W
    height = _MARGIN_TOP + _GRID_PX + _MARGIN_BOTTOM

    body: list[str] = []
    if spec.title:
        body.append(
            f'<text x="{_fmt(_MARGIN_LEFT + _GRID_PX / 2)}" y="30" '
            f'font-family="sans-serif" font-size="15" text-anchor="middle" '
            f'fill="#111111">{spec.title}</text>'
        )
    for s in range(k):
        for t in range(k):
            x = _MARGIN_LEFT + s * cell
            y = _MARGIN_TOP + (k - 1 - t) * cell
            color = _blend(values[s, t] / scale)
            body.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell)}" '
                f'height="{_fmt(cell)}" fill="{color}" stroke="#cccccc" '
                f'stroke-width="0.5"/>'
            )
            if spec.annotate:
                body.append(
                    f'<text x="{_fmt(x + cell / 2)}" y="{_fmt(y + cell / 2 + 3)}" '
                    f'font-family="sans-serif" font-size="9" text-anchor="middle" '
                    f'fill="#222222">{_fmt(values[s, t])}</text>'
                )
    body.extend(_axis_elements(width))

    # legend: vertical diverging bar, cool at the bottom, warm at the top
    lx = _MARGIN_LEFT + _GRID_PX + _LEGEND_GAP
    body.append(
        '<defs><linearGradient id="scale" x1="0" y1="1" x2="0" y2="0">'
        f'<stop offset="0" stop-color="{_blend(-1.0)}"/>'
        f'<stop offset="0.5" stop-color="{_blend(0.0)}"/>'
        f'<stop offset="1" stop-color="{_blend(1.0)}"/>'
        "</linearGradient></defs>"
    )
    body.append(
        f'<rect x="{_fmt(lx)}" y="{_fmt(_MARGIN_TOP)}" width="{_fmt(_LEGEND_W)}" '
        f'height="{_fmt(_GRID_PX)}" fill="url(#scale)" stroke="#333333" '
        f'stroke-width="1"/>'
    )
    for frac, label in ((1.0, vmax), (0.5, 0.0), (0.0, -vmax)):
        y = _MARGIN_TOP + (1.0 - frac) * _GRID_PX
        body.append(
            f'<text x="{_fmt(lx + _LEGEND_W + 6)}" y="{_fmt(y + 4)}" '
            f'font-family="sans-serif" font-size="11" text-anchor="start" '
            f'fill="#333333">{_fmt(label)}</text>'
        )
    with open(spec.out_path, "w", encoding="utf-8") as fh:
        fh.write(_svg_document(width, height, body))


def emit_rank_scatter(r: np.ndarray, s: np.ndarray, out_path: str, title: str = "") -> None:
    """Scatter plot of the rank-transformed pairs (r_i/n, s_i/n)."""
    r = np.asarray(r)
    s = np.asarray(s)
    if r.shape != s.shape or r.ndim != 1:
        raise InputError("rank vectors must be one-dimensional and of equal length")
    n = r.shape[0]
    width = _MARGIN_LEFT + _GRID_PX + _LEGEND_GAP + _LEGEND_W + _LEGEND_TEXT_W
    height = _MARGIN_TOP + _GRID_PX + _MARGIN_BOTTOM
    body: list[str] = []
    if title:
        body.append(
            f'<text x="{_fmt(_MARGIN_LEFT + _GRID_PX / 2)}" y="30" '
            f'font-family="sans-serif" font-size="15" text-anchor="middle" '
            f'fill="#111111">{title}</text>'
        )
    for i in range(n):
        x = _MARGIN_LEFT + (r[i] / n) * _GRID_PX
        y = _MARGIN_TOP + (1.0 - s[i] / n) * _GRID_PX
        body.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="2.5" fill="#2166ac" '
            f'fill-opacity="0.7"/>'
        )
    body.extend(_axis_elements(width))
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(_svg_document(width, height, body))
