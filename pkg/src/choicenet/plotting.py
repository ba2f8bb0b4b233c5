"""Dependency-free SVG line/scatter plots for experiment results."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 150, 40, 50

PALETTE = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
]


@dataclass
class Series:
    name: str
    xs: list
    ys: list
    style: str = "line"  # line | scatter | line+markers

    def __post_init__(self):
        if len(self.xs) != len(self.ys):
            raise DataError(f"series {self.name!r}: x/y length mismatch")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


@dataclass
class SvgPlot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list = field(default_factory=list)

    def add(self, s: Series):
        self.series.append(s)

    def render(self) -> str:
        if not self.series or all(len(s.xs) == 0 for s in self.series):
            raise DataError("plot: no data to draw")
        all_x = np.concatenate([np.asarray(s.xs, dtype=float) for s in self.series])
        all_y = np.concatenate([np.asarray(s.ys, dtype=float) for s in self.series])
        x_lo, x_hi = float(all_x.min()), float(all_x.max())
        y_lo, y_hi = float(all_y.min()), float(all_y.max())
        if x_hi == x_lo:
            x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
        if y_hi == y_lo:
            y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
        pad_y = 0.05 * (y_hi - y_lo)
        y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

        pw = WIDTH - MARGIN_L - MARGIN_R
        ph = HEIGHT - MARGIN_T - MARGIN_B

        def px(x):
            return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw

        def py(y):
            return MARGIN_T + ph - (y - y_lo) / (y_hi - y_lo) * ph

        parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        ]
        # axes
        parts.append(
            f'<line x1="{MARGIN_L}" y1="{MARGIN_T + ph}" x2="{MARGIN_L + pw}" '
            f'y2="{MARGIN_T + ph}" stroke="black"/>'
        )
        parts.append(
            f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
            f'y2="{MARGIN_T + ph}" stroke="black"/>'
        )
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            xv = x_lo + frac * (x_hi - x_lo)
            yv = y_lo + frac * (y_hi - y_lo)
            parts.append(
                f'<text x="{_fmt(px(xv))}" y="{MARGIN_T + ph + 18}" font-size="11" '
                f'text-anchor="middle">{_fmt(xv)}</text>'
            )
            parts.append(
                f'<text x="{MARGIN_L - 6}" y="{_fmt(py(yv) + 4)}" font-size="11" '
                f'text-anchor="end">{_fmt(yv)}</text>'
            )
        if self.title:
            parts.append(
                f'<text x="{WIDTH / 2}" y="22" font-size="15" '
                f'text-anchor="middle">{_esc(self.title)}</text>'
            )
        if self.xlabel:
            parts.append(
                f'<text x="{MARGIN_L + pw / 2}" y="{HEIGHT - 12}" font-size="12" '
                f'text-anchor="middle">{_esc(self.xlabel)}</text>'
            )
        if self.ylabel:
            cx, cy = 18, MARGIN_T + ph / 2
            parts.append(
                f'<text x="{cx}" y="{cy}" font-size="12" text-anchor="middle" '
                f'transform="rotate(-90 {cx} {cy})">{_esc(self.ylabel)}</text>'
            )

        for i, s in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            pts = [(px(float(x)), py(float(y))) for x, y in zip(s.xs, s.ys)]
            if s.style in ("line", "line+markers") and len(pts) > 1:
                d = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
                parts.append(
                    f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>'
                )
            if s.style in ("scatter", "line+markers") or len(pts) == 1:
                for x, y in pts:
                    parts.append(
                        f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="2.5" fill="{color}"/>'
                    )
            # legend entry
            ly = MARGIN_T + 14 + 18 * i
            lx = MARGIN_L + pw + 14
            parts.append(
                f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" '
                f'stroke="{color}" stroke-width="2"/>'
            )
            parts.append(
                f'<text x="{lx + 24}" y="{ly + 4}" font-size="11">{_esc(s.name)}</text>'
            )
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    def save(self, path):
        svg = self.render()
        with open(path, "w", encoding="utf-8") as f:
            f.write(svg)
