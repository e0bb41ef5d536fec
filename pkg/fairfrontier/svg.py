"""
fairfrontier SVG Rendering

Hand-emitted SVG of the estimated feasible set, its supporting hyperplanes,
the frontier estimate with its confidence band, and the R̂, B̂, F̂ markers.
Coordinates are printed with fixed precision so the output is byte-stable.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import RiskPoint


WIDTH = 640
HEIGHT = 640
MARGIN = 56

MARKER_COLORS = {"R": "#c0392b", "B": "#2471a3", "F": "#1e8449", "e*": "#7d3c98"}


def _fmt(v: float) -> str:
    return f"{v:.3f}"


@dataclass(frozen=True)
class PlotFrame:
    """Affine map from risk coordinates to the SVG canvas (e_b grows upward)."""
    lo: Tuple[float, float]
    hi: Tuple[float, float]

    @classmethod
    def around(cls, *point_sets: np.ndarray, pad: float = 0.05) -> "PlotFrame":
        pts = [np.atleast_2d(p) for p in point_sets if p is not None and np.size(p)]
        if not pts:
            return cls((0.0, 0.0), (1.0, 1.0))
        allpts = np.vstack(pts)
        lo, hi = allpts.min(axis=0), allpts.max(axis=0)
        span = float(max((hi - lo).max(), 1e-6))
        center = (lo + hi) / 2.0
        half = span * (0.5 + pad)
        return cls((float(center[0] - half), float(center[1] - half)),
                   (float(center[0] + half), float(center[1] + half)))

    @property
    def scale(self) -> float:
        return (WIDTH - 2 * MARGIN) / (self.hi[0] - self.lo[0])

    def x(self, v: float) -> float:
        return MARGIN + (v - self.lo[0]) * self.scale

    def y(self, v: float) -> float:
        return HEIGHT - MARGIN - (v - self.lo[1]) * self.scale

    def xy(self, p) -> str:
        return f"{_fmt(self.x(p[0]))},{_fmt(self.y(p[1]))}"

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.hi[0] - self.lo[0], self.hi[1] - self.lo[1]))


def hyperplane_segment(q: np.ndarray, h: float, frame: PlotFrame) -> Tuple[np.ndarray, np.ndarray]:
    """Two points on {z : qᵀz = h} spanning the plot window."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    center = np.array([(frame.lo[0] + frame.hi[0]) / 2.0, (frame.lo[1] + frame.hi[1]) / 2.0])
    foot = center + (h - q @ center) * q
    along = np.array([-q[1], q[0]]) * frame.diagonal
    return foot - along, foot + along


def render_svg(vertices: np.ndarray, hyperplanes: Sequence[Tuple[np.ndarray, float]] = (),
               frontier: Optional[np.ndarray] = None, band: Optional[np.ndarray] = None,
               band_spacing: Tuple[float, float] = (0.0, 0.0),
               markers: Optional[Dict[str, RiskPoint]] = None, title: str = "",
               version: str = "") -> str:
    """
    Build the SVG document.

    Every supporting hyperplane becomes one <line class="hyperplane">, so the
    element count equals len(hyperplanes).
    """
    markers = markers or {}
    marker_pts = np.array([m.as_array() for m in markers.values()]) if markers else None
    frame = PlotFrame.around(vertices, frontier, band, marker_pts)
    out: List[str] = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- fairfrontier {version} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        "<defs><clipPath id=\"plot\">"
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}"/>'
        "</clipPath></defs>",
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH // 2}" y="{MARGIN // 2}" text-anchor="middle" font-size="14">{title}</text>')

    out.append('<g clip-path="url(#plot)">')
    if band is not None and np.size(band):
        w = max(band_spacing[0] * frame.scale, 1.0)
        hgt = max(band_spacing[1] * frame.scale, 1.0)
        out.append('<g class="band" fill="#f5b7b1" fill-opacity="0.6">')
        for p in np.atleast_2d(band):
            out.append(f'<rect x="{_fmt(frame.x(p[0]) - w / 2)}" y="{_fmt(frame.y(p[1]) - hgt / 2)}" '
                       f'width="{_fmt(w)}" height="{_fmt(hgt)}"/>')
        out.append("</g>")
    if vertices.shape[0]:
        points = " ".join(frame.xy(v) for v in vertices)
        out.append(f'<polygon class="feasible" points="{points}" fill="#d6eaf8" fill-opacity="0.7" '
                   f'stroke="#1b4f72" stroke-width="1.5"/>')
    for q, h in hyperplanes:
        a, b = hyperplane_segment(q, h, frame)
        out.append(f'<line class="hyperplane" x1="{_fmt(frame.x(a[0]))}" y1="{_fmt(frame.y(a[1]))}" '
                   f'x2="{_fmt(frame.x(b[0]))}" y2="{_fmt(frame.y(b[1]))}" stroke="#aab7b8" stroke-width="0.5"/>')
    lo = max(frame.lo[0], frame.lo[1])
    hi = min(frame.hi[0], frame.hi[1])
    if hi > lo:
        out.append(f'<line class="diagonal" x1="{_fmt(frame.x(lo))}" y1="{_fmt(frame.y(lo))}" '
                   f'x2="{_fmt(frame.x(hi))}" y2="{_fmt(frame.y(hi))}" stroke="black" stroke-dasharray="4 3"/>')
    if frontier is not None and np.size(frontier):
        out.append('<g class="frontier" fill="#e67e22">')
        for p in np.atleast_2d(frontier):
            out.append(f'<circle cx="{_fmt(frame.x(p[0]))}" cy="{_fmt(frame.y(p[1]))}" r="1.5"/>')
        out.append("</g>")
    out.append("</g>")

    for name, point in markers.items():
        color = MARKER_COLORS.get(name, "black")
        cx, cy = frame.x(point.e_r), frame.y(point.e_b)
        out.append(f'<circle class="marker" id="marker-{name}" cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="4" '
                   f'fill="{color}"/>')
        out.append(f'<text x="{_fmt(cx + 6)}" y="{_fmt(cy - 6)}" font-size="12" fill="{color}">{name}</text>')

    left, bottom = MARGIN, HEIGHT - MARGIN
    out += [
        f'<line class="axis" x1="{left}" y1="{bottom}" x2="{WIDTH - MARGIN}" y2="{bottom}" stroke="black"/>',
        f'<line class="axis" x1="{left}" y1="{bottom}" x2="{left}" y2="{MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH - MARGIN}" y="{bottom + 32}" text-anchor="end" font-size="12">e_r</text>',
        f'<text x="{left - 36}" y="{MARGIN}" font-size="12">e_b</text>',
        f'<text x="{left}" y="{bottom + 16}" font-size="10">{_fmt(frame.lo[0])}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{bottom + 16}" text-anchor="end" font-size="10">{_fmt(frame.hi[0])}</text>',
        f'<text x="{left - 4}" y="{bottom}" text-anchor="end" font-size="10">{_fmt(frame.lo[1])}</text>',
        f'<text x="{left - 4}" y="{MARGIN + 10}" text-anchor="end" font-size="10">{_fmt(frame.hi[1])}</text>',
        "</svg>",
    ]
    return "\n".join(out) + "\n"


def write_svg(document: str, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document)
    return path
