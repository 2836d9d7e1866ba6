# medialfit/features/render.py
"""
Figures statiques.
2D : SVG en calques (union des disques, splats des points orientés, centres).
3D : PLY ASCII, un sommet par centre avec une propriété scalaire `radius`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import svgwrite

from ..core.cloud import OrientedPointCloud

log = logging.getLogger(__name__)

UNION_FILL = "#4c72b0"
SPLAT_STROKE = "#222222"
CENTER_FILL = "#c44e52"


@dataclass(frozen=True)
class Viewport:
    """Monde → pixels : échelle uniforme, y vers le haut, marge constante."""

    lo: tuple
    scale: float
    width: float
    height: float
    margin: float

    @classmethod
    def fit(cls, lo, hi, size: int = 800, margin: float = 20.0) -> "Viewport":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        span = hi - lo
        extent = float(span.max())
        if not extent > 0.0:
            raise ValueError("bbox dégénérée")
        scale = (size - 2.0 * margin) / extent
        return cls(
            lo=(float(lo[0]), float(lo[1])),
            scale=scale,
            width=2.0 * margin + float(span[0]) * scale,
            height=2.0 * margin + float(span[1]) * scale,
            margin=margin,
        )

    def to_px(self, xy) -> np.ndarray:
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        x = self.margin + (xy[:, 0] - self.lo[0]) * self.scale
        y = self.height - self.margin - (xy[:, 1] - self.lo[1]) * self.scale
        return np.column_stack([x, y])


def render_svg(cloud: OrientedPointCloud, centers: np.ndarray, radii: np.ndarray, out: str | Path,
               size: int = 800, splat: float = 0.01) -> Viewport:
    """`splat` : demi-longueur des segments tangents, en fraction de la diagonale."""
    if cloud.dim != 2:
        raise ValueError("render_svg attend un nuage 2D")
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    radii = np.asarray(radii, dtype=float).reshape(-1)
    vp = Viewport.fit(cloud.bbox_min, cloud.bbox_max, size=size)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)

    dwg = svgwrite.Drawing(str(out), size=(f"{vp.width:.3f}px", f"{vp.height:.3f}px"), profile="full")
    dwg.viewbox(0, 0, vp.width, vp.height)
    dwg.add(dwg.rect(insert=(0, 0), size=(vp.width, vp.height), fill="white"))

    union = dwg.add(dwg.g(id="union", fill=UNION_FILL, fill_opacity=0.35, stroke="none"))
    for (x, y), r in zip(vp.to_px(centers) if len(centers) else [], radii):
        union.add(dwg.circle(center=(float(x), float(y)), r=float(r * vp.scale)))

    points = dwg.add(dwg.g(id="points", stroke=SPLAT_STROKE, stroke_width=1))
    half = splat * cloud.diag
    tangents = np.column_stack([-cloud.normals[:, 1], cloud.normals[:, 0]])
    a = vp.to_px(cloud.points - half * tangents)
    b = vp.to_px(cloud.points + half * tangents)
    for (x0, y0), (x1, y1) in zip(a, b):
        points.add(dwg.line(start=(float(x0), float(y0)), end=(float(x1), float(y1))))

    dots = dwg.add(dwg.g(id="centers", fill=CENTER_FILL))
    for x, y in (vp.to_px(centers) if len(centers) else []):
        dots.add(dwg.circle(center=(float(x), float(y)), r=1.5))

    dwg.save(pretty=True)
    log.info("SVG : %d points, %d sphères → %s", len(cloud), len(centers), out)
    return vp


def write_ply(centers: np.ndarray, radii: np.ndarray, out: str | Path) -> Path:
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    radii = np.asarray(radii, dtype=float).reshape(-1)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="ascii", newline="\n") as f:
        f.write("ply\nformat ascii 1.0\ncomment medialfit medial spheres\n")
        f.write(f"element vertex {len(centers)}\n")
        for name in ("x", "y", "z", "radius"):
            f.write(f"property double {name}\n")
        f.write("end_header\n")
        for (x, y, z), r in zip(centers, radii):
            f.write(f"{x:.17g} {y:.17g} {z:.17g} {r:.17g}\n")
    log.info("PLY : %d centres → %s", len(centers), out)
    return out
