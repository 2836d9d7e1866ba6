# medialfit/core/shapes.py
"""
Formes paramétriques pour les expériences : échantillons orientés (abscisse
curviligne uniforme en 2D, réseau de Fibonacci en 3D), boucles du polygone
de vérité terrain (2D) et, quand il existe, l'axe médian analytique.

Toutes les formes sont centrées à l'origine. Boucles extérieures
anti-horaires, trous horaires : la normale (dy, −dx)/‖·‖ est alors sortante.
"""
from __future__ import annotations

import inspect
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .cloud import OrientedPointCloud
from .errors import UnknownShape

log = logging.getLogger(__name__)

_DENSE = 4096   # résolution des tables d'abscisse curviligne
_POLY = 2048    # sommets par boucle courbe du polygone de vérité terrain


# ──────────────────────────────────────────────────────────────────────────────
# Types
# ──────────────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class MedialOracle:
    """distance(x) : distance à l'axe médian exact ; thickness(x) : distance au bord."""

    distance: Callable[[np.ndarray], np.ndarray]
    thickness: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ShapeSample:
    name: str
    cloud: OrientedPointCloud
    loops: List[np.ndarray] = field(default_factory=list)   # vide en 3D
    oracle: Optional[MedialOracle] = None

    @property
    def diag(self) -> float:
        if self.loops:
            pts = np.vstack(self.loops)
            return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        return self.cloud.diag


# une boucle courbe : t ∈ [0, 1) → (points (k, 2), dérivées (k, 2))
Curve = Callable[[np.ndarray], tuple]


# ──────────────────────────────────────────────────────────────────────────────
# Échantillonnage
# ──────────────────────────────────────────────────────────────────────────────
def _curve_length(curve: Curve) -> float:
    t = np.linspace(0.0, 1.0, _DENSE + 1)
    xy, _ = curve(t)
    return float(np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1)))


def _sample_curve(curve: Curve, n: int):
    t = np.linspace(0.0, 1.0, _DENSE + 1)
    xy, _ = curve(t)
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(xy, axis=0), axis=1))])
    targets = (np.arange(n) + 0.5) / n * s[-1]
    tt = np.interp(targets, s, t)
    pts, der = curve(tt)
    nrm = np.column_stack([der[:, 1], -der[:, 0]])
    return pts, nrm / np.linalg.norm(nrm, axis=1, keepdims=True)


def _polyline_length(vertices: np.ndarray) -> float:
    closed = np.vstack([vertices, vertices[:1]])
    return float(np.sum(np.linalg.norm(np.diff(closed, axis=0), axis=1)))


def _sample_polyline(vertices: np.ndarray, n: int):
    closed = np.vstack([vertices, vertices[:1]])
    seg = np.diff(closed, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    s = np.concatenate([[0.0], np.cumsum(lengths)])
    targets = (np.arange(n) + 0.5) / n * s[-1]
    k = np.clip(np.searchsorted(s, targets, side="right") - 1, 0, len(seg) - 1)
    u = (targets - s[k]) / lengths[k]
    pts = closed[k] + u[:, None] * seg[k]
    nrm = np.column_stack([seg[k, 1], -seg[k, 0]]) / lengths[k, None]
    return pts, nrm


def _split(n: int, lengths: List[float]) -> List[int]:
    """Répartit n échantillons au prorata des longueurs (somme exacte)."""
    total = sum(lengths)
    counts = [int(round(n * L / total)) for L in lengths[:-1]]
    counts.append(n - sum(counts))
    return counts


def _build_2d(name: str, n: int, loops: list, oracle: Optional[MedialOracle] = None) -> ShapeSample:
    """loops : liste de ("curve", fn) ou ("poly", sommets)."""
    lengths = [(_curve_length(obj) if kind == "curve" else _polyline_length(obj)) for kind, obj in loops]
    P, N, polys = [], [], []
    for (kind, obj), k in zip(loops, _split(n, lengths)):
        if kind == "curve":
            pts, nrm = _sample_curve(obj, k) if k else (np.empty((0, 2)), np.empty((0, 2)))
            polys.append(obj(np.arange(_POLY) / _POLY)[0])
        else:
            pts, nrm = _sample_polyline(obj, k) if k else (np.empty((0, 2)), np.empty((0, 2)))
            polys.append(np.asarray(obj, dtype=float))
        P.append(pts)
        N.append(nrm)
    cloud = OrientedPointCloud(np.vstack(P), np.vstack(N))
    log.debug("forme %s : %d échantillons, %d boucle(s)", name, len(cloud), len(polys))
    return ShapeSample(name=name, cloud=cloud, loops=polys, oracle=oracle)


def _circle_curve(radius: float, clockwise: bool = False) -> Curve:
    sign = -1.0 if clockwise else 1.0

    def fn(t):
        th = sign * 2.0 * math.pi * np.asarray(t, dtype=float)
        xy = radius * np.column_stack([np.cos(th), np.sin(th)])
        der = sign * radius * np.column_stack([-np.sin(th), np.cos(th)])
        return xy, der

    return fn


def _segments_distance(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance de chaque x (k, 2) à l'union des segments [a_i, b_i]."""
    x = np.atleast_2d(x)
    ab = b - a
    den = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    ax = x[:, None, :] - a[None, :, :]
    u = np.clip(np.einsum("kij,ij->ki", ax, ab) / den, 0.0, 1.0)
    proj = a[None] + u[..., None] * ab[None]
    return np.min(np.linalg.norm(x[:, None, :] - proj, axis=2), axis=1)


# ──────────────────────────────────────────────────────────────────────────────
# Formes 2D
# ──────────────────────────────────────────────────────────────────────────────
def circle(n: int, radius: float = 1.0) -> ShapeSample:
    if radius <= 0:
        raise ValueError("radius doit être > 0")
    oracle = MedialOracle(
        distance=lambda x: np.linalg.norm(np.atleast_2d(x), axis=1),
        thickness=lambda x: radius - np.linalg.norm(np.atleast_2d(x), axis=1),
    )
    return _build_2d("circle", n, [("curve", _circle_curve(radius))], oracle)


def ellipse(n: int, a: float = 1.0, b: float = 0.5) -> ShapeSample:
    if a <= 0 or b <= 0:
        raise ValueError("a et b doivent être > 0")

    def fn(t):
        th = 2.0 * math.pi * np.asarray(t, dtype=float)
        return (np.column_stack([a * np.cos(th), b * np.sin(th)]),
                np.column_stack([-a * np.sin(th), b * np.cos(th)]))

    return _build_2d("ellipse", n, [("curve", fn)])


def rectangle(n: int, width: float = 2.0, height: float = 1.0) -> ShapeSample:
    if width <= 0 or height <= 0:
        raise ValueError("width et height doivent être > 0")
    w, h = width / 2.0, height / 2.0
    verts = np.array([[-w, -h], [w, -h], [w, h], [-w, h]])
    # squelette : segment central + 4 bissectrices des coins
    m = abs(w - h)
    if width >= height:
        e0, e1 = np.array([-m, 0.0]), np.array([m, 0.0])
    else:
        e0, e1 = np.array([0.0, -m]), np.array([0.0, m])
    ends = [e0 if np.linalg.norm(v - e0) <= np.linalg.norm(v - e1) else e1 for v in verts]
    a = np.vstack([e0, verts])
    b = np.vstack([e1, np.array(ends)])
    oracle = MedialOracle(
        distance=lambda x: _segments_distance(x, a, b),
        thickness=lambda x: np.minimum(w - np.abs(np.atleast_2d(x)[:, 0]), h - np.abs(np.atleast_2d(x)[:, 1])),
    )
    return _build_2d("rectangle", n, [("poly", verts)], oracle)


def star(n: int, radius: float = 1.0, amplitude: float = 0.3, arms: int = 5) -> ShapeSample:
    """Courbe polaire r(θ) = radius·(1 + amplitude·cos(arms·θ))."""
    if radius <= 0 or not 0 <= amplitude < 1 or int(arms) < 1:
        raise ValueError("paramètres d'étoile invalides")
    arms = int(arms)

    def fn(t):
        th = 2.0 * math.pi * np.asarray(t, dtype=float)
        r = radius * (1.0 + amplitude * np.cos(arms * th))
        dr = -radius * amplitude * arms * np.sin(arms * th)
        xy = np.column_stack([r * np.cos(th), r * np.sin(th)])
        der = np.column_stack([dr * np.cos(th) - r * np.sin(th), dr * np.sin(th) + r * np.cos(th)])
        return xy, der

    return _build_2d("star", n, [("curve", fn)])


def star_radius(theta, radius: float = 1.0, amplitude: float = 0.3, arms: int = 5):
    return radius * (1.0 + amplitude * np.cos(int(arms) * np.asarray(theta, dtype=float)))


def annulus(n: int, r_in: float = 0.5, r_out: float = 1.0) -> ShapeSample:
    if not 0 < r_in < r_out:
        raise ValueError("0 < r_in < r_out requis")
    mid = 0.5 * (r_in + r_out)
    oracle = MedialOracle(
        distance=lambda x: np.abs(np.linalg.norm(np.atleast_2d(x), axis=1) - mid),
        thickness=lambda x: np.minimum(
            np.linalg.norm(np.atleast_2d(x), axis=1) - r_in,
            r_out - np.linalg.norm(np.atleast_2d(x), axis=1),
        ),
    )
    loops = [("curve", _circle_curve(r_out)), ("curve", _circle_curve(r_in, clockwise=True))]
    return _build_2d("annulus", n, loops, oracle)


def notched_box(n: int, width: float = 2.0, height: float = 1.0, notch_depth: float = 0.4,
                notch_width: float = 0.4) -> ShapeSample:
    """Rectangle entaillé au milieu du bord supérieur."""
    if not (0 < notch_depth < height and 0 < notch_width < width):
        raise ValueError("l'entaille doit tenir dans la boîte")
    w, h = width / 2.0, height / 2.0
    nw = notch_width / 2.0
    verts = np.array([
        [-w, -h], [w, -h], [w, h], [nw, h],
        [nw, h - notch_depth], [-nw, h - notch_depth], [-nw, h], [-w, h],
    ])
    return _build_2d("notched_box", n, [("poly", verts)])


# ──────────────────────────────────────────────────────────────────────────────
# Formes 3D
# ──────────────────────────────────────────────────────────────────────────────
def _fibonacci(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def sphere(n: int, radius: float = 1.0) -> ShapeSample:
    if radius <= 0:
        raise ValueError("radius doit être > 0")
    u = _fibonacci(n)
    oracle = MedialOracle(
        distance=lambda x: np.linalg.norm(np.atleast_2d(x), axis=1),
        thickness=lambda x: radius - np.linalg.norm(np.atleast_2d(x), axis=1),
    )
    return ShapeSample(name="sphere", cloud=OrientedPointCloud(radius * u, u), oracle=oracle)


def ellipsoid(n: int, a: float = 1.0, b: float = 0.7, c: float = 0.5) -> ShapeSample:
    if min(a, b, c) <= 0:
        raise ValueError("demi-axes > 0 requis")
    u = _fibonacci(n)
    axes = np.array([a, b, c])
    P = u * axes
    N = P / (axes * axes)
    N /= np.linalg.norm(N, axis=1, keepdims=True)
    return ShapeSample(name="ellipsoid", cloud=OrientedPointCloud(P, N))


# ──────────────────────────────────────────────────────────────────────────────
# Registre
# ──────────────────────────────────────────────────────────────────────────────
SHAPES: Dict[str, Callable[..., ShapeSample]] = {
    "circle": circle,
    "ellipse": ellipse,
    "rectangle": rectangle,
    "star": star,
    "annulus": annulus,
    "notched_box": notched_box,
    "sphere": sphere,
    "ellipsoid": ellipsoid,
}


def shape_params(name: str) -> Dict[str, object]:
    """Paramètres documentés d'une forme et leurs valeurs par défaut."""
    if name not in SHAPES:
        raise UnknownShape(f"forme inconnue : {name!r} (connues : {', '.join(SHAPES)})")
    sig = inspect.signature(SHAPES[name])
    return {k: v.default for k, v in sig.parameters.items() if k != "n"}


def make_shape(name: str, n: int, **params) -> ShapeSample:
    known = shape_params(name)
    unknown = set(params) - set(known)
    if unknown:
        raise UnknownShape(f"paramètre(s) inconnu(s) pour {name} : {', '.join(sorted(unknown))}")
    typed = {k: type(known[k])(v) for k, v in params.items()}
    return SHAPES[name](n, **typed)
