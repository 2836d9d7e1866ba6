# medialfit/core/fields.py
"""
Champs scalaires purs : noyau compact, distance signée MLS, et distances de
pénétration sphère/plan, sphère/point et leur mélange.

Les fonctions publiques prennent une `Sphere` ; les variantes `*_terms`
travaillent sur des tableaux (k points d'un coup) et renvoient aussi les
lignes jacobiennes ∇_s = [∇_c, ∂/∂r] utilisées par le solveur.
Convention de rampe : R(x) = max(x, 0), H(x) = 1 si x > 0, sinon 0.
"""
from __future__ import annotations

from typing import Tuple

import numpy as np

from .cloud import OrientedPointCloud, neighbors_within
from .errors import EmptySupport
from .models import Sphere


def ramp(x):
    return np.maximum(x, 0.0)


def heaviside(x):
    return (np.asarray(x) > 0.0).astype(float)


def _scalar(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


# ──────────────────────────────────────────────────────────────────────────────
# Noyau
# ──────────────────────────────────────────────────────────────────────────────
def kernel(x, h: float):
    """φ(x, h) = (1 − (x/h)²)⁴ si x < h, 0 sinon. C¹ en x = h."""
    if not h > 0.0:
        raise ValueError(f"h doit être > 0 (reçu {h})")
    t = np.asarray(x, dtype=float) / h
    out = np.where(t < 1.0, (1.0 - t * t) ** 4, 0.0)
    return _scalar(out)


# ──────────────────────────────────────────────────────────────────────────────
# SDF MLS (diagnostic uniquement : valide près de ∂O)
# ──────────────────────────────────────────────────────────────────────────────
def mls_sdf(x, cloud: OrientedPointCloud, h: float) -> float:
    x = np.asarray(x, dtype=float)
    idx = neighbors_within(cloud, x, h)
    if not idx:
        raise EmptySupport(f"aucun point à moins de h={h:g} de {x.tolist()}")
    P = cloud.points[idx]
    N = cloud.normals[idx]
    w = kernel(np.linalg.norm(x - P, axis=1), h)
    total = float(np.sum(w))
    if total == 0.0:
        raise EmptySupport(f"poids MLS tous nuls en {x.tolist()}")
    return float(np.sum(w * np.einsum("ij,ij->i", x - P, N)) / total)


# ──────────────────────────────────────────────────────────────────────────────
# Distances de pénétration (scalaires)
# ──────────────────────────────────────────────────────────────────────────────
def phi_plane(s: Sphere, p, n) -> float:
    return float(ramp(s.radius - np.dot(np.asarray(p, float) - s.c, np.asarray(n, float))))


def phi_point(s: Sphere, p) -> float:
    return float(ramp(s.radius - np.linalg.norm(np.asarray(p, float) - s.c)))


def blend_weight(c_prev, p, n, h_blend: float) -> float:
    """φ(‖c̄ − p‖, h_blend) avec c̄ la projection de c_prev sur l'hyperplan (p, n)."""
    c_prev = np.asarray(c_prev, float)
    p = np.asarray(p, float)
    n = np.asarray(n, float)
    c_bar = c_prev - n * np.dot(c_prev - p, n)
    return float(kernel(np.linalg.norm(c_bar - p), h_blend))


def phi_blend_sq(s: Sphere, p, n, c_prev, h_blend: float) -> float:
    """mix(Φ_plane², Φ_point², x) = x·Φ_plane² + (1 − x)·Φ_point²."""
    x = blend_weight(c_prev, p, n, h_blend)
    return x * phi_plane(s, p, n) ** 2 + (1.0 - x) * phi_point(s, p) ** 2


# ──────────────────────────────────────────────────────────────────────────────
# Versions vectorisées + jacobiennes (k points)
# ──────────────────────────────────────────────────────────────────────────────
def plane_terms(c: np.ndarray, r: float, P: np.ndarray, N: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Φ_plane pour chaque (p, n) et ∇_s Φ_plane = H·[n, 1]."""
    arg = r - np.einsum("ij,ij->i", P - c, N)
    active = arg > 0.0
    grad = np.empty((len(P), P.shape[1] + 1))
    grad[:, :-1] = N
    grad[:, -1] = 1.0
    grad[~active] = 0.0
    return np.where(active, arg, 0.0), grad


def point_terms(c: np.ndarray, r: float, P: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Φ_point pour chaque p et ∇_s Φ_point = H·[(p − c)/‖p − c‖, 1]."""
    diff = P - c
    dist = np.linalg.norm(diff, axis=1)
    arg = r - dist
    active = arg > 0.0
    grad = np.empty((len(P), P.shape[1] + 1))
    safe = np.where(dist > 0.0, dist, 1.0)
    # p = c : direction indéfinie, composante spatiale nulle
    grad[:, :-1] = np.where((dist > 0.0)[:, None], diff / safe[:, None], 0.0)
    grad[:, -1] = 1.0
    grad[~active] = 0.0
    return np.where(active, arg, 0.0), grad


def blend_weights(c_prev: np.ndarray, P: np.ndarray, N: np.ndarray, h_blend: float) -> np.ndarray:
    proj = np.einsum("ij,ij->i", c_prev - P, N)
    c_bar = c_prev - N * proj[:, None]
    return np.asarray(kernel(np.linalg.norm(c_bar - P, axis=1), h_blend), dtype=float).reshape(-1)


def support_weights(c_prev: np.ndarray, r_prev: float, P: np.ndarray, h_support: float) -> np.ndarray:
    d = np.linalg.norm(P - c_prev, axis=1)
    return np.asarray(kernel(ramp(d - r_prev), h_support), dtype=float).reshape(-1)
