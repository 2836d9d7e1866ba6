# medialfit/core/shrink.py
"""
Méthode de référence « sphere shrinking » : on part d'une grande sphère
tangente en p (centre sur le rayon (p, −n)) et on la remplace par la sphère
tangente en p passant par le point le plus proche du centre, tant qu'un point
du nuage est à l'intérieur.
"""
from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np

from .cloud import OrientedPointCloud
from .errors import DegenerateTangency, NonConvergence, SolverFailure
from .models import MedialAtom, MedialResult, Sphere
from .solver import Pins, resolve_pins, run_per_pin

log = logging.getLogger(__name__)

_TANGENCY_EPS = 1e-12
_DUPLICATE_TOL = 1e-12   # × diag : points confondus avec l'épingle
_RADIUS_TOL = 1e-9       # × diag


def tangent_sphere(p, n, f) -> Sphere:
    """Sphère tangente à (p, n) passant par f : r = ‖p − f‖² / (2·n·(p − f)), c = p − r·n."""
    p = np.asarray(p, dtype=float)
    n = np.asarray(n, dtype=float)
    f = np.asarray(f, dtype=float)
    diff = p - f
    sq = float(np.dot(diff, diff))
    if sq == 0.0:
        return Sphere.of(p, 0.0)
    denom = float(np.dot(n, diff))
    if denom <= _TANGENCY_EPS:
        raise DegenerateTangency(f"n·(p − f) = {denom:.3g} : f n'est pas du côté intérieur")
    r = sq / (2.0 * denom)
    return Sphere.of(p - r * n, r)


def _nearest_other(cloud: OrientedPointCloud, x: np.ndarray, pin_index: int) -> Tuple[int, float]:
    """Plus proche voisin de x en excluant l'épingle et ses doublons."""
    p = cloud.points[pin_index]
    dup = _DUPLICATE_TOL * cloud.diag
    n = len(cloud)
    k = min(8, n)
    while True:
        dist, idx = cloud.tree.query(x, k=k)
        for d_i, j in zip(np.atleast_1d(dist), np.atleast_1d(idx)):
            j = int(j)
            if j == pin_index or np.linalg.norm(cloud.points[j] - p) <= dup:
                continue
            return j, float(d_i)
        if k == n:
            raise DegenerateTangency("tous les points coïncident avec l'épingle")
        k = min(2 * k, n)


def _shrink(pin_index: int, cloud: OrientedPointCloud, r_init: Optional[float] = None) -> Tuple[Sphere, int]:
    diag = cloud.diag
    tol = _RADIUS_TOL * diag
    p = cloud.points[pin_index]
    n = cloud.normals[pin_index]
    r = 2.0 * diag if r_init is None else float(r_init)
    c = p - r * n
    cap = 10 * len(cloud)

    updates = 0
    while True:
        j, dist = _nearest_other(cloud, c, pin_index)
        # ‖c − f‖ recalculé : la distance du kd-tree peut différer d'un ulp
        dist = float(np.linalg.norm(c - cloud.points[j]))
        if dist >= r - tol:
            break
        if updates >= cap:
            raise NonConvergence(f"pin {pin_index} : plafond de {cap} itérations atteint (r={r:.6g})")
        s = tangent_sphere(p, n, cloud.points[j])
        dr = r - s.radius
        c, r = s.c, s.radius
        updates += 1
        if abs(dr) < tol:
            break
    return Sphere.of(c, r), updates


def shrink_sphere(p_index: int, cloud: OrientedPointCloud, r_init: Optional[float] = None) -> Sphere:
    sphere, _ = _shrink(p_index, cloud, r_init)
    return sphere


def shrink_all(cloud: OrientedPointCloud, pins: Pins = "all", *, threads: int = 1) -> MedialResult:
    """Une sphère par épingle ; même contrat que solve_all (ordre stable, échecs marqués)."""
    pin_list = resolve_pins(cloud, pins)

    def work(pin: int) -> MedialAtom:
        try:
            sphere, updates = _shrink(pin, cloud)
        except SolverFailure as e:
            log.warning("pin %d : échec (%s)", pin, e)
            return MedialAtom(
                sphere=Sphere.of(cloud.points[pin], 0.0), pin_index=pin, failed=True, failure=str(e)
            )
        return MedialAtom(sphere=sphere, pin_index=pin, iterations_run=updates, converged=True)

    atoms = run_per_pin(work, pin_list, threads)
    result = MedialResult(
        method="shrink",
        atoms=atoms,
        cloud_checksum=cloud.checksum(),
        dim=cloud.dim,
        diag=cloud.diag,
    )
    log.info("shrink : %d sphères, %d échecs", len(atoms), result.failures)
    return result
