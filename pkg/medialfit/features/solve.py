# medialfit/features/solve.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from ..core.cloud import OrientedPointCloud, load_cloud
from ..core.models import MedialResult, SolverConfig
from ..core.shrink import shrink_all
from ..core.solver import Pins, default_params, solve_all, solve_all_irls

log = logging.getLogger(__name__)

METHODS = ("lsmat", "lsmat-irls", "shrink")
MESH_SUFFIXES = {".obj", ".stl", ".off", ".ply", ".glb"}


def load_input(path: str | Path, dim: int, mesh_samples: int = 10_000, seed: int = 0) -> OrientedPointCloud:
    """Nuage orienté texte, ou maillage échantillonné (3D, extra [mesh])."""
    path = Path(path)
    if path.suffix.lower() in MESH_SUFFIXES:
        from ..integrations.mesh_import import load_mesh_cloud
        return load_mesh_cloud(path, mesh_samples, seed=seed)
    return load_cloud(path, dim)


def build_config(method: str, sigma: float, **overrides) -> SolverConfig:
    """Défauts linéaires en σ_p, puis chaque option explicite l'emporte."""
    if method not in METHODS:
        raise ValueError(f"méthode inconnue : {method!r}")
    irls = "l1" if method == "lsmat-irls" else "off"
    return default_params(sigma, irls=irls, **overrides)


def run_method(cloud: OrientedPointCloud, method: str, config: Optional[SolverConfig] = None,
               pins: Pins = "all", threads: int = 1, trace_every: int = 0) -> MedialResult:
    if method == "shrink":
        return shrink_all(cloud, pins, threads=threads)
    if config is None:
        config = build_config(method, 0.0)
    if method == "lsmat-irls":
        return solve_all_irls(cloud, config, pins, threads=threads, trace_every=trace_every)
    return solve_all(cloud, config, pins, threads=threads, trace_every=trace_every)
