# medialfit/integrations/mesh_import.py
"""Import 3D : échantillonnage d'un maillage (trimesh, extra optionnel [mesh])."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ..core.cloud import OrientedPointCloud
from ..core.errors import BadInput

log = logging.getLogger(__name__)


def _trimesh():
    try:
        import trimesh
    except ImportError as e:  # extra non installé
        raise BadInput("l'import de maillage exige trimesh : pip install 'medialfit[mesh]'") from e
    return trimesh


def load_mesh_cloud(path: str | Path, n: int, seed: int = 0) -> OrientedPointCloud:
    """
    Tire n points uniformément sur les faces ; chaque point prend la normale
    de sa face. Un maillage à volume négatif (faces inversées) est retourné.
    """
    trimesh = _trimesh()
    mesh = trimesh.load(str(path), force="mesh", process=True)
    if not isinstance(mesh, trimesh.Trimesh) or len(mesh.faces) == 0:
        raise BadInput(f"{path}: aucun triangle exploitable")
    if mesh.is_volume and mesh.volume < 0:
        mesh.invert()
    points, face_idx = trimesh.sample.sample_surface(mesh, int(n), seed=seed)
    normals = np.asarray(mesh.face_normals[face_idx], dtype=float)
    log.info("maillage %s : %d faces, %d points tirés", path, len(mesh.faces), len(points))
    return OrientedPointCloud(np.asarray(points, dtype=float), normals)
