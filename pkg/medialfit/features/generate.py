# medialfit/features/generate.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from ..core.cloud import OrientedPointCloud, perturb, save_cloud
from ..core.evaluation import save_polygon
from ..core.models import NoiseSpec
from ..core.shapes import ShapeSample, make_shape

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeneratedDataset:
    shape: ShapeSample
    cloud: OrientedPointCloud          # nuage bruité
    cloud_path: Path
    polygon_path: Optional[Path]       # None en 3D


def polygon_path_for(cloud_path: Path) -> Path:
    return cloud_path.with_suffix(".poly")


def generate_dataset(shape: str, n: int, noise: NoiseSpec, out: str | Path,
                     params: Optional[Dict[str, str]] = None) -> GeneratedDataset:
    """
    Écrit le nuage orienté (bruit + outliers appliqués) et, en 2D, le polygone
    propre de vérité terrain à côté (`<stem>.poly`). Déterministe pour un seed.
    """
    sample = make_shape(shape, n, **(params or {}))
    cloud = perturb(sample.cloud, noise)
    out = Path(out)
    save_cloud(cloud, out)
    poly = None
    if sample.loops:
        poly = save_polygon(sample.loops, polygon_path_for(out))
    log.info(
        "jeu %s : %d points (σ_p=%g%%, outliers=%d) → %s",
        shape, len(cloud), noise.sigma_p, int(cloud.outlier_mask.sum()), out,
    )
    return GeneratedDataset(shape=sample, cloud=cloud, cloud_path=out, polygon_path=poly)
