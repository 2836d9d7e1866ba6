# medialfit/core/evaluation.py
"""
Vérité terrain 2D et métriques E_avg / E_max.

Chaîne : polygone → rasterize → (distance_transform) → extract_medial_pixels
→ metrics. Les erreurs sont exprimées en % de la diagonale de la bbox.
Convention de grille : occupancy[j, i], ligne j = axe y, colonne i = axe x ;
le centre du pixel (i, j) est en origin + (i + 0.5, j + 0.5) / scale.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree
from skimage.measure import points_in_poly
from skimage.morphology import medial_axis

from .errors import PolygonError
from .models import EvalReport, MedialResult

log = logging.getLogger(__name__)

Loops = List[np.ndarray]


# ──────────────────────────────────────────────────────────────────────────────
# Types
# ──────────────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class BinaryGrid:
    occupancy: np.ndarray            # (resolution, resolution) bool
    origin: Tuple[float, float]      # coin bas-gauche du pixel (0, 0), unités monde
    scale: float                     # pixels par unité monde

    def __post_init__(self):
        occ = self.occupancy
        if occ.ndim != 2 or occ.shape[0] != occ.shape[1]:
            raise ValueError("la grille doit être carrée")
        if not self.scale > 0.0:
            raise ValueError("scale doit être > 0")
        if not occ.any():
            raise PolygonError("aucun pixel intérieur")

    @property
    def resolution(self) -> int:
        return self.occupancy.shape[0]

    @property
    def pixel_size(self) -> float:
        return 1.0 / self.scale

    def to_world(self, ij: np.ndarray) -> np.ndarray:
        """(i, j) (colonne, ligne) → centres de pixels en unités monde."""
        ij = np.asarray(ij, dtype=float)
        return np.asarray(self.origin) + (ij + 0.5) / self.scale

    def to_pixel(self, xy: np.ndarray) -> np.ndarray:
        """Inverse de to_world (coordonnées pixel continues)."""
        return (np.asarray(xy, dtype=float) - np.asarray(self.origin)) * self.scale - 0.5

    def pixel_centers(self) -> np.ndarray:
        n = self.resolution
        jj, ii = np.mgrid[0:n, 0:n]
        return self.to_world(np.column_stack([ii.ravel(), jj.ravel()]))


@dataclass(frozen=True)
class GroundTruthAxis:
    medial_points: np.ndarray        # (M, 2) unités monde
    resolution: int
    pixel_size: float

    def __post_init__(self):
        if len(self.medial_points) == 0:
            raise ValueError("axe médian vide")


# ──────────────────────────────────────────────────────────────────────────────
# Polygones
# ──────────────────────────────────────────────────────────────────────────────
def _as_loops(polygon: Union[np.ndarray, Sequence[np.ndarray]]) -> Loops:
    if isinstance(polygon, np.ndarray) and polygon.ndim == 2:
        polygon = [polygon]
    loops = []
    for loop in polygon:
        loop = np.asarray(loop, dtype=float)
        if loop.ndim != 2 or loop.shape[1] != 2:
            raise PolygonError(f"boucle de forme {loop.shape}, (k, 2) attendu")
        if len(loop) > 1 and np.array_equal(loop[0], loop[-1]):
            loop = loop[:-1]
        if len(loop) < 3:
            raise PolygonError(f"boucle à {len(loop)} sommets (minimum 3)")
        if not np.isfinite(loop).all():
            raise PolygonError("sommet non fini")
        loops.append(loop)
    if not loops:
        raise PolygonError("polygone vide")
    return loops


def loop_area(loop: np.ndarray) -> float:
    """Aire signée (formule du lacet) ; > 0 pour une boucle anti-horaire."""
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_diag(polygon) -> float:
    pts = np.vstack(_as_loops(polygon))
    return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


def load_polygon(path: str | Path) -> Loops:
    """`x y` par ligne ; `#` commente ; une ligne vide sépare deux boucles."""
    path = Path(path)
    loops: Loops = []
    current: list = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            if raw.lstrip().startswith("#"):
                continue
            line = raw.strip()
            if not line:
                if current:
                    loops.append(np.asarray(current, dtype=float))
                    current = []
                continue
            fields = line.split()
            if len(fields) != 2:
                raise PolygonError(f"{path}:{lineno}: 2 champs attendus, {len(fields)} trouvés")
            try:
                current.append([float(fields[0]), float(fields[1])])
            except ValueError:
                raise PolygonError(f"{path}:{lineno}: valeur non décimale") from None
    if current:
        loops.append(np.asarray(current, dtype=float))
    return _as_loops(loops)


def save_polygon(polygon, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    loops = _as_loops(polygon)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# polygon loops={len(loops)}\n")
        for k, loop in enumerate(loops):
            if k:
                f.write("\n")
            for x, y in loop:
                f.write(f"{x:.17g} {y:.17g}\n")
    return path


# ──────────────────────────────────────────────────────────────────────────────
# Rasterisation / distance / squelette
# ──────────────────────────────────────────────────────────────────────────────
def rasterize(polygon, resolution: int = 1024, *, bounds: Optional[Tuple[float, float, float, float]] = None,
              padding: float = 0.0) -> BinaryGrid:
    """
    Pixel occupé ssi son centre est dans le polygone (règle pair-impair sur
    toutes les boucles). Par défaut la grille couvre le carré centré sur la
    bbox des sommets, élargi de `padding` × côté de chaque bord.
    """
    if resolution < 2:
        raise ValueError("resolution doit être ≥ 2")
    loops = _as_loops(polygon)
    if sum(abs(loop_area(l)) for l in loops) <= 0.0:
        raise PolygonError("polygone d'aire nulle")

    if bounds is None:
        pts = np.vstack(loops)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
    else:
        lo = np.array(bounds[:2], dtype=float)
        hi = np.array(bounds[2:], dtype=float)
    side = float(np.max(hi - lo)) * (1.0 + 2.0 * padding)
    if not side > 0.0:
        raise PolygonError("bbox dégénérée")
    mid = 0.5 * (lo + hi)
    origin = (float(mid[0] - side / 2), float(mid[1] - side / 2))
    scale = resolution / side

    n = resolution
    jj, ii = np.mgrid[0:n, 0:n]
    centers = np.column_stack([ii.ravel(), jj.ravel()]).astype(float)
    centers = np.asarray(origin) + (centers + 0.5) / scale
    inside = np.zeros(n * n, dtype=bool)
    for loop in loops:
        inside ^= points_in_poly(centers, loop)
    occ = inside.reshape(n, n)
    log.debug("rasterize : %d² pixels, %d occupés", n, int(occ.sum()))
    return BinaryGrid(occupancy=occ, origin=origin, scale=scale)


def distance_transform(grid: BinaryGrid) -> np.ndarray:
    """
    Distance euclidienne exacte (pixels) au centre non occupé le plus proche.
    La grille est bordée d'un anneau extérieur : un pixel sur le bord voit le
    dehors à distance 1.
    """
    padded = np.pad(grid.occupancy, 1, mode="constant", constant_values=False)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def medial_mask(grid: BinaryGrid) -> np.ndarray:
    padded = np.pad(grid.occupancy, 1, mode="constant", constant_values=False)
    # rng fixe : l'ordre de traitement à distance égale est tiré au hasard
    skel = medial_axis(padded, rng=0)[1:-1, 1:-1]
    return skel & grid.occupancy


def extract_medial_pixels(grid: BinaryGrid) -> GroundTruthAxis:
    """Squelette homotopique d'un pixel d'épaisseur, amincissement par distance croissante."""
    skel = medial_mask(grid)
    if not skel.any():
        # forme de 1 à 2 pixels : on garde le maximum de la distance
        dt = distance_transform(grid)
        skel = dt == dt.max()
    jj, ii = np.nonzero(skel)
    pts = grid.to_world(np.column_stack([ii, jj]))
    log.debug("axe médian : %d pixels", len(pts))
    return GroundTruthAxis(medial_points=pts, resolution=grid.resolution, pixel_size=grid.pixel_size)


def ground_truth(polygon, resolution: int = 1024, padding: float = 0.02) -> GroundTruthAxis:
    return extract_medial_pixels(rasterize(polygon, resolution, padding=padding))


# ──────────────────────────────────────────────────────────────────────────────
# Métriques
# ──────────────────────────────────────────────────────────────────────────────
def nearest_distances(centers: np.ndarray, gt_points: np.ndarray, workers: int = 1) -> np.ndarray:
    """min_m ‖x − g_m‖ pour chaque x ; la distance finale est recalculée en numpy."""
    centers = np.asarray(centers, dtype=float).reshape(-1, gt_points.shape[1])
    _, idx = cKDTree(gt_points).query(centers, k=1, workers=workers)
    return np.linalg.norm(centers - gt_points[idx], axis=1)


def metrics(atoms: Union[MedialResult, np.ndarray], gt: GroundTruthAxis, diag: Optional[float] = None,
            *, workers: int = 1) -> EvalReport:
    """
    E_avg, E_max en % de `diag` (par défaut la diagonale du nuage résolu).
    Les atomes en échec ne sont pas comptés.
    """
    if isinstance(atoms, MedialResult):
        if diag is None:
            diag = atoms.diag
        keep = [a.sphere.center for a in atoms.atoms if not a.failed]
        centers = np.asarray(keep, dtype=float).reshape(-1, atoms.dim)
    else:
        centers = np.asarray(atoms, dtype=float)
        if centers.ndim == 1:
            centers = centers.reshape(1, -1)
    if diag is None or not diag > 0.0:
        raise ValueError("diag > 0 requis")
    if len(centers) == 0:
        raise ValueError("aucun atome à évaluer")
    if len(gt.medial_points) == 0:
        raise ValueError("vérité terrain vide")
    if centers.shape[1] != gt.medial_points.shape[1]:
        raise ValueError(f"dimension {centers.shape[1]} ≠ vérité terrain {gt.medial_points.shape[1]}")

    d = 100.0 * nearest_distances(centers, gt.medial_points, workers) / diag
    e_max = float(d.max())
    # la moyenne flottante peut dépasser le max d'un ulp quand tout est égal
    e_avg = min(float(d.mean()), e_max)
    return EvalReport(e_avg=e_avg, e_max=e_max, n_atoms=len(d), distances=d.tolist())
