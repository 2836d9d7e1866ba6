# medialfit/core/cloud.py
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import List, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import CloudFormatError
from .models import NoiseSpec
from ..utils.checksums import array_checksum

log = logging.getLogger(__name__)

NORMAL_TOL = 1e-9
MIN_POINTS = 2  # minimum pour une diagonale > 0


# ──────────────────────────────────────────────────────────────────────────────
# Modèle
# ──────────────────────────────────────────────────────────────────────────────
class OrientedPointCloud:
    """
    Échantillons p_n de ∂O avec normales unitaires sortantes n_n.
    Immuable après construction : tableaux en lecture seule, kd-tree construit
    une fois. Partageable entre threads.
    """

    __slots__ = ("points", "normals", "bbox_min", "bbox_max", "diag", "outlier_mask", "_tree", "_checksum")

    def __init__(self, points, normals, *, outlier_mask: Optional[np.ndarray] = None):
        P = np.array(points, dtype=float, copy=True)
        N = np.array(normals, dtype=float, copy=True)
        if P.ndim != 2 or P.shape[1] not in (2, 3):
            raise ValueError(f"points doit être (n, 2) ou (n, 3), reçu {P.shape}")
        if N.shape != P.shape:
            raise ValueError(f"normals {N.shape} ≠ points {P.shape}")
        if len(P) < MIN_POINTS:
            raise ValueError(f"au moins {MIN_POINTS} points requis, reçu {len(P)}")
        if not (np.isfinite(P).all() and np.isfinite(N).all()):
            raise ValueError("coordonnées non finies")
        norms = np.linalg.norm(N, axis=1)
        if np.any(np.abs(norms - 1.0) > NORMAL_TOL):
            raise ValueError("toutes les normales doivent être unitaires (tol 1e-9)")

        self.points = P
        self.normals = N
        self.bbox_min = P.min(axis=0)
        self.bbox_max = P.max(axis=0)
        self.diag = float(np.linalg.norm(self.bbox_max - self.bbox_min))
        if not self.diag > 0.0:
            raise ValueError("diagonale nulle : tous les points coïncident")
        mask = np.zeros(len(P), dtype=bool) if outlier_mask is None else np.array(outlier_mask, dtype=bool)
        if mask.shape != (len(P),):
            raise ValueError("outlier_mask doit avoir une entrée par point")
        self.outlier_mask = mask
        for a in (self.points, self.normals, self.bbox_min, self.bbox_max, self.outlier_mask):
            a.flags.writeable = False
        self._tree = cKDTree(P)
        self._checksum: Optional[str] = None

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def tree(self) -> cKDTree:
        return self._tree

    def checksum(self) -> str:
        if self._checksum is None:
            self._checksum = array_checksum(self.points, self.normals)
        return self._checksum

    def inlier_indices(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(~self.outlier_mask)]

    def __repr__(self) -> str:
        return f"OrientedPointCloud(n={len(self)}, dim={self.dim}, diag={self.diag:.6g})"


# ──────────────────────────────────────────────────────────────────────────────
# Lecture / écriture (format texte orienté)
# ──────────────────────────────────────────────────────────────────────────────
def _records(path: Path, width: int):
    """Itère (numéro de ligne, valeurs) ; `#` commente, lignes vides ignorées."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != width:
                raise CloudFormatError(str(path), lineno, f"{width} champs attendus, {len(fields)} trouvés")
            try:
                vals = [float(x) for x in fields]
            except ValueError:
                raise CloudFormatError(str(path), lineno, "valeur non décimale") from None
            if not all(math.isfinite(v) for v in vals):
                raise CloudFormatError(str(path), lineno, "valeur non finie")
            yield lineno, vals


def load_cloud(path: str | Path, dim: int) -> OrientedPointCloud:
    """
    Lit `x y nx ny` (2D) ou `x y z nx ny nz` (3D) par ligne.
    Les normales sont renormalisées ; l'ordre des enregistrements est conservé.
    """
    if dim not in (2, 3):
        raise ValueError("dim doit valoir 2 ou 3")
    path = Path(path)
    pts: list[list[float]] = []
    nrm: list[list[float]] = []
    for lineno, vals in _records(path, 2 * dim):
        n = np.asarray(vals[dim:], dtype=float)
        length = float(np.linalg.norm(n))
        if length == 0.0:
            raise CloudFormatError(str(path), lineno, "normale de longueur nulle")
        pts.append(vals[:dim])
        nrm.append(list(n / length) if abs(length - 1.0) > 1e-12 else vals[dim:])
    if len(pts) < MIN_POINTS:
        raise CloudFormatError(str(path), None, f"au moins {MIN_POINTS} points requis, {len(pts)} lus")
    try:
        cloud = OrientedPointCloud(pts, nrm)
    except ValueError as e:
        raise CloudFormatError(str(path), None, str(e)) from None
    log.debug("nuage chargé %s : %r", path, cloud)
    return cloud


def save_cloud(cloud: OrientedPointCloud, path: str | Path) -> Path:
    """Écrit avec 17 chiffres significatifs : relecture bit à bit identique."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# oriented points dim={cloud.dim} n={len(cloud)}\n")
        for p, n in zip(cloud.points, cloud.normals):
            f.write(" ".join(f"{v:.17g}" for v in (*p, *n)) + "\n")
    return path


# ──────────────────────────────────────────────────────────────────────────────
# Perturbations (bruit gaussien + outliers)
# ──────────────────────────────────────────────────────────────────────────────
def point_stream(seed: int, index: int, purpose: int = 0) -> np.random.Generator:
    """
    Flux aléatoire propre à un point : SeedSequence([seed, index, purpose]).
    Le tirage d'un point ne dépend ni de l'ordre ni des autres points.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, index, purpose]))


_NOISE, _OUTLIER, _SELECT = 0, 1, 2


def perturb(cloud: OrientedPointCloud, spec: NoiseSpec) -> OrientedPointCloud:
    """
    Déplace chaque inlier d'un bruit gaussien d'écart-type σ_p·diag/100
    (isotrope : par coordonnée ; along_normal : 1-D le long de n_n) et remplace
    ⌊f·N⌋ points par des tirages uniformes dans la bbox, normales aléatoires.
    Les normales des inliers sont conservées telles quelles.
    """
    n_pts, d = cloud.points.shape
    n_out = int(math.floor(spec.outlier_fraction * n_pts))
    if spec.sigma_p == 0.0 and n_out == 0:
        return OrientedPointCloud(cloud.points, cloud.normals, outlier_mask=cloud.outlier_mask)

    sigma = spec.sigma_p * cloud.diag / 100.0
    P = cloud.points.copy()
    N = cloud.normals.copy()
    mask = cloud.outlier_mask.copy()

    if sigma > 0.0:
        for i in range(n_pts):
            rng = point_stream(spec.seed, i, _NOISE)
            if spec.mode == "along_normal":
                P[i] += rng.normal(0.0, sigma) * N[i]
            else:
                P[i] += rng.normal(0.0, sigma, size=d)

    if n_out:
        chosen = np.sort(point_stream(spec.seed, n_pts, _SELECT).choice(n_pts, size=n_out, replace=False))
        lo, hi = cloud.bbox_min, cloud.bbox_max
        for j in chosen:
            rng = point_stream(spec.seed, int(j), _OUTLIER)
            P[j] = rng.uniform(lo, hi)
            v = rng.normal(size=d)
            while np.linalg.norm(v) < 1e-12:
                v = rng.normal(size=d)
            N[j] = v / np.linalg.norm(v)
        mask[chosen] = True

    log.debug("perturb σ_p=%.3g%% (%s), outliers=%d/%d", spec.sigma_p, spec.mode, n_out, n_pts)
    return OrientedPointCloud(P, N, outlier_mask=mask)


# ──────────────────────────────────────────────────────────────────────────────
# Requêtes de voisinage
# ──────────────────────────────────────────────────────────────────────────────
def neighbors_within(cloud: OrientedPointCloud, x, radius: float) -> List[int]:
    """Indices n tels que ‖x − p_n‖₂ ≤ radius, triés par indice."""
    if radius < 0:
        raise ValueError("radius doit être ≥ 0")
    idx = cloud.tree.query_ball_point(np.asarray(x, dtype=float), r=float(radius), return_sorted=True)
    return [int(i) for i in idx]


def nearest(cloud: OrientedPointCloud, x, k: int = 1):
    """(distances, indices) des k plus proches voisins de x."""
    k = min(k, len(cloud))
    dist, idx = cloud.tree.query(np.asarray(x, dtype=float), k=k)
    return np.atleast_1d(dist), np.atleast_1d(idx)
