# medialfit/features/evaluate.py
from __future__ import annotations

import logging
from typing import Dict, List, Tuple

import numpy as np

from ..core.errors import DimensionMismatch
from ..core.evaluation import GroundTruthAxis, ground_truth, metrics, polygon_diag
from ..core.models import EvalReport
from ..storage.files import SphereTable

log = logging.getLogger(__name__)


def evaluate_table(table: SphereTable, loops, resolution: int, threads: int = 1,
                   gt: GroundTruthAxis | None = None) -> EvalReport:
    """
    E_avg/E_max des centres du CSV contre l'axe médian pixelisé du polygone.
    La diagonale de référence est celle du polygone (forme propre).
    """
    if table.dim != 2:
        raise DimensionMismatch(f"évaluation 2D uniquement (CSV en dim={table.dim})")
    if gt is None:
        gt = ground_truth(loops, resolution)
    report = metrics(table.centers, gt, polygon_diag(loops), workers=threads)
    log.info("évaluation : %d atomes, E_avg=%.4f%%, E_max=%.4f%%", report.n_atoms, report.e_avg, report.e_max)
    return report


def evaluate_trace(trace: Dict[int, np.ndarray], loops, resolution: int,
                   threads: int = 1) -> List[Tuple[int, EvalReport]]:
    """Une évaluation par itération tracée (courbe de convergence)."""
    if not trace:
        return []
    dim = next(iter(trace.values())).shape[1] - 1
    if dim != 2:
        raise DimensionMismatch(f"évaluation 2D uniquement (trace en dim={dim})")
    gt = ground_truth(loops, resolution)
    diag = polygon_diag(loops)
    out = []
    for it in sorted(trace):
        out.append((it, metrics(trace[it][:, :2], gt, diag, workers=threads)))
    return out
