# medialfit/storage/files.py
"""
Formats d'échange versionnés : CSV de sphères, CSV de trace, JSON d'évaluation,
manifeste d'exécution. Toute divergence de schéma est une erreur (SchemaMismatch).
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np
from pydantic import ValidationError

from ..core.errors import SchemaMismatch
from ..core.models import EvalReport, MedialResult, RunManifest

SPHERES_SCHEMA = "medialfit-spheres v1"
TRACE_SCHEMA = "medialfit-trace v1"
MANIFEST_SCHEMA = "medialfit-manifest/1"

_HEADER = re.compile(r"^#\s*(medialfit-[a-z]+ v\d+)\s+dim=(\d)(?:\s+method=([a-z-]+))?\s*$")


def _axes(dim: int) -> List[str]:
    return ["cx", "cy", "cz"][:dim]


def _g(x: float) -> str:
    return f"{x:.17g}"


# ──────────────────────────────────────────────────────────────────────────────
# Sphères
# ──────────────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class SphereTable:
    dim: int
    method: str
    pin_index: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray

    def __len__(self) -> int:
        return len(self.pin_index)


def write_spheres(result: MedialResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# {SPHERES_SCHEMA} dim={result.dim} method={result.method}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["pin_index", *_axes(result.dim), "r", "iterations", "converged"])
        for a in result.atoms:
            if a.failed:
                continue
            w.writerow([
                a.pin_index,
                *(_g(x) for x in a.sphere.center),
                _g(a.sphere.radius),
                a.iterations_run,
                int(a.converged),
            ])
    return path


def _read_header(f, path: Path, expected: str):
    first = f.readline().strip()
    m = _HEADER.match(first)
    if not m or m.group(1) != expected:
        raise SchemaMismatch(f"{path}: en-tête {first!r}, attendu '# {expected} dim=<d>'")
    return int(m.group(2)), (m.group(3) or "")


def read_spheres(path: str | Path) -> SphereTable:
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        dim, method = _read_header(f, path, SPHERES_SCHEMA)
        if dim not in (2, 3):
            raise SchemaMismatch(f"{path}: dim={dim} non supportée")
        reader = csv.reader(f)
        cols = next(reader, None)
        expected = ["pin_index", *_axes(dim), "r", "iterations", "converged"]
        if cols != expected:
            raise SchemaMismatch(f"{path}: colonnes {cols}, attendu {expected}")
        rows = [row for row in reader if row]
    try:
        data = np.array([[float(x) for x in row] for row in rows], dtype=float).reshape(-1, len(expected))
    except ValueError as e:
        raise SchemaMismatch(f"{path}: valeur illisible ({e})") from None
    return SphereTable(
        dim=dim,
        method=method,
        pin_index=data[:, 0].astype(int),
        centers=data[:, 1:1 + dim],
        radii=data[:, 1 + dim],
        iterations=data[:, 2 + dim].astype(int),
        converged=data[:, 3 + dim].astype(bool),
    )


# ──────────────────────────────────────────────────────────────────────────────
# Trace de convergence : une ligne par (itération, épingle)
# ──────────────────────────────────────────────────────────────────────────────
def write_trace(result: MedialResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pins = [a.pin_index for a in result.atoms if not a.failed]
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# {TRACE_SCHEMA} dim={result.dim} method={result.method}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["iteration", "pin_index", *_axes(result.dim), "r"])
        for it in sorted(result.trace):
            for pin, s in zip(pins, result.trace[it]):
                w.writerow([it, pin, *(_g(x) for x in s)])
    return path


def read_trace(path: str | Path) -> Dict[int, np.ndarray]:
    """itération → tableau (N, d+1) des sphères [c, r]."""
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        dim, _ = _read_header(f, path, TRACE_SCHEMA)
        reader = csv.reader(f)
        cols = next(reader, None)
        expected = ["iteration", "pin_index", *_axes(dim), "r"]
        if cols != expected:
            raise SchemaMismatch(f"{path}: colonnes {cols}, attendu {expected}")
        frames: Dict[int, list] = {}
        for row in reader:
            if row:
                frames.setdefault(int(row[0]), []).append([float(x) for x in row[2:]])
    return {k: np.asarray(v, dtype=float) for k, v in frames.items()}


# ──────────────────────────────────────────────────────────────────────────────
# Évaluation
# ──────────────────────────────────────────────────────────────────────────────
def write_eval_json(report: EvalReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_json_dict(), indent=2), encoding="utf-8")
    return path


def read_eval_json(path: str | Path) -> EvalReport:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if raw.get("schema") != "medialfit-eval/1":
        raise SchemaMismatch(f"{path}: schéma {raw.get('schema')!r}, attendu 'medialfit-eval/1'")
    return EvalReport(
        e_avg=raw["e_avg_pct"], e_max=raw["e_max_pct"], n_atoms=raw["n_atoms"], distances=raw["distances"]
    )


# ──────────────────────────────────────────────────────────────────────────────
# Manifeste
# ──────────────────────────────────────────────────────────────────────────────
def manifest_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def write_manifest(manifest: RunManifest, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(by_alias=True, indent=2), encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> RunManifest:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"{path}: JSON invalide ({e})") from None
    if raw.get("schema") != MANIFEST_SCHEMA:
        raise SchemaMismatch(f"{path}: schéma {raw.get('schema')!r}, attendu {MANIFEST_SCHEMA!r}")
    try:
        return RunManifest.model_validate(raw)
    except ValidationError as e:
        raise SchemaMismatch(f"{path}: manifeste invalide ({e.error_count()} erreur(s))") from None
