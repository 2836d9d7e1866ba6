from __future__ import annotations

import numpy as np
import pytest

from medialfit import config
from medialfit.core.cloud import OrientedPointCloud


@pytest.fixture(autouse=True)
def _isolated_workspace(tmp_path, monkeypatch):
    """Registre SQLite et sorties par défaut confinés au dossier du test."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setattr(config, "DB_PATH", str(tmp_path / "registry.sqlite3"))
    monkeypatch.setattr(config, "OUT_DIR", str(tmp_path / "runs"))


def circle_points(n: int, radius: float = 1.0, phase: float = 0.5):
    th = 2.0 * np.pi * (np.arange(n) + phase) / n
    u = np.column_stack([np.cos(th), np.sin(th)])
    return radius * u, u


@pytest.fixture
def circle_cloud() -> OrientedPointCloud:
    P, N = circle_points(128)
    return OrientedPointCloud(P, N)


@pytest.fixture
def slab_cloud() -> OrientedPointCloud:
    """Deux droites y = ±0.25, x ∈ [−1, 1], normales sortantes."""
    x = np.linspace(-1.0, 1.0, 401)
    top = np.column_stack([x, np.full_like(x, 0.25)])
    bot = np.column_stack([x, np.full_like(x, -0.25)])
    P = np.vstack([bot, top])
    N = np.vstack([np.tile([0.0, -1.0], (len(x), 1)), np.tile([0.0, 1.0], (len(x), 1))])
    return OrientedPointCloud(P, N)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
