# medialfit/config.py
from __future__ import annotations
import os
from dotenv import load_dotenv

# Charge automatiquement .env (à la racine du projet)
load_dotenv(override=False)


def _int(envval: str | None, default: int) -> int:
    if envval is None or not envval.strip():
        return default
    return int(envval)


# ----- Parallélisme & reproductibilité -----
THREADS = _int(os.getenv("MEDIALFIT_THREADS"), 1)
SEED = _int(os.getenv("MEDIALFIT_SEED"), 0)


# ----- Évaluation (vérité terrain 2D) -----
RESOLUTION = _int(os.getenv("MEDIALFIT_RESOLUTION"), 1024)


# ----- Storage -----
DB_PATH = os.getenv("MEDIALFIT_DB_PATH", "medialfit.sqlite3")
OUT_DIR = os.getenv("MEDIALFIT_OUT_DIR", "runs")


# ----- Logs -----
LOG_LEVEL = os.getenv("MEDIALFIT_LOG_LEVEL", "INFO").upper()
