# medialfit/storage/db.py
"""Registre local des exécutions (SQLite) : un manifeste JSON par commande."""
from __future__ import annotations

import logging
import sqlite3
from typing import List, Optional, Tuple

from .. import config
from ..core.models import RunManifest

log = logging.getLogger(__name__)


# ── connexion unique ───────────────────────────────────────────────────────────
def db_path() -> str:
    return config.DB_PATH


def _connect() -> sqlite3.Connection:
    con = sqlite3.connect(db_path())
    con.execute("PRAGMA journal_mode=WAL;")
    con.execute("PRAGMA synchronous=NORMAL;")
    return con


# ── init DB ────────────────────────────────────────────────────────────────────
def ensure_schema() -> None:
    con = _connect()
    cur = con.cursor()
    cur.execute("""
    CREATE TABLE IF NOT EXISTS runs (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        command TEXT NOT NULL,
        started TEXT NOT NULL,
        finished TEXT,
        seconds REAL,
        manifest TEXT NOT NULL      -- RunManifest sérialisé (alias "schema")
    )
    """)
    con.commit()
    con.close()


# ── écriture / lecture ─────────────────────────────────────────────────────────
def record_run(manifest: RunManifest) -> int:
    ensure_schema()
    seconds: Optional[float] = None
    if manifest.finished is not None:
        seconds = (manifest.finished - manifest.started).total_seconds()
        if seconds < 0.0:
            log.warning("run %s : fin antérieure au début (%.3gs), durée ramenée à 0", manifest.command, seconds)
            seconds = 0.0
    con = _connect()
    cur = con.cursor()
    cur.execute(
        "INSERT INTO runs(command, started, finished, seconds, manifest) VALUES (?, ?, ?, ?, ?)",
        (
            manifest.command,
            manifest.started.to_iso8601_string(),
            manifest.finished.to_iso8601_string() if manifest.finished else None,
            seconds,
            manifest.model_dump_json(by_alias=True),
        ),
    )
    con.commit()
    run_id = int(cur.lastrowid)
    con.close()
    return run_id


def recent_runs(limit: int = 20) -> List[Tuple[int, str, str, Optional[float], RunManifest]]:
    """(id, command, started, seconds, manifeste), du plus récent au plus ancien."""
    ensure_schema()
    con = _connect()
    cur = con.cursor()
    cur.execute(
        "SELECT id, command, started, seconds, manifest FROM runs ORDER BY id DESC LIMIT ?",
        (int(limit),),
    )
    rows = [
        (int(i), cmd, started, secs, RunManifest.model_validate_json(raw))
        for (i, cmd, started, secs, raw) in cur.fetchall()
    ]
    con.close()
    return rows


def get_run(run_id: int) -> Optional[RunManifest]:
    ensure_schema()
    con = _connect()
    cur = con.cursor()
    cur.execute("SELECT manifest FROM runs WHERE id=?", (int(run_id),))
    row = cur.fetchone()
    con.close()
    return RunManifest.model_validate_json(row[0]) if row else None


def counts() -> int:
    ensure_schema()
    con = _connect()
    n = con.execute("SELECT COUNT(*) FROM runs").fetchone()[0]
    con.close()
    return int(n)


def reset_all() -> int:
    ensure_schema()
    con = _connect()
    cur = con.cursor()
    cur.execute("DELETE FROM runs")
    n = cur.rowcount
    con.commit()
    con.close()
    return int(n)
