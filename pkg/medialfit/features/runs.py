# medialfit/features/runs.py
from __future__ import annotations

import logging
import sqlite3
from pathlib import Path
from typing import Dict, List, Optional

from ..core.models import RunManifest
from ..storage import db
from ..storage.files import manifest_path, write_manifest
from ..utils.checksums import file_checksum
from ..utils.dates import Stopwatch, now_utc

log = logging.getLogger(__name__)


class RunRecorder:
    """
    Accumule ce qu'il faut pour rejouer une commande : argv, config, sommes
    des entrées/sorties, durées par phase. `finish()` écrit le manifeste à
    côté de la sortie principale et l'ajoute au registre SQLite.
    """

    def __init__(self, command: str, argv: List[str], config: Optional[dict] = None):
        self.command = command
        self.argv = list(argv)
        self.config: dict = dict(config or {})
        self.inputs: Dict[str, str] = {}
        self.outputs: Dict[str, str] = {}
        self.iterations: Dict[str, int] = {}
        self.clock = Stopwatch()
        self.started = now_utc()

    def phase(self, name: str):
        return self.clock.phase(name)

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = file_checksum(path)

    def add_output(self, path: str | Path) -> None:
        self.outputs[str(path)] = file_checksum(path)

    def finish(self, main_output: str | Path, *, register: bool = True) -> Path:
        manifest = RunManifest(
            command=self.command,
            argv=self.argv,
            config=self.config,
            inputs=self.inputs,
            outputs=self.outputs,
            started=self.started,
            finished=now_utc(),
            timings=self.clock.timings,
            iterations=self.iterations,
        )
        path = write_manifest(manifest, manifest_path(main_output))
        if register:
            try:
                db.record_run(manifest)
            except sqlite3.Error as e:
                # le registre est un confort : la commande a réussi
                log.warning("registre %s indisponible : %s", db.db_path(), e)
        log.info("manifeste écrit : %s", path)
        return path
