# medialfit/features/replay.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, Tuple

from ..core.errors import SchemaMismatch
from ..storage.files import read_manifest
from ..utils.checksums import file_checksum

log = logging.getLogger(__name__)


def replay_manifest(path: str | Path) -> Tuple[int, Dict[str, Tuple[str, str]]]:
    """
    Ré-exécute la commande décrite par le manifeste puis compare les sommes
    SHA-1 des sorties. Retourne (code de sortie, {chemin: (attendu, obtenu)})
    pour chaque sortie divergente.
    """
    manifest = read_manifest(path)
    if not manifest.argv or manifest.argv[0] != manifest.command:
        raise SchemaMismatch(f"{path}: argv ne commence pas par la commande {manifest.command!r}")
    if manifest.command == "replay":
        raise SchemaMismatch("un manifeste de replay ne se rejoue pas")

    for src, expected in manifest.inputs.items():
        if not Path(src).exists():
            raise FileNotFoundError(src)
        if file_checksum(src) != expected:
            log.warning("entrée modifiée depuis l'exécution : %s", src)

    import typer
    from ..cli import app

    log.info("replay : medialfit %s", " ".join(manifest.argv))
    command = typer.main.get_command(app)
    code = command.main(args=list(manifest.argv), prog_name="medialfit", standalone_mode=False)
    code = int(code or 0)

    mismatches: Dict[str, Tuple[str, str]] = {}
    for out, expected in manifest.outputs.items():
        got = file_checksum(out) if Path(out).exists() else "<absent>"
        if got != expected:
            mismatches[out] = (expected, got)
    return code, mismatches
