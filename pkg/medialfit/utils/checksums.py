# checksums.py
from __future__ import annotations
import hashlib
from pathlib import Path

import numpy as np


def array_checksum(*arrays: np.ndarray) -> str:
    """sha1 sur les octets (float64, C-contigus) + formes : deux nuages égaux bit à bit ⇒ même somme."""
    h = hashlib.sha1()
    for a in arrays:
        a = np.ascontiguousarray(a, dtype=np.float64)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def file_checksum(path: str | Path) -> str:
    h = hashlib.sha1()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
