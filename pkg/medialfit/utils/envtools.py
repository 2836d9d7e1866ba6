from __future__ import annotations
import os
from typing import Dict, Tuple

# clé → (valeur par défaut, type attendu)
ENV_GROUPS = {
    "Parallélisme & reproductibilité": {
        "MEDIALFIT_THREADS": ("1", int),
        "MEDIALFIT_SEED": ("0", int),
    },
    "Évaluation": {
        "MEDIALFIT_RESOLUTION": ("1024", int),
    },
    "Stockage": {
        "MEDIALFIT_DB_PATH": ("medialfit.sqlite3", str),
        "MEDIALFIT_OUT_DIR": ("runs", str),
    },
    "Logs": {
        "MEDIALFIT_LOG_LEVEL": ("INFO", str),
    },
}

_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


# ───────────────────────────────────────────────
# Générateurs et vérifs
# ───────────────────────────────────────────────
def generate_env_example() -> str:
    lines = [
        "# medialfit — .env.example",
        "# Duplique ce fichier en .env ; toutes les variables sont optionnelles.",
    ]
    for group, keys in ENV_GROUPS.items():
        lines += ["", f"### {group}"]
        lines += [f'{k}="{default}"' for k, (default, _) in keys.items()]
    lines.append("")
    return "\n".join(lines)


def write_env_example(path: str = ".env.example", overwrite: bool = False) -> str:
    if os.path.exists(path) and not overwrite:
        return path
    with open(path, "w", encoding="utf-8") as f:
        f.write(generate_env_example())
    return path


def check_env() -> Tuple[Dict[str, bool], Dict[str, str]]:
    """
    Retourne (status_par_clef, erreurs_par_clef).
    Une clé absente est OK (valeur par défaut) ; une clé présente doit se parser.
    """
    status: Dict[str, bool] = {}
    errors: Dict[str, str] = {}
    for keys in ENV_GROUPS.values():
        for k, (_, kind) in keys.items():
            raw = os.getenv(k)
            ok = True
            if raw is not None and raw.strip():
                if kind is int:
                    try:
                        ok = int(raw) >= (1 if k in ("MEDIALFIT_THREADS", "MEDIALFIT_RESOLUTION") else 0)
                    except ValueError:
                        ok = False
                    if not ok:
                        errors[k] = f"entier attendu, reçu {raw!r}"
                elif k == "MEDIALFIT_LOG_LEVEL" and raw.strip().upper() not in _LEVELS:
                    ok = False
                    errors[k] = f"niveau inconnu {raw!r}"
            status[k] = ok
    return status, errors
