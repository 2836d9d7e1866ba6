# medialfit/core/errors.py
from __future__ import annotations


class MedialError(Exception):
    """Racine de toutes les erreurs du paquet."""


# ── Entrées invalides (exit 2) ────────────────────────────────────────────────
class BadInput(MedialError):
    pass


class CloudFormatError(BadInput):
    def __init__(self, path: str, line: int | None, reason: str):
        self.path = path
        self.line = line
        self.reason = reason
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {reason}")


class PolygonError(BadInput):
    pass


class SchemaMismatch(BadInput):
    pass


class DimensionMismatch(BadInput):
    pass


class UnknownShape(BadInput):
    pass


# ── Échecs numériques (exit 3) ────────────────────────────────────────────────
class SolverFailure(MedialError):
    pass


class EmptySupport(SolverFailure):
    """Tous les poids MLS sont nuls autour du point demandé."""


class SingularSystem(SolverFailure):
    """Système de Gauss-Newton amorti numériquement singulier (λ trop petit)."""


class DegenerateTangency(SolverFailure):
    """f est (presque) sur le plan tangent en p : aucune sphère tangente."""


class NonConvergence(SolverFailure):
    pass
