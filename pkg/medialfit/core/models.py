from __future__ import annotations

import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pendulum as p
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator


# ── Sphère ────────────────────────────────────────────────────────────────────
class Sphere(BaseModel):
    """Sphère candidate s = (c, r), en unités monde."""

    model_config = ConfigDict(frozen=True)

    center: Tuple[float, ...]
    radius: float = Field(ge=0.0)

    @field_validator("center")
    @classmethod
    def _finite(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(v) not in (2, 3):
            raise ValueError("center doit être de dimension 2 ou 3")
        if not all(math.isfinite(x) for x in v):
            raise ValueError("center non fini")
        return v

    @classmethod
    def of(cls, c: Sequence[float] | np.ndarray, r: float) -> "Sphere":
        return cls(center=tuple(float(x) for x in np.asarray(c, dtype=float)), radius=float(r))

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.center)

    def as_vector(self) -> np.ndarray:
        """[c, r] — l'ordre des inconnues du solveur."""
        return np.append(self.c, self.radius)


# ── Bruit ─────────────────────────────────────────────────────────────────────
class NoiseSpec(BaseModel):
    sigma_p: float = Field(0.0, ge=0.0)              # % de la diagonale
    mode: Literal["isotropic", "along_normal"] = "isotropic"
    outlier_fraction: float = Field(0.0, ge=0.0, lt=1.0)
    seed: int = 0


# ── Configuration du solveur ─────────────────────────────────────────────────
InscriptionVariant = Literal["blended", "point_only", "plane_only"]
MaximalityVariant = Literal["constant_pressure", "inverse_radius", "target_radius"]


class SolverConfig(BaseModel):
    """
    Tous les réglages de l'optimiseur. Les longueurs (h_blend, h_support, d_pin,
    epsilon, r_max, irls_delta) sont en % de la diagonale ; la conversion en
    unités monde se fait une seule fois, à l'entrée du solveur (`world()`).
    """

    model_config = ConfigDict(frozen=True)

    omega_ratio: float = Field(0.02, gt=0.0)          # ω₁/ω₂ (ω₁ = ratio × ω₂ nominal = 1)
    omega2: float = Field(1.0, ge=0.0)               # poids de l'inscription (ablation : 0)
    h_blend: float = Field(0.49, gt=0.0)
    h_support: float = Field(0.49, gt=0.0)
    d_pin: float = Field(0.0, ge=0.0)
    epsilon: float = Field(100.0, gt=0.0)
    pin_weight: float = Field(10.0, ge=0.0)          # ω_pin = 10 × ω₂ nominal
    pinning: bool = True
    max_iters: int = Field(40, ge=1)
    inner_iters: int = Field(25, ge=1)               # pas amortis par itération externe
    step_damping: float = Field(1e-8, ge=0.0)        # λ_GN relatif à trace(JtJ)
    radius_floor: float = Field(0.0, ge=0.0)         # unités monde
    inscription_variant: InscriptionVariant = "blended"
    maximality_variant: MaximalityVariant = "constant_pressure"
    r_max: Optional[float] = Field(None, gt=0.0)     # % diag, pour target_radius
    irls: Literal["off", "l1"] = "off"
    irls_delta: float = Field(0.01, gt=0.0)          # % diag
    irls_eps_factor: float = Field(1.0 / 20.0, gt=0.0)
    init: Literal["random", "surface"] = "random"
    seed: int = 0
    step_tol: float = Field(1e-6, gt=0.0)            # × diag

    @model_validator(mode="after")
    def _check_variant(self) -> "SolverConfig":
        if self.maximality_variant == "target_radius" and self.r_max is None:
            raise ValueError("target_radius exige r_max")
        return self

    @property
    def omega1(self) -> float:
        return self.omega_ratio

    def world(self, diag: float) -> "WorldParams":
        s = diag / 100.0
        eps = self.epsilon * s
        if self.irls == "l1":
            eps *= self.irls_eps_factor
        return WorldParams(
            h_blend=self.h_blend * s,
            h_support=self.h_support * s,
            d_pin=self.d_pin * s,
            epsilon=eps,
            r_max=(self.r_max * s) if self.r_max is not None else None,
            irls_delta=self.irls_delta * s,
            step_tol=self.step_tol * diag,
        )


class WorldParams(BaseModel):
    """Longueurs converties en unités monde (×diag/100)."""

    model_config = ConfigDict(frozen=True)

    h_blend: float
    h_support: float
    d_pin: float
    epsilon: float
    r_max: Optional[float]
    irls_delta: float
    step_tol: float


# ── Résultats ─────────────────────────────────────────────────────────────────
class MedialAtom(BaseModel):
    sphere: Sphere
    pin_index: int
    iterations_run: int = 0
    converged: bool = False
    final_step_norm: float = 0.0
    failed: bool = False
    failure: Optional[str] = None


class MedialResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    method: Literal["lsmat", "lsmat-irls", "shrink"]
    atoms: List[MedialAtom]
    config: Optional[SolverConfig] = None            # None pour shrink
    cloud_checksum: str
    dim: int
    diag: float
    # itération → tableau (k, d+1) des sphères [c, r] des atomes non en échec ; hors sérialisation
    trace: Dict[int, np.ndarray] = Field(default_factory=dict, exclude=True)

    @property
    def failures(self) -> int:
        return sum(1 for a in self.atoms if a.failed)

    @property
    def converged_fraction(self) -> float:
        if not self.atoms:
            return 0.0
        return sum(1 for a in self.atoms if a.converged) / len(self.atoms)

    def centers(self) -> np.ndarray:
        return np.array([a.sphere.center for a in self.atoms], dtype=float).reshape(-1, self.dim)

    def radii(self) -> np.ndarray:
        return np.array([a.sphere.radius for a in self.atoms], dtype=float)


class EvalReport(BaseModel):
    e_avg: float                                   # % diag
    e_max: float                                   # % diag
    n_atoms: int
    distances: List[float]                         # % diag, une par atome

    @model_validator(mode="after")
    def _ordered(self) -> "EvalReport":
        if not (0.0 <= self.e_avg <= self.e_max + 1e-12):
            raise ValueError("invariant 0 ≤ e_avg ≤ e_max violé")
        return self

    def to_json_dict(self) -> dict:
        return {
            "schema": "medialfit-eval/1",
            "e_avg_pct": self.e_avg,
            "e_max_pct": self.e_max,
            "n_atoms": self.n_atoms,
            "distances": self.distances,
        }


# ── Manifeste d'exécution ─────────────────────────────────────────────────────
class RunManifest(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, populate_by_name=True)

    schema_id: str = Field("medialfit-manifest/1", alias="schema")
    command: str
    argv: List[str]
    config: dict
    inputs: Dict[str, str] = Field(default_factory=dict)      # chemin → sha1
    outputs: Dict[str, str] = Field(default_factory=dict)
    started: p.DateTime
    finished: Optional[p.DateTime] = None
    timings: Dict[str, float] = Field(default_factory=dict)   # phase → secondes
    iterations: Dict[str, int] = Field(default_factory=dict)  # phase → itérations

    @field_serializer("started", "finished")
    def _ser_dt(self, dt: Optional[p.DateTime], _info):
        return dt.to_iso8601_string() if dt is not None else None

    @field_validator("started", "finished", mode="before")
    @classmethod
    def _parse_dt(cls, v):
        if isinstance(v, str):
            return p.parse(v)
        return v
