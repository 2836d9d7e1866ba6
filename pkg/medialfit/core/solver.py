# medialfit/core/solver.py
"""
Optimiseur LSMAT : une sphère par point épingle, optimisée indépendamment.

À chaque itération externe t, la pression ε et les poids (support, mélange,
IRLS) sont figés en s^{t-1}, puis s^t = argmin E(s ; s^{t-1}) est obtenu par
des pas de Gauss-Newton amortis sur le système (d+1)×(d+1) :

    E = ω₁·E_maximal + ω₂·E_inscribed + ω_pin·E_pinning

Les rampes R(·) sont réévaluées à chaque pas interne. Seuls les points
renvoyés par neighbors_within(c_prev, r_prev + h_support) contribuent.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .cloud import OrientedPointCloud, neighbors_within, point_stream
from .errors import SingularSystem
from .fields import blend_weights, plane_terms, point_terms, ramp, support_weights
from .models import MedialAtom, MedialResult, Sphere, SolverConfig, WorldParams

log = logging.getLogger(__name__)

Pins = Union[Sequence[int], Literal["all"]]

_INIT_STREAM = 3
_LM_REJECT_DAMPING = 1e-6


# ──────────────────────────────────────────────────────────────────────────────
# Paramètres par défaut (fonctions linéaires de σ_p)
# ──────────────────────────────────────────────────────────────────────────────
def default_params(sigma_p: float, **overrides) -> SolverConfig:
    """ω₁/ω₂ = 0.007σ + 0.02 ; h_blend = h_support = 0.74σ + 0.49 ; d_pin = 0.75σ ; ε = 100."""
    if sigma_p < 0:
        raise ValueError("sigma_p doit être ≥ 0")
    h = 0.74 * sigma_p + 0.49
    base = dict(
        omega_ratio=0.007 * sigma_p + 0.02,
        h_blend=h,
        h_support=h,
        d_pin=0.75 * sigma_p,
        epsilon=100.0,
    )
    base.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(**base)


# ──────────────────────────────────────────────────────────────────────────────
# Résidus élémentaires (valeur, gradient ∇_s)
# ──────────────────────────────────────────────────────────────────────────────
def maximality_residual(r: float, r_prev: float, eps: float, dim: int = 2) -> Tuple[float, np.ndarray]:
    """Pression constante : r − (r_prev + ε), gradient [0_d, 1]."""
    grad = np.zeros(dim + 1)
    grad[-1] = 1.0
    return r - (r_prev + eps), grad


def inverse_radius_residual(r: float, floor: float, dim: int = 2) -> Tuple[float, np.ndarray]:
    """Variante ‖1/r‖² ; r est borné par `floor` (> 0) pour rester fini."""
    r_eff = max(r, floor)
    grad = np.zeros(dim + 1)
    grad[-1] = -1.0 / (r_eff * r_eff)
    return 1.0 / r_eff, grad


def target_radius_residual(r: float, r_max: float, dim: int = 2) -> Tuple[float, np.ndarray]:
    """Variante ‖r − R_max‖²."""
    grad = np.zeros(dim + 1)
    grad[-1] = 1.0
    return r - r_max, grad


def pinning_residual(s: Sphere, p_pin, d_pin: float) -> Tuple[float, np.ndarray]:
    """R(‖c − p‖ − (r + d_pin)), gradient H·[(c − p)/‖c − p‖, −1]."""
    return _pinning_terms(s.c, s.radius, np.asarray(p_pin, float), d_pin)


def _pinning_terms(c: np.ndarray, r: float, p_pin: np.ndarray, d_pin: float) -> Tuple[float, np.ndarray]:
    diff = c - p_pin
    dist = float(np.linalg.norm(diff))
    res = float(ramp(dist - (r + d_pin)))
    grad = np.zeros(len(c) + 1)
    # res > 0 ⇒ dist > r + d_pin ≥ 0 : pas de division par zéro
    if res > 0.0:
        grad[:-1] = diff / dist
        grad[-1] = -1.0
    return res, grad


def inscription_support_weight(s_prev: Sphere, p_n, h_support: float) -> float:
    """φ(R(‖c_prev − p_n‖ − r_prev), h_support) : 1 dans la sphère, 0 au-delà de r_prev + h."""
    w = support_weights(s_prev.c, s_prev.radius, np.asarray(p_n, float)[None, :], h_support)
    return float(w[0])


def variant_blend(x: np.ndarray, variant: str) -> np.ndarray:
    """point_only force x = 0, plane_only force x = 1."""
    if variant == "point_only":
        return np.zeros_like(x)
    if variant == "plane_only":
        return np.ones_like(x)
    return x


def variant_maximality(r: float, r_prev: float, config: SolverConfig, world: WorldParams,
                       dim: int, floor: float) -> Tuple[float, np.ndarray]:
    if config.maximality_variant == "inverse_radius":
        if r <= floor:
            log.warning("inverse_radius : r=%.3g borné à %.3g", r, floor)
        return inverse_radius_residual(r, floor, dim)
    if config.maximality_variant == "target_radius":
        return target_radius_residual(r, world.r_max, dim)
    return maximality_residual(r, r_prev, world.epsilon, dim)


def irls_weights(rho_prev: np.ndarray, delta: float) -> np.ndarray:
    """
    Poids ℓ¹ : δ / max(|ρ_prev|, δ) — le facteur 1/max(|ρ|, δ) normalisé par δ,
    donc 1 pour les petits résidus et δ → ∞ redonne les moindres carrés.
    """
    return delta / np.maximum(np.abs(rho_prev), delta)


# ──────────────────────────────────────────────────────────────────────────────
# Assemblage du système normal
# ──────────────────────────────────────────────────────────────────────────────
def _inverse_floor(config: SolverConfig, diag: float) -> float:
    return max(config.radius_floor, 1e-9 * diag)


class _Frozen(NamedTuple):
    """Poids d'une itération externe, figés en s_prev."""

    r_prev: float
    P: np.ndarray          # points du support (k, d)
    N: np.ndarray
    a: np.ndarray          # ω₂·w·x (plan), IRLS inclus
    b: np.ndarray          # ω₂·w·(1 − x) (point)

    @property
    def support(self) -> int:
        return len(self.P)


def _freeze(s_prev: np.ndarray, cloud: OrientedPointCloud, config: SolverConfig,
            world: WorldParams) -> _Frozen:
    d = cloud.dim
    c_prev, r_prev = s_prev[:d], float(s_prev[d])
    empty = _Frozen(r_prev, np.empty((0, d)), np.empty((0, d)), np.empty(0), np.empty(0))
    if config.omega2 <= 0.0:
        return empty
    idx = neighbors_within(cloud, c_prev, r_prev + world.h_support)
    if not idx:
        return empty
    P = cloud.points[idx]
    N = cloud.normals[idx]
    w = support_weights(c_prev, r_prev, P, world.h_support)
    keep = w > 0.0
    P, N, w = P[keep], N[keep], w[keep]
    x = variant_blend(blend_weights(c_prev, P, N, world.h_blend), config.inscription_variant)
    a = config.omega2 * w * x
    b = config.omega2 * w * (1.0 - x)
    if config.irls == "l1":
        rho_pl, _ = plane_terms(c_prev, r_prev, P, N)
        rho_pt, _ = point_terms(c_prev, r_prev, P)
        a = a * irls_weights(rho_pl, world.irls_delta)
        b = b * irls_weights(rho_pt, world.irls_delta)
    return _Frozen(r_prev, P, N, a, b)


def _assemble(s: np.ndarray, frozen: _Frozen, cloud: OrientedPointCloud, pin_index: int,
              config: SolverConfig, world: WorldParams) -> Tuple[np.ndarray, np.ndarray, float]:
    d = cloud.dim
    c, r = s[:d], float(s[d])
    JtJ = np.zeros((d + 1, d + 1))
    Jtr = np.zeros(d + 1)
    energy = 0.0

    # maximalité
    res, grad = variant_maximality(r, frozen.r_prev, config, world, d, _inverse_floor(config, cloud.diag))
    JtJ += config.omega1 * np.outer(grad, grad)
    Jtr += config.omega1 * res * grad
    energy += config.omega1 * res * res

    # inscription
    if frozen.support:
        a, b = frozen.a, frozen.b
        v_pl, g_pl = plane_terms(c, r, frozen.P, frozen.N)
        v_pt, g_pt = point_terms(c, r, frozen.P)
        JtJ += g_pl.T @ (a[:, None] * g_pl) + g_pt.T @ (b[:, None] * g_pt)
        Jtr += g_pl.T @ (a * v_pl) + g_pt.T @ (b * v_pt)
        energy += float(np.sum(a * v_pl * v_pl) + np.sum(b * v_pt * v_pt))

    # épinglage
    if config.pinning and config.pin_weight > 0.0:
        res, grad = _pinning_terms(c, r, cloud.points[pin_index], world.d_pin)
        JtJ += config.pin_weight * np.outer(grad, grad)
        Jtr += config.pin_weight * res * grad
        energy += config.pin_weight * res * res

    return JtJ, Jtr, energy


def build_system(s: Sphere, s_prev: Sphere, cloud: OrientedPointCloud, pin_index: int,
                 config: SolverConfig) -> Tuple[np.ndarray, np.ndarray, float]:
    """(JtJ, Jtr, énergie) en s, poids figés en s_prev."""
    world = config.world(cloud.diag)
    frozen = _freeze(s_prev.as_vector(), cloud, config, world)
    return _assemble(s.as_vector(), frozen, cloud, pin_index, config, world)


# ──────────────────────────────────────────────────────────────────────────────
# Pas de Gauss-Newton
# ──────────────────────────────────────────────────────────────────────────────
def gauss_newton_step(JtJ: np.ndarray, Jtr: np.ndarray, damping: float) -> np.ndarray:
    """Résout (JtJ + λ·I)·δ = −Jtr par Cholesky dense."""
    A = np.asarray(JtJ, dtype=float) + damping * np.eye(len(Jtr))
    try:
        factor = linalg.cho_factor(A, lower=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularSystem(f"système amorti non défini positif (λ={damping:.3g})") from e
    diag_l = np.abs(np.diag(factor[0]))
    if not np.all(np.isfinite(diag_l)) or diag_l.min() <= 1e-8 * diag_l.max():
        raise SingularSystem(f"système amorti numériquement singulier (λ={damping:.3g})")
    return linalg.cho_solve(factor, -np.asarray(Jtr, dtype=float))


# ──────────────────────────────────────────────────────────────────────────────
# Une sphère
# ──────────────────────────────────────────────────────────────────────────────
def initial_sphere(cloud: OrientedPointCloud, pin_index: int, config: SolverConfig) -> Sphere:
    """
    random : c uniforme dans la bbox, r uniforme dans [0.05, 0.5]·diag
             (flux aléatoire propre à l'épingle) ;
    surface : c = p − 0.25·diag·n, r = 0.25·diag.
    """
    diag = cloud.diag
    if config.init == "surface":
        c = cloud.points[pin_index] - 0.25 * diag * cloud.normals[pin_index]
        r = 0.25 * diag
    else:
        rng = point_stream(config.seed, pin_index, _INIT_STREAM)
        c = rng.uniform(cloud.bbox_min, cloud.bbox_max)
        r = rng.uniform(0.05, 0.5) * diag
    return Sphere.of(c, max(r, config.radius_floor))


def _minimize_frozen(s_prev: np.ndarray, frozen: _Frozen, pin_index: int, cloud: OrientedPointCloud,
                     config: SolverConfig, world: WorldParams) -> np.ndarray:
    """
    argmin_s E(s ; s_prev) : Gauss-Newton amorti à la Levenberg-Marquardt.
    Les rampes sont réévaluées à chaque pas ; un pas qui n'abaisse pas
    l'énergie est refusé et l'amortissement multiplié par 10.
    """
    d = cloud.dim
    s = s_prev.copy()
    JtJ, Jtr, energy = _assemble(s, frozen, cloud, pin_index, config, world)
    lam = config.step_damping * float(np.trace(JtJ))
    for _ in range(config.inner_iters):
        delta = gauss_newton_step(JtJ, Jtr, lam)
        if not np.all(np.isfinite(delta)):
            raise SingularSystem("pas de Gauss-Newton non fini")
        if float(np.linalg.norm(delta)) < world.step_tol:
            break
        trial = s + delta
        if trial[d] < config.radius_floor:
            trial[d] = config.radius_floor
        JtJ_t, Jtr_t, energy_t = _assemble(trial, frozen, cloud, pin_index, config, world)
        if energy_t < energy:
            s, JtJ, Jtr, energy = trial, JtJ_t, Jtr_t, energy_t
            lam = max(lam / 10.0, config.step_damping * float(np.trace(JtJ)))
        else:
            lam = max(10.0 * lam, _LM_REJECT_DAMPING * float(np.trace(JtJ)))
    return s


def _iterate(pin_index: int, cloud: OrientedPointCloud, config: SolverConfig, world: WorldParams,
             init: Sphere, trace_every: int = 0) -> Tuple[MedialAtom, Dict[int, np.ndarray]]:
    d = cloud.dim
    s = init.as_vector()
    frames: Dict[int, np.ndarray] = {0: s.copy()} if trace_every else {}
    step = math.inf
    converged = False
    support = 0
    t = 0
    for t in range(1, config.max_iters + 1):
        s_prev = s
        frozen = _freeze(s_prev, cloud, config, world)
        support = frozen.support
        s = _minimize_frozen(s_prev, frozen, pin_index, cloud, config, world)
        step = float(np.linalg.norm(s - s_prev))
        if trace_every and t % trace_every == 0:
            frames[t] = s.copy()
        if step < world.step_tol:
            converged = True
            break

    if config.omega2 > 0.0 and support == 0:
        log.warning("pin %d : aucun point de support à la dernière itération", pin_index)

    if trace_every:
        # point fixe atteint : l'état ne bouge plus jusqu'à max_iters
        for k in range(trace_every, config.max_iters + 1, trace_every):
            frames.setdefault(k, s.copy())

    if config.pinning:
        # projection finale sur ‖c − p‖ − r ≤ d_pin (la pénalité laisse un résidu)
        p_pin = cloud.points[pin_index]
        diff = s[:d] - p_pin
        dist = float(np.linalg.norm(diff))
        limit = s[d] + world.d_pin
        if dist > limit:
            s[:d] = p_pin + diff * (limit / dist)

    atom = MedialAtom(
        sphere=Sphere.of(s[:d], s[d]),
        pin_index=int(pin_index),
        iterations_run=t,
        converged=converged,
        final_step_norm=step,
    )
    log.debug("pin %d : %d itérations, pas final %.3g, convergé=%s", pin_index, t, step, converged)
    return atom, frames


def solve_sphere(pin_index: int, cloud: OrientedPointCloud, config: SolverConfig,
                 init: Optional[Sphere] = None) -> MedialAtom:
    """Itère s^t = argmin E(s ; s^{t−1}) jusqu'à max_iters ; propage SingularSystem."""
    if init is None:
        init = initial_sphere(cloud, pin_index, config)
    if init.radius < config.radius_floor:
        raise ValueError("init.radius < radius_floor")
    atom, _ = _iterate(pin_index, cloud, config, config.world(cloud.diag), init)
    return atom


# ──────────────────────────────────────────────────────────────────────────────
# Toutes les sphères
# ──────────────────────────────────────────────────────────────────────────────
def resolve_pins(cloud: OrientedPointCloud, pins: Pins) -> List[int]:
    if isinstance(pins, str):
        if pins != "all":
            raise ValueError(f"pins inconnu : {pins!r}")
        return list(range(len(cloud)))
    out = [int(i) for i in pins]
    bad = [i for i in out if not 0 <= i < len(cloud)]
    if bad:
        raise ValueError(f"indices d'épingle hors bornes : {bad[:5]}")
    return out


def run_per_pin(fn, pins: Iterable[int], threads: int = 1) -> list:
    """Applique fn à chaque épingle ; l'ordre de sortie suit l'ordre des épingles."""
    pins = list(pins)
    if threads <= 1 or len(pins) <= 1:
        return [fn(i) for i in pins]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, pins, chunksize=max(1, len(pins) // (8 * threads))))


def solve_all(cloud: OrientedPointCloud, config: SolverConfig, pins: Pins = "all", *,
              threads: int = 1, trace_every: int = 0) -> MedialResult:
    """Une optimisation indépendante par épingle ; résultat indépendant du nombre de threads."""
    pin_list = resolve_pins(cloud, pins)
    world = config.world(cloud.diag)
    d = cloud.dim

    def work(pin: int):
        init = initial_sphere(cloud, pin, config)
        try:
            return _iterate(pin, cloud, config, world, init, trace_every)
        except SingularSystem as e:
            log.warning("pin %d : échec (%s)", pin, e)
            atom = MedialAtom(sphere=init, pin_index=pin, failed=True, failure=str(e))
            return atom, {}

    out = run_per_pin(work, pin_list, threads)
    atoms = [a for a, _ in out]
    trace: Dict[int, np.ndarray] = {}
    ok = [f for a, f in out if not a.failed]
    if trace_every and ok:
        for k in sorted(ok[0]):
            trace[k] = np.stack([f[k] for f in ok]).reshape(-1, d + 1)

    result = MedialResult(
        method="lsmat-irls" if config.irls == "l1" else "lsmat",
        atoms=atoms,
        config=config,
        cloud_checksum=cloud.checksum(),
        dim=d,
        diag=cloud.diag,
        trace=trace,
    )
    log.info(
        "%s : %d sphères, %.0f%% convergées, %d échecs",
        result.method, len(atoms), 100.0 * result.converged_fraction, result.failures,
    )
    return result


def solve_all_irls(cloud: OrientedPointCloud, config: SolverConfig, pins: Pins = "all", *,
                   threads: int = 1, trace_every: int = 0) -> MedialResult:
    """Variante ℓ¹ (IRLS) : exige config.irls == 'l1' ; ε réduit par irls_eps_factor."""
    if config.irls != "l1":
        raise ValueError("solve_all_irls exige config.irls = 'l1'")
    return solve_all(cloud, config, pins, threads=threads, trace_every=trace_every)
