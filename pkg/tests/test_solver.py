from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from medialfit.core.cloud import perturb
from medialfit.core.errors import SingularSystem
from medialfit.core.evaluation import ground_truth, metrics
from medialfit.core.models import NoiseSpec, Sphere, SolverConfig
from medialfit.core.shapes import circle, ellipse, notched_box
from medialfit.core.solver import (
    build_system,
    default_params,
    gauss_newton_step,
    initial_sphere,
    inscription_support_weight,
    inverse_radius_residual,
    irls_weights,
    maximality_residual,
    pinning_residual,
    resolve_pins,
    solve_all,
    solve_all_irls,
    solve_sphere,
    target_radius_residual,
    variant_blend,
)


# ── paramètres par défaut ─────────────────────────────────────────────────────
def test_default_params_at_zero_noise():
    cfg = default_params(0.0)
    assert cfg.omega_ratio == pytest.approx(0.02)
    assert cfg.h_blend == pytest.approx(0.49)
    assert cfg.h_support == pytest.approx(0.49)
    assert cfg.d_pin == 0.0
    assert cfg.epsilon == 100.0


def test_default_params_are_linear_in_sigma():
    cfg = default_params(1.0)
    assert cfg.omega_ratio == pytest.approx(0.027)
    assert cfg.h_blend == pytest.approx(1.23)
    assert cfg.d_pin == pytest.approx(0.75)
    for sigma in (0.0, 0.5, 3.0):
        assert default_params(sigma).epsilon == 100.0


def test_default_params_overrides_and_bounds():
    assert default_params(1.0, max_iters=7, h_support=None).max_iters == 7
    with pytest.raises(ValueError):
        default_params(-0.1)


def test_world_units_and_irls_epsilon():
    cfg = default_params(0.0, irls="l1")
    world = cfg.world(2.0)
    assert world.epsilon == pytest.approx(2.0 / 20.0)
    assert world.h_support == pytest.approx(0.0098)
    assert world.step_tol == pytest.approx(2e-6)


# ── résidus élémentaires ──────────────────────────────────────────────────────
def test_maximality_residual_is_constant_pressure():
    for r_prev in (0.01, 1.0, 50.0):
        res, grad = maximality_residual(r_prev, r_prev, 0.7)
        assert abs(res) == pytest.approx(0.7)
        np.testing.assert_array_equal(grad, [0.0, 0.0, 1.0])
    assert maximality_residual(1.7, 1.0, 0.7)[0] == pytest.approx(0.0)
    np.testing.assert_array_equal(maximality_residual(1.0, 1.0, 0.7, dim=3)[1], [0, 0, 0, 1])


def test_pinning_residual_examples():
    p = np.array([0.0, 0.0])
    res, grad = pinning_residual(Sphere.of(p, 0.3), p, 0.1)
    assert res == 0.0
    np.testing.assert_array_equal(grad, 0.0)
    assert pinning_residual(Sphere.of((3.0, 0.0), 2.0), p, 1.0)[0] == 0.0
    res, grad = pinning_residual(Sphere.of((3.3, 0.0), 2.0), p, 1.0)
    assert res == pytest.approx(0.3)
    np.testing.assert_allclose(grad, [1.0, 0.0, -1.0])


def test_inscription_support_weight_examples():
    s_prev = Sphere.of((0.0, 0.0), 1.0)
    h = 0.4
    assert inscription_support_weight(s_prev, (0.5, 0.0), h) == 1.0
    assert inscription_support_weight(s_prev, (0.0, 1.0 + h), h) == pytest.approx(0.0, abs=1e-12)
    assert inscription_support_weight(s_prev, (0.0, 1.0 + h / 2), h) == pytest.approx(0.31640625)


def test_variant_residuals():
    x = np.array([0.0, 0.3, 1.0])
    np.testing.assert_array_equal(variant_blend(x, "point_only"), 0.0)
    np.testing.assert_array_equal(variant_blend(x, "plane_only"), 1.0)
    np.testing.assert_array_equal(variant_blend(x, "blended"), x)

    res, grad = inverse_radius_residual(0.01, 1e-9)
    assert res == pytest.approx(100.0)
    ratio = grad[-1] / inverse_radius_residual(1.0, 1e-9)[1][-1]
    assert ratio == pytest.approx(1e4)
    # r sous le plancher : valeur bornée
    assert inverse_radius_residual(0.0, 1e-3)[0] == pytest.approx(1e3)

    res, grad = target_radius_residual(0.4, 0.25)
    assert res == pytest.approx(0.15)
    np.testing.assert_array_equal(grad, [0.0, 0.0, 1.0])


def test_target_radius_requires_r_max():
    with pytest.raises(ValidationError):
        SolverConfig(maximality_variant="target_radius")
    assert SolverConfig(maximality_variant="target_radius", r_max=10.0).world(2.0).r_max == pytest.approx(0.2)


def test_irls_weights_saturate():
    np.testing.assert_allclose(irls_weights(np.array([0.0, 0.5, -2.0, 4.0]), 1.0), [1.0, 1.0, 0.5, 0.25])
    np.testing.assert_array_equal(irls_weights(np.array([0.3, 7.0]), 1e12), [1.0, 1.0])


# ── système normal et pas de Gauss-Newton ─────────────────────────────────────
def test_build_system_without_support(circle_cloud):
    cfg = default_params(0.0, pinning=False)
    s = Sphere.of((50.0, 50.0), 1.0)
    JtJ, Jtr, energy = build_system(s, s, circle_cloud, 0, cfg)
    eps = cfg.world(circle_cloud.diag).epsilon
    w1 = cfg.omega1
    expected = np.zeros((3, 3))
    expected[2, 2] = w1
    np.testing.assert_allclose(JtJ, expected)
    np.testing.assert_allclose(Jtr, [0.0, 0.0, -w1 * eps])
    assert energy == pytest.approx(w1 * eps * eps)

    delta = gauss_newton_step(JtJ, Jtr, cfg.step_damping * np.trace(JtJ))
    np.testing.assert_array_equal(delta[:2], 0.0)
    assert delta[2] == pytest.approx(eps / (1.0 + cfg.step_damping), rel=1e-12)


def test_gauss_newton_identity_and_damping_limit():
    v = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(gauss_newton_step(np.eye(3), v, 0.0), -v)
    assert np.linalg.norm(gauss_newton_step(np.eye(3), v, 1e14)) < 1e-10


def test_gauss_newton_matches_dense_solve(rng):
    for _ in range(20):
        A = rng.normal(size=(4, 4))
        JtJ = A @ A.T + 0.1 * np.eye(4)
        Jtr = rng.normal(size=4)
        lam = rng.uniform(0.0, 0.01)
        ref = np.linalg.solve(JtJ + lam * np.eye(4), -Jtr)
        np.testing.assert_allclose(gauss_newton_step(JtJ, Jtr, lam), ref, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("JtJ", [np.diag([1.0, 0.0, 0.0]), np.diag([1.0, 1e-20, 1.0])])
def test_gauss_newton_singular(JtJ):
    with pytest.raises(SingularSystem):
        gauss_newton_step(JtJ, np.ones(3), 0.0)


# ── une sphère ────────────────────────────────────────────────────────────────
def test_maximality_only_dynamics(circle_cloud):
    cfg = default_params(0.0, omega2=0.0, pinning=False, max_iters=3, init="surface")
    init = initial_sphere(circle_cloud, 0, cfg)
    atom = solve_sphere(0, circle_cloud, cfg, init)
    eps = cfg.world(circle_cloud.diag).epsilon
    assert atom.iterations_run == 3
    assert not atom.converged
    np.testing.assert_array_equal(atom.sphere.c, init.c)
    assert atom.sphere.radius == pytest.approx(init.radius + 3 * eps / (1.0 + cfg.step_damping), rel=1e-12)


def test_initial_sphere_modes(circle_cloud):
    cfg = default_params(0.0, init="surface")
    s = initial_sphere(circle_cloud, 3, cfg)
    diag = circle_cloud.diag
    np.testing.assert_allclose(s.c, circle_cloud.points[3] - 0.25 * diag * circle_cloud.normals[3])
    assert s.radius == pytest.approx(0.25 * diag)

    cfg = default_params(0.0, seed=4)
    a, b = initial_sphere(circle_cloud, 3, cfg), initial_sphere(circle_cloud, 3, cfg)
    assert a == b
    assert 0.05 * diag <= a.radius <= 0.5 * diag
    assert np.all(a.c >= circle_cloud.bbox_min) and np.all(a.c <= circle_cloud.bbox_max)
    assert initial_sphere(circle_cloud, 4, cfg) != a


def test_init_below_floor_is_rejected(circle_cloud):
    cfg = default_params(0.0, radius_floor=0.1)
    with pytest.raises(ValueError):
        solve_sphere(0, circle_cloud, cfg, Sphere.of((0.0, 0.0), 0.05))


def test_circle_pin_recovers_center(circle_cloud):
    cfg = default_params(0.0, init="surface")
    diag = circle_cloud.diag
    for pin in (0, 40, 97):
        atom = solve_sphere(pin, circle_cloud, cfg)
        assert np.linalg.norm(atom.sphere.c) <= 0.01 * diag
        assert abs(atom.sphere.radius - 1.0) <= 0.01 * diag


def test_slab_pin_recovers_half_gap(slab_cloud):
    # sphère intérieure qui ne touche aucune des deux droites
    atom = solve_sphere(200, slab_cloud, default_params(0.0), Sphere.of((0.0, 0.0), 0.2))
    assert abs(atom.sphere.radius - 0.25) <= 0.01 * slab_cloud.diag


def test_outer_iteration_minimizes_frozen_energy(circle_cloud):
    cfg = default_params(0.0, init="surface", pinning=False, max_iters=1)
    init = initial_sphere(circle_cloud, 0, cfg)
    atom = solve_sphere(0, circle_cloud, cfg, init)
    _, _, e0 = build_system(init, init, circle_cloud, 0, cfg)
    _, _, e1 = build_system(atom.sphere, init, circle_cloud, 0, cfg)
    # l'énergie à poids figés baisse nettement dès la première itération
    assert e1 < 0.5 * e0


def test_circle_pin_settles_without_oscillating(circle_cloud):
    cfg = default_params(0.0, init="surface")
    diag = circle_cloud.diag
    atom = solve_sphere(0, circle_cloud, cfg)
    assert atom.converged
    assert atom.iterations_run < cfg.max_iters
    assert atom.final_step_norm < cfg.world(diag).step_tol
    # repartir du point fixe ne déplace plus la sphère
    again = solve_sphere(0, circle_cloud, cfg, atom.sphere)
    np.testing.assert_allclose(again.sphere.as_vector(), atom.sphere.as_vector(), atol=1e-3 * diag)


def test_zero_support_atom_is_logged(circle_cloud, caplog):
    cfg = default_params(0.0, pinning=False, max_iters=1)
    with caplog.at_level("WARNING", logger="medialfit.core.solver"):
        solve_sphere(0, circle_cloud, cfg, Sphere.of((50.0, 50.0), 1.0))
    assert any("aucun point de support" in r.getMessage() for r in caplog.records)


def test_clamped_inverse_radius_is_logged(circle_cloud, caplog):
    cfg = default_params(0.0, maximality_variant="inverse_radius", radius_floor=0.5, max_iters=1)
    with caplog.at_level("WARNING", logger="medialfit.core.solver"):
        build_system(Sphere.of((0.0, 0.0), 0.5), Sphere.of((0.0, 0.0), 0.5), circle_cloud, 0, cfg)
    assert [r.levelname for r in caplog.records if "inverse_radius" in r.getMessage()] == ["WARNING"]


# ── toutes les sphères ────────────────────────────────────────────────────────
def test_resolve_pins(circle_cloud):
    assert resolve_pins(circle_cloud, "all") == list(range(128))
    assert resolve_pins(circle_cloud, [5, 2]) == [5, 2]
    with pytest.raises(ValueError):
        resolve_pins(circle_cloud, [128])
    with pytest.raises(ValueError):
        resolve_pins(circle_cloud, "some")


def test_solve_all_cardinality_and_order(circle_cloud):
    cfg = default_params(0.0, max_iters=5)
    result = solve_all(circle_cloud, cfg, pins=[7, 3, 7])
    assert [a.pin_index for a in result.atoms] == [7, 3, 7]
    assert result.atoms[0] == result.atoms[2]
    assert result.method == "lsmat"
    assert result.cloud_checksum == circle_cloud.checksum()
    assert len(solve_all(circle_cloud, cfg).atoms) == len(circle_cloud)


def test_solve_all_is_thread_count_independent(circle_cloud):
    cfg = default_params(1.0, max_iters=15)
    cloud = perturb(circle_cloud, NoiseSpec(sigma_p=1.0, seed=2))
    one = solve_all(cloud, cfg, threads=1)
    eight = solve_all(cloud, cfg, threads=8)
    np.testing.assert_array_equal(one.centers(), eight.centers())
    np.testing.assert_array_equal(one.radii(), eight.radii())
    assert one.model_dump() == eight.model_dump()


def test_pinning_feasibility(circle_cloud):
    cloud = perturb(circle_cloud, NoiseSpec(sigma_p=2.0, outlier_fraction=0.05, seed=9))
    cfg = default_params(2.0, max_iters=10)
    result = solve_all(cloud, cfg)
    d_pin = cfg.world(cloud.diag).d_pin
    for atom in result.atoms:
        if atom.failed:
            continue
        gap = np.linalg.norm(atom.sphere.c - cloud.points[atom.pin_index]) - atom.sphere.radius
        assert gap <= d_pin + 1e-6 * cloud.diag


def test_trace_frames(circle_cloud):
    cfg = default_params(0.0, max_iters=10, init="surface")
    result = solve_all(circle_cloud, cfg, pins=[0, 1], trace_every=5)
    assert set(result.trace) == {0, 5, 10}
    assert result.trace[0].shape == (2, 3)
    np.testing.assert_allclose(result.trace[0][0], initial_sphere(circle_cloud, 0, cfg).as_vector())
    assert "trace" not in result.model_dump()


def test_singular_system_marks_atom_failed(circle_cloud, monkeypatch):
    from medialfit.core import solver

    def boom(*_a, **_k):
        raise SingularSystem("forcé")

    monkeypatch.setattr(solver, "gauss_newton_step", boom)
    result = solve_all(circle_cloud, default_params(0.0), pins=[0, 1])
    assert result.failures == 2
    assert all(a.failed and a.failure == "forcé" for a in result.atoms)
    assert result.converged_fraction == 0.0


# ── IRLS ──────────────────────────────────────────────────────────────────────
def test_irls_requires_l1(circle_cloud):
    with pytest.raises(ValueError):
        solve_all_irls(circle_cloud, default_params(0.0))


def test_irls_with_saturated_delta_reproduces_plain_solve(circle_cloud):
    plain = default_params(0.0, max_iters=10, init="surface")
    l1 = plain.model_copy(update={"irls": "l1", "irls_delta": 1e12, "irls_eps_factor": 1.0})
    a = solve_all(circle_cloud, plain, pins=range(0, 128, 9))
    b = solve_all_irls(circle_cloud, l1, pins=range(0, 128, 9))
    assert b.method == "lsmat-irls"
    np.testing.assert_array_equal(a.centers(), b.centers())
    np.testing.assert_array_equal(a.radii(), b.radii())


# ── recette (lent) ────────────────────────────────────────────────────────────
@pytest.mark.slow
def test_noisy_ellipse_converges():
    shape = ellipse(400)
    cloud = perturb(shape.cloud, NoiseSpec(sigma_p=2.0, seed=0))
    result = solve_all(cloud, default_params(2.0), threads=4)
    assert result.converged_fraction >= 0.9


@pytest.mark.slow
def test_clean_circle_random_init_error_is_small():
    shape = circle(512)
    result = solve_all(shape.cloud, default_params(0.0), threads=4)
    report = metrics(result, ground_truth(shape.loops, 512), diag=shape.diag)
    assert report.e_avg <= 1.0


@pytest.mark.slow
def test_irls_helps_with_outliers():
    shape = ellipse(400)
    gt = ground_truth(shape.loops, 512)
    clean = shape.cloud
    r_plain = solve_all(clean, default_params(0.0), threads=4)
    r_l1 = solve_all_irls(clean, default_params(0.0, irls="l1"), threads=4)
    e_plain = metrics(r_plain, gt, diag=shape.diag).e_avg
    assert abs(metrics(r_l1, gt, diag=shape.diag).e_avg - e_plain) <= 0.5

    noisy = perturb(clean, NoiseSpec(outlier_fraction=0.1, seed=1))
    pins = noisy.inlier_indices()
    plain = metrics(solve_all(noisy, default_params(0.0), pins, threads=4), gt, diag=shape.diag)
    robust = metrics(solve_all_irls(noisy, default_params(0.0, irls="l1"), pins, threads=4), gt, diag=shape.diag)
    assert robust.e_avg < plain.e_avg


@pytest.mark.slow
def test_point_only_matches_blended_on_convex_shape():
    cloud = circle(256).cloud
    a = solve_all(cloud, default_params(0.0, init="surface"), threads=4)
    b = solve_all(cloud, default_params(0.0, init="surface", inscription_variant="point_only"), threads=4)
    assert np.max(np.abs(a.radii() - b.radii())) <= 0.01 * cloud.diag


@pytest.mark.slow
def test_plane_only_fails_near_notch():
    cloud = notched_box(800).cloud
    cfg = default_params(0.0, init="surface")
    blended = solve_all(cloud, cfg, threads=4)
    plane = solve_all(cloud, cfg.model_copy(update={"inscription_variant": "plane_only"}), threads=4)
    assert np.any(plane.radii() < 0.5 * blended.radii())
