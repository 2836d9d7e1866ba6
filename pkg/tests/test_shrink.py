from __future__ import annotations

import numpy as np
import pytest

from medialfit.core import shrink
from medialfit.core.cloud import OrientedPointCloud, perturb
from medialfit.core.errors import DegenerateTangency
from medialfit.core.evaluation import ground_truth, metrics
from medialfit.core.models import NoiseSpec
from medialfit.core.shapes import circle, rectangle
from medialfit.core.shrink import shrink_all, shrink_sphere, tangent_sphere
from medialfit.core.solver import default_params, solve_all


# ── sphère tangente ───────────────────────────────────────────────────────────
def test_tangent_sphere_antipodal():
    s = tangent_sphere((0, 1), (0, 1), (0, -1))
    np.testing.assert_allclose(s.c, [0.0, 0.0])
    assert s.radius == pytest.approx(1.0)


def test_tangent_sphere_passes_through_f():
    f = np.array([1.0, 0.0])
    s = tangent_sphere((0, 1), (0, 1), f)
    assert s.radius == pytest.approx(1.0)
    np.testing.assert_allclose(s.c, [0.0, 0.0], atol=1e-15)
    assert np.linalg.norm(s.c - f) == pytest.approx(s.radius)


def test_tangent_sphere_at_pin_is_empty():
    s = tangent_sphere((0.3, 0.2), (0, 1), (0.3, 0.2))
    assert s.radius == 0.0
    np.testing.assert_array_equal(s.c, [0.3, 0.2])


@pytest.mark.parametrize("f", [(1.0, 1.0), (2.0, 3.0)])
def test_tangent_sphere_degenerate(f):
    with pytest.raises(DegenerateTangency):
        tangent_sphere((0, 1), (0, 1), f)


# ── une sphère ────────────────────────────────────────────────────────────────
def test_two_point_cloud_single_update():
    cloud = OrientedPointCloud([[0.0, 1.0], [0.0, -1.0]], [[0.0, 1.0], [0.0, -1.0]])
    sphere, updates = shrink._shrink(0, cloud)
    assert updates == 1
    np.testing.assert_allclose(sphere.c, [0.0, 0.0], atol=1e-15)
    assert sphere.radius == pytest.approx(1.0)


def test_dense_circle_recovers_center(circle_cloud):
    diag = circle_cloud.diag
    for pin in (0, 17, 64, 127):
        s = shrink_sphere(pin, circle_cloud)
        assert np.linalg.norm(s.c) <= 1e-4 * diag
        assert abs(s.radius - 1.0) <= 1e-4 * diag


def test_result_is_empty_and_tangent(rng):
    P = rng.normal(size=(300, 2))
    N = P / np.linalg.norm(P, axis=1, keepdims=True)
    cloud = OrientedPointCloud(P, N)
    tol = 1e-9 * cloud.diag
    for pin in range(0, 300, 23):
        s = shrink_sphere(pin, cloud)
        assert np.linalg.norm(s.c - cloud.points[pin]) == pytest.approx(s.radius, abs=1e-9)
        np.testing.assert_allclose(s.c, cloud.points[pin] - s.radius * cloud.normals[pin], atol=1e-9)
        dist = np.linalg.norm(cloud.points - s.c, axis=1)
        assert dist.min() >= s.radius - tol - 1e-12


def test_radius_is_monotone_non_increasing(circle_cloud, monkeypatch):
    cloud = perturb(circle_cloud, NoiseSpec(sigma_p=1.0, seed=3))
    radii = []
    real = shrink.tangent_sphere

    def spy(p, n, f):
        s = real(p, n, f)
        radii.append(s.radius)
        return s

    monkeypatch.setattr(shrink, "tangent_sphere", spy)
    for pin in range(0, len(cloud), 11):
        radii.clear()
        shrink_sphere(pin, cloud)
        seq = [2.0 * cloud.diag] + radii
        assert all(b <= a + 1e-12 for a, b in zip(seq, seq[1:]))


# ── toutes les sphères ────────────────────────────────────────────────────────
def test_shrink_all_order_and_threads(circle_cloud):
    one = shrink_all(circle_cloud)
    four = shrink_all(circle_cloud, threads=4)
    assert [a.pin_index for a in one.atoms] == list(range(len(circle_cloud)))
    assert one.method == "shrink"
    assert one.config is None
    np.testing.assert_array_equal(one.centers(), four.centers())
    np.testing.assert_array_equal(one.radii(), four.radii())
    assert all(a.converged and not a.failed for a in one.atoms)


def test_shrink_all_marks_failed_pins(circle_cloud, monkeypatch):
    def boom(*_a):
        raise DegenerateTangency("forcé")

    monkeypatch.setattr(shrink, "tangent_sphere", boom)
    result = shrink_all(circle_cloud, pins=[2, 5])
    assert result.failures == 2
    for atom in result.atoms:
        assert atom.failed and atom.failure == "forcé"
        assert atom.sphere.radius == 0.0
        np.testing.assert_array_equal(atom.sphere.c, circle_cloud.points[atom.pin_index])


def test_pin_facing_away_keeps_initial_sphere():
    cloud = OrientedPointCloud([[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [-1.0, 0.0]])
    sphere, updates = shrink._shrink(0, cloud)
    assert updates == 0
    assert sphere.radius == pytest.approx(2.0 * cloud.diag)


def test_clean_rectangle_centers_near_skeleton():
    shape = rectangle(800)
    result = shrink_all(shape.cloud)
    err = shape.oracle.distance(result.centers())
    assert np.max(err) <= 0.015 * shape.diag


@pytest.mark.slow
def test_noisy_circle_shrink_is_worse_than_lsmat():
    shape = circle(512)
    cloud = perturb(shape.cloud, NoiseSpec(sigma_p=2.0, seed=5))
    gt = ground_truth(shape.loops, 512)
    e_shrink = metrics(shrink_all(cloud, threads=4), gt, diag=shape.diag).e_avg
    e_lsmat = metrics(solve_all(cloud, default_params(2.0), threads=4), gt, diag=shape.diag).e_avg
    assert e_shrink > e_lsmat
