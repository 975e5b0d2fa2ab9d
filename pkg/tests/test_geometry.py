import math

import numpy as np
import pytest

from scl import geometry as geo
from scl.errors import DomainError, SingularPoint
from scl.rng import stream


def test_h_fixed_points():
    assert geo.h(0.0) == 0.0
    assert geo.h(2.0) == pytest.approx(math.pi / 2, abs=1e-15)


@pytest.mark.parametrize("r", [0.1, 1.0, 3.0])
def test_h_inverse_identity(r):
    assert math.tan(geo.h(r) / 2.0) == pytest.approx(r / 2.0, abs=1e-14)


def test_tan_identity_grid():
    r = np.logspace(-8, 0.5, 500)
    assert np.max(np.abs(np.tan(geo.h(r) / 2.0) - r / 2.0)) < 1e-12


def test_h_monotone_and_below_r():
    r = np.linspace(1e-9, 5.0, 1000)
    h = geo.h(r)
    assert np.all(np.diff(h) > 0)
    assert np.all(h <= r)


def test_stereo_project_examples():
    assert np.allclose(geo.stereo_project(np.array([0.0, 0.0, 0.0])), [0.0, 0.0])
    assert np.allclose(geo.stereo_project(np.array([1.0, 0.0, 1.0])), [2.0, 0.0])
    assert np.allclose(geo.stereo_project(np.array([0.0, 1.0, 1.0])), [0.0, 2.0])


def test_stereo_project_north_pole_raises():
    with pytest.raises(SingularPoint):
        geo.stereo_project(geo.NORTH)


def test_stereo_inverse_examples():
    assert np.allclose(geo.stereo_inverse(np.array([0.0, 0.0])), geo.SOUTH)
    assert np.allclose(geo.stereo_inverse(np.array([2.0, 0.0])), [1.0, 0.0, 1.0])


def test_projection_round_trip():
    rng = stream(7, 1)
    w = rng.normal(scale=3.0, size=(1000, 2))
    p = geo.stereo_inverse(w)
    assert np.max(np.abs(np.linalg.norm(p - geo.CENTER, axis=1) - 1.0)) < 1e-12
    assert np.max(np.linalg.norm(geo.stereo_project(p) - w, axis=1)) < 1e-10


def test_sphere_distance_basics():
    p = geo.stereo_inverse(np.array([0.3, -1.2]))
    assert geo.sphere_distance(p, p) == 0.0
    assert geo.sphere_distance(geo.SOUTH, geo.NORTH) == pytest.approx(math.pi)


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0])
def test_distance_matches_h(rho):
    p = geo.stereo_inverse(np.array([rho, 0.0]))
    assert geo.sphere_distance(geo.SOUTH, p) == pytest.approx(
        2.0 * math.atan(rho / 2.0), abs=1e-12
    )


def test_distance_symmetry_triangle():
    rng = stream(7, 2)
    for _ in range(50):
        p, q, r = geo.stereo_inverse(rng.normal(scale=2.0, size=(3, 2)))
        dpq = geo.sphere_distance(p, q)
        assert dpq == pytest.approx(geo.sphere_distance(q, p), abs=1e-14)
        assert dpq <= geo.sphere_distance(p, r) + geo.sphere_distance(r, q) + 1e-12


def test_conformal_factor():
    assert geo.conformal_factor(np.zeros(2)) == 1.0
    assert geo.conformal_factor(np.array([2.0, 0.0])) == pytest.approx(0.5)


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0])
def test_arc_length_quadrature(rho):
    xs = np.linspace(0.0, rho, 40_001)
    lam = geo.conformal_factor(np.stack([xs, np.zeros_like(xs)], axis=1))
    arc = np.trapezoid(lam, xs)
    assert arc == pytest.approx(2.0 * math.atan(rho / 2.0), abs=1e-8)


def test_annulus_hit_prob_edges():
    assert geo.annulus_hit_prob(0.3, 0.3, 0.9) == 1.0
    assert geo.annulus_hit_prob(0.3, 0.9, 0.9) == 0.0
    # unit log gaps over L levels: probability 1/L
    L = 10
    val = geo.annulus_hit_prob(math.exp(-L), math.exp(-1.0), 1.0)
    assert val == pytest.approx(1.0 / L, abs=1e-14)


def test_annulus_hit_prob_monotone():
    r2 = np.linspace(0.21, 0.89, 40)
    vals = geo.annulus_hit_prob(0.2, r2, 0.9)
    assert np.all(np.diff(vals) < 0)
    r1 = np.linspace(0.05, 0.3, 40)
    vals = geo.annulus_hit_prob(r1, 0.3, 0.9)
    assert np.all(np.diff(vals) > 0)


def test_annulus_hit_prob_domain_errors():
    with pytest.raises(DomainError):
        geo.annulus_hit_prob(0.5, 0.4, 0.9)
    with pytest.raises(DomainError):
        geo.annulus_hit_prob(0.5, 0.5, 0.5)


def test_poisson_kernel_center_is_uniform():
    ang = np.linspace(0.0, 2.0 * math.pi, 100)[:-1]
    r = 0.7
    from scl.bm_sim import move_along_geodesic

    x = move_along_geodesic(
        np.tile(geo.SOUTH, (len(ang), 1)), r * np.cos(ang), r * np.sin(ang)
    )
    z = geo.SOUTH + np.array([0.0, 0.0, 0.0])
    k = geo.poisson_kernel_sphere(r, z, x)
    assert np.allclose(k, 1.0, atol=1e-12)


@pytest.mark.parametrize("frac", [0.1, 0.5, 0.9])
def test_poisson_kernel_normalization(frac):
    from scl.bm_sim import move_along_geodesic

    r = 0.8
    n = 200_000
    ang = (np.arange(n) + 0.5) / n * 2.0 * math.pi
    x = move_along_geodesic(
        np.tile(geo.SOUTH, (n, 1)), r * np.cos(ang), r * np.sin(ang)
    )
    z = move_along_geodesic(geo.SOUTH, frac * r, 0.0)
    k = geo.poisson_kernel_sphere(r, z, x)
    assert np.all(k >= 0)
    assert np.mean(k) == pytest.approx(1.0, abs=1e-6)


def test_poisson_kernel_rotated_center():
    from scl.bm_sim import move_along_geodesic

    center = geo.stereo_inverse(np.array([0.4, 0.7]))
    R = geo.rotation_to_south(center)
    r = 0.5
    z0 = move_along_geodesic(geo.SOUTH, 0.2, 0.1)
    x0 = move_along_geodesic(geo.SOUTH, r, 0.0)
    z = geo.rotate_about_center(R.T, z0)
    x = geo.rotate_about_center(R.T, x0)
    k_rot = geo.poisson_kernel_sphere(r, z, x, center=center)
    k0 = geo.poisson_kernel_sphere(r, z0, x0)
    assert k_rot == pytest.approx(k0, abs=1e-12)


def test_poisson_kernel_domain_errors():
    from scl.bm_sim import move_along_geodesic

    r = 0.5
    on_boundary = move_along_geodesic(geo.SOUTH, r, 0.0)
    inside = move_along_geodesic(geo.SOUTH, 0.2, 0.0)
    with pytest.raises(DomainError):
        geo.poisson_kernel_sphere(r, on_boundary, on_boundary)
    with pytest.raises(DomainError):
        geo.poisson_kernel_sphere(r, inside, inside)


def test_kappa_unit_log_gap():
    r0 = 1e-4
    val = geo.kappa(geo.h(r0 / math.e), geo.h(r0))
    assert val == pytest.approx(4.0, abs=1e-12)


def test_kappa_example():
    assert geo.kappa(2.0 * math.atan(0.5), math.pi / 2.0) == pytest.approx(
        4.0 * math.log(2.0), abs=1e-12
    )


def test_kappa_additivity_random():
    rng = stream(7, 3)
    a = rng.uniform(0.05, 1.0, 100)
    b = a + rng.uniform(0.05, 1.0, 100)
    c = np.minimum(b + rng.uniform(0.05, 1.0, 100), 3.14)
    ok = (a < b) & (b < c)
    err = np.abs(
        geo.kappa(a[ok], c[ok]) - geo.kappa(a[ok], b[ok]) - geo.kappa(b[ok], c[ok])
    )
    assert err.max() < 1e-12


def test_hit_times_and_kappa_split():
    assert geo.expected_hit_inner(math.pi / 4, math.pi / 2) == pytest.approx(
        2.0 * math.log(1.0 / (1.0 - math.sqrt(2.0) / 2.0)), abs=1e-12
    )
    rng = stream(7, 4)
    a = rng.uniform(0.05, 1.4, 200)
    b = a + rng.uniform(0.05, 1.4, 200)
    ok = b < math.pi
    total = geo.expected_hit_inner(a[ok], b[ok]) + geo.expected_hit_outer(a[ok], b[ok])
    assert np.max(np.abs(total - geo.kappa(a[ok], b[ok]))) < 1e-12


def test_hit_times_vanish_as_a_to_b():
    assert geo.expected_hit_inner(0.5 - 1e-9, 0.5) < 1e-8
    assert geo.expected_hit_outer(0.5 - 1e-9, 0.5) < 1e-8


def test_hit_time_domain_errors():
    for fn in (geo.expected_hit_inner, geo.expected_hit_outer, geo.kappa):
        with pytest.raises(DomainError):
            fn(0.5, 0.5)
        with pytest.raises(DomainError):
            fn(0.5, math.pi)


def test_radius_schedule():
    sch = geo.make_radius_schedule(1e-6, 8)
    assert len(sch.r) == 9 and len(sch.h) == 9
    assert np.all(0.9 * sch.r <= sch.h) and np.all(sch.h <= sch.r)
    assert np.all(np.diff(sch.r) < 0) and np.all(np.diff(sch.h) < 0)
    assert abs(sch.h[0] - sch.r[0]) < sch.r[0] ** 3
    ratios = sch.h[1:] / sch.h[:-1]
    assert np.all(ratios > math.exp(-1) * 0.999)
    assert np.all(ratios < math.exp(-1) * 1.001)


def test_radius_schedule_errors():
    with pytest.raises(DomainError):
        geo.make_radius_schedule(1.5, 3)
    with pytest.raises(DomainError):
        geo.make_radius_schedule(0.5, 0)


def test_circle_spec_validation():
    with pytest.raises(DomainError):
        geo.CircleSpec(center=geo.SOUTH, radius=math.pi)
    with pytest.raises(DomainError):
        geo.CircleSpec(center=np.array([0.0, 0.0, 0.5]), radius=0.3)


def test_fibonacci_sphere_on_sphere():
    pts = geo.fibonacci_sphere(500)
    assert np.max(np.abs(np.linalg.norm(pts - geo.CENTER, axis=1) - 1.0)) < 1e-12
