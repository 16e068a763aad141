import numpy as np
import pytest

from cgolab.geometry import (GeometryError, ProductCylinder, build_flat_torus_basis, bump_disk, euclidean_disk,
                             integrate_geodesic, polar_normal_coords, unit_speed_defect, warp_to_product)


def test_torus_eigenvalues_are_lattice_norms():
    L = (2 * np.pi, 3.0)
    b = build_flat_torus_basis(L, 6)
    k = b.kvecs
    expect = (2 * np.pi * k[:, 0] / L[0]) ** 2 + (2 * np.pi * k[:, 1] / L[1]) ** 2
    assert np.allclose(b.eigenvalues, expect, atol=1e-12)
    assert np.all(np.diff(b.eigenvalues) >= -1e-12)
    assert b.eigenvalues[0] == 0.0


def test_torus_modes_orthonormal_and_eigen():
    b = build_flat_torus_basis((5.0, 5.3), 8)
    assert b.orthonormality_defect() < 1e-12
    assert b.eigen_residual() < 1e-9


def test_analyze_synthesize_round_trip():
    b = build_flat_torus_basis((5.0, 5.3), 8)
    rng = np.random.default_rng(1)
    c = rng.standard_normal(b.J) + 1j * rng.standard_normal(b.J)
    assert np.allclose(b.analyze(b.synthesize(c)), c, atol=1e-12)


def test_cylinder_weights_integrate_constants():
    b = build_flat_torus_basis((5.0, 5.0), 4)
    cyl = ProductCylinder((0.0, 2.0), b, 41)
    assert cyl.n == 3
    assert np.isclose(cyl.x1_weights().sum(), 2.0)
    assert np.isclose(cyl.h1, 0.05)


@pytest.mark.parametrize("x, xi, t", [((0.0, 0.0), (1.0, 0.0), 1.0), ((-1.0, 0.0), (1.0, 0.0), 2.0)])
def test_euclidean_exit_times(x, xi, t):
    man = euclidean_disk()
    assert np.isclose(man.exit_times(np.array([x]), np.array([xi]))[0], t, atol=1e-10)


def test_bump_geodesic_unit_speed_and_simple():
    man = bump_disk()
    xi = man.unit(0.0, -0.2, np.array([1.0, 0.3]))
    path = integrate_geodesic(man, (0.0, -0.2), np.ravel(xi))
    assert unit_speed_defect(man, path) < 1e-7
    info = man.check_simple()
    assert info["simple"]


def test_flat_fan_radius_is_distance():
    man = euclidean_disk()
    fan = polar_normal_coords(man, (-1.2, 0.0), n_theta=16)
    th = fan.theta[5]
    p = fan.fan_to_point(np.array([0.7]), np.array([th]))
    assert np.allclose(np.ravel(p), np.array([-1.2, 0.0]) + 0.7 * np.array([np.cos(th), np.sin(th)]), atol=1e-9)
    # chord r_out - r_in equals the Euclidean chord of the line through omega
    d = np.array([np.cos(fan.theta), np.sin(fan.theta)]).T
    b = d @ np.array([-1.2, 0.0])
    chord = 2 * np.sqrt(b * b - (1.44 - 1.0))
    assert np.allclose(fan.r_out - fan.r_in, chord, atol=1e-9)


def test_fan_center_inside_rejected():
    with pytest.raises(GeometryError):
        polar_normal_coords(euclidean_disk(), (0.2, 0.0))


def test_warp_change_metric():
    w = warp_to_product(lambda s: 0.3 * np.sin(s), (0.0, 1.0))
    y = w.eta(np.array([0.2, 0.5, 0.8]))
    assert np.allclose(w.eta_inv(y), [0.2, 0.5, 0.8], atol=1e-12)
    assert w.metric_residual(y) < 1e-8
