import numpy as np
import pytest
from scipy import special

from cgolab.carleman import SpectralField
from cgolab.cgo import (ContractionError, CgoAnsatz, build_cgo, build_free_cgo, cgo_domain, dense_operator,
                        hankel2_orders, hankel_cgo_pair, neumann_solve, potential_from_function,
                        reference_ansatz, spiky_potential, split_potential)


@pytest.fixture(scope="module")
def tiny():
    # 9 x1 nodes times 37 modes: small enough for a dense operator
    return cgo_domain(4.3, side_lengths=(2.4, 2.5), interval=(-0.1, 0.3), slab=(0.0, 0.2), h1=0.05,
                      cluster_factor=0.0)


def _tiny_potential(dom, scale=1.0):
    return potential_from_function(
        dom, lambda x, X, Y: scale * (3 + 2j) * np.exp(-((X - 1.2) ** 2 + (Y - 1.25) ** 2) / 0.1) + 0 * x)


def test_hankel_recurrence_matches_scipy():
    z = np.array([0.7, 3.0 - 0.4j, 12.0 - 0.3j, 40.0])
    H = hankel2_orders(12, z)
    for n in range(13):
        assert np.allclose(H[n], special.hankel2(n, z), rtol=1e-10)


def test_hankel_pair_is_helmholtz_and_normalised():
    # P1 e^{-sigma x1} harmonic <=> Delta' P1 + sigma^2 P1 = 0 in the plane
    tau, lam, n = 8.0, 0.3, 2
    sigma = tau - 1j * lam
    x0, y0, h = 1.3, 0.4, 1e-3
    pts = np.array([[x0, y0], [x0 + h, y0], [x0 - h, y0], [x0, y0 + h], [x0, y0 - h]])
    r, th = np.hypot(pts[:, 0], pts[:, 1]), np.arctan2(pts[:, 1], pts[:, 0])
    P1, P2 = hankel_cgo_pair(r, th, n, lam, tau)
    lap1 = (P1[1] + P1[2] + P1[3] + P1[4] - 4 * P1[0]) / h ** 2
    lap2 = (P2[1] + P2[2] + P2[3] + P2[4] - 4 * P2[0]) / h ** 2
    assert abs(lap1 + sigma ** 2 * P1[0]) < 1e-4 * abs(sigma ** 2 * P1[0])
    assert abs(lap2 + tau ** 2 * P2[0]) < 1e-4 * abs(tau ** 2 * P2[0])
    # large tau r: P1 P2 -> e^{-lam r} e^{i n theta} / r
    rr, t = 2.0, 0.7
    P1, P2 = hankel_cgo_pair(np.array(rr), np.array(t), n, lam, 400.0)
    assert abs(P1 * P2 * rr * np.exp(lam * rr) * np.exp(-1j * n * t) - 1) < 1e-2


def test_hankel_pair_negative_orders():
    r, th = np.array([1.5]), np.array([0.4])
    P, _ = hankel_cgo_pair(r, th, [-3, 3], 0.2, 6.0)
    # H_{-n} = (-1)^n H_n and c_{-n} / c_n = e^{i n pi}: the radial parts agree
    assert np.allclose(P[0] * np.exp(3j * th), P[1] * np.exp(-3j * th), rtol=1e-12)


def test_free_cgo_remainder_small():
    dom = cgo_domain(8.0)
    sol = build_free_cgo(dom, reference_ansatz(dom), 8.0)
    d = sol.diagnostics
    assert d["r0_L2"] < 0.1 * d["source_L2"]
    assert d["free_residual"] < 0.1 * d["source_L2"]


def test_free_cgo_rejects_center_inside():
    dom = cgo_domain(8.0)
    with pytest.raises(ValueError):
        build_free_cgo(dom, CgoAnsatz(dom.center, 0.5), 8.0)


def test_neumann_matches_dense_solve(tiny):
    q = _tiny_potential(tiny)
    A = dense_operator(q, 4.3)
    rng = np.random.default_rng(0)
    b = rng.standard_normal((tiny.cyl.n_x1, tiny.cyl.base.J)) + 0j
    I = np.eye(A.shape[0])
    r = neumann_solve(q, 4.3, SpectralField(tiny.cyl, b), tol=1e-13)
    x = np.linalg.solve(I + A, b.ravel())
    assert np.max(np.abs(r.v.coeffs.ravel() - x)) < 1e-10 * np.max(np.abs(x))
    rt = neumann_solve(q, 4.3, SpectralField(tiny.cyl, b), tol=1e-13, transpose=True)
    xt = np.linalg.solve(I + A.T, b.ravel())
    assert np.max(np.abs(rt.v.coeffs.ravel() - xt)) < 1e-10 * np.max(np.abs(xt))


def test_neumann_contraction_failure(tiny):
    q = _tiny_potential(tiny, scale=2000.0)
    with pytest.raises(ContractionError):
        neumann_solve(q, 4.3, SpectralField(tiny.cyl, np.ones((tiny.cyl.n_x1, tiny.cyl.base.J), complex)))


def test_split_potential(tiny):
    q = _tiny_potential(tiny, scale=5.0)
    eps = 0.3 * q.n_half_norm()
    sharp, flat = split_potential(q, eps)
    assert np.allclose(sharp.values + flat.values, q.values)
    assert flat.n_half_norm() <= eps * (1 + 1e-12)
    level = np.max(np.abs(sharp.values))
    assert np.all(np.abs(flat.values[flat.values != 0]) > level)
    s2, f2 = split_potential(q, 2 * q.n_half_norm())
    assert f2.is_zero and np.allclose(s2.values, q.values)


def test_cgo_with_spiky_potential_solves_equation():
    dom = cgo_domain(8.0)
    q = spiky_potential(dom)
    sol = build_cgo(q, reference_ansatz(dom), 8.0)
    d = sol.diagnostics
    assert d["contraction"] < 0.5
    assert d["residual"] < 0.05 * d["q_a_L2"]
    assert d["rtilde_L2"] < 0.05


def test_zero_potential_gives_free_cgo():
    dom = cgo_domain(8.0)
    q = potential_from_function(dom, lambda x, X, Y: 0 * X + 0 * x)
    sol = build_cgo(q, reference_ansatz(dom), 8.0)
    assert sol.r1.l2_norm() == 0.0
    assert np.allclose(sol.rtilde.coeffs, sol.r0.coeffs)
