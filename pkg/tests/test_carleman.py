import numpy as np
import pytest

from cgolab.carleman import (SpectralField, apply_G_tau, apply_G_tau_adjoint, conjugated_laplacian, lp_norm,
                             m_tau, m_tau_bound, make_params, parseval_defect, series_constant,
                             spectral_clusters, torus_spectral_gap, verify_cluster_estimates)
from cgolab.geometry import ProductCylinder, build_flat_torus_basis

from _oracles import m_tau_quad


@pytest.mark.parametrize("t, mu, tau", [(0.3, 2.0, 8.0), (-0.2, 2.0, 8.0), (0.15, 11.0, 8.0),
                                        (-0.4, 11.0, 8.0), (0.25, 3.0, -6.0), (-0.1, 0.0, 5.0)])
def test_m_tau_matches_fourier_integral(t, mu, tau):
    assert abs(m_tau(t, mu, tau) - m_tau_quad(t, mu, tau)) < 1e-8


def test_m_tau_satisfies_ode_and_bound():
    # the symbol is that of -d^2 + 2 tau d + mu^2 - tau^2, so m' jumps by -1 at t = 0
    tau, mu, e = 8.0, 11.0, 1e-7
    jump = (m_tau(2 * e, mu, tau) - m_tau(e, mu, tau)) / e - (m_tau(-e, mu, tau) - m_tau(-2 * e, mu, tau)) / e
    assert np.isclose(jump, -1.0, atol=1e-4)
    t = np.linspace(-3, 3, 2001)
    for mu in (0.5, 3.0, 7.5, 8.5, 20.0):
        assert np.all(np.abs(m_tau(t, mu, tau)) <= m_tau_bound(t, mu, tau) * (1 + 1e-12))


def test_m_tau_rejects_resonance():
    with pytest.raises(ValueError):
        m_tau(0.1, 8.0, 8.0)


@pytest.fixture(scope="module")
def cyl():
    b = build_flat_torus_basis((6.0, 6.5), 8)
    return ProductCylinder((0.0, 1.0), b, 161)


def _bump_field(cyl, seed=0):
    x = cyl.x1
    s = np.clip(1 - ((x - 0.5) / 0.4) ** 2, 1e-300, None)
    bump = np.where(np.abs(x - 0.5) < 0.4, np.exp(-1 / s), 0.0)
    rng = np.random.default_rng(seed)
    b = cyl.base
    c = (rng.standard_normal(b.J) + 1j * rng.standard_normal(b.J)) * np.exp(-b.eigenvalues / 40)
    return SpectralField(cyl, bump[:, None] * c[None, :])


def test_conjugated_laplacian_exponential_identity(cyl):
    # u = cos(x1) psi_j: e^{tau x1} Delta (e^{-tau x1} u) by hand
    tau = 5.0
    x = cyl.x1
    j = 3
    lam = cyl.base.eigenvalues[j]
    u = SpectralField(cyl, np.cos(x)[:, None] * (np.arange(cyl.base.J) == j)[None, :])
    out = conjugated_laplacian(u, tau, check_support=False).coeffs[:, j]
    # e^{tau x} (d^2 - lam) (e^{-tau x} cos x)
    expect = (-np.cos(x) + 2 * tau * np.sin(x) + tau * tau * np.cos(x)) - lam * np.cos(x)
    assert np.max(np.abs(out - expect)[2:-2]) < 1e-3 * np.max(np.abs(expect))


@pytest.mark.parametrize("tau", [8.0, 16.0])
def test_G_tau_inverts_conjugated_laplacian(cyl, tau):
    p = make_params(tau, cyl.base)
    assert p.admissible
    u = _bump_field(cyl, 1)
    r = apply_G_tau(conjugated_laplacian(u, tau), p) + u
    assert r.l2_norm() / u.l2_norm() < 1e-3


def test_G_tau_transpose_is_G_minus_tau(cyl):
    p = make_params(8.0, cyl.base)
    f = _bump_field(cyl, 2)
    g = _bump_field(cyl, 3)
    w = cyl.x1_weights()[:, None]
    lhs = np.sum(w * apply_G_tau(f, p).coeffs * g.coeffs)
    rhs = np.sum(w * f.coeffs * apply_G_tau_adjoint(g, p).coeffs)
    assert abs(lhs - rhs) < 1e-3 * abs(lhs)


def test_G_tau_rejects_non_admissible(cyl):
    lam = cyl.base.eigenvalues
    tau = float(np.sqrt(lam[lam > 20][0]))
    p = make_params(tau, cyl.base)
    assert not p.admissible
    with pytest.raises(ValueError):
        apply_G_tau(_bump_field(cyl), p)


def test_make_params_requires_large_tau(cyl):
    with pytest.raises(ValueError):
        make_params(3.0, cyl.base)


def test_spectral_gap_of_resonant_tau():
    assert torus_spectral_gap((2 * np.pi, 2 * np.pi), 5.0) == 0.0  # 3^2 + 4^2 = 25
    assert torus_spectral_gap((2 * np.pi, 2 * np.pi), 5.2) > 1.0  # 27.04 vs 26 and 29


def test_lp_norm_of_constant_and_parseval(cyl):
    area = np.prod(cyl.base.side_lengths)
    c = np.zeros((cyl.n_x1, cyl.base.J), complex)
    c[:, 0] = np.sqrt(area)  # psi_0 = 1 / sqrt(area)
    u = SpectralField(cyl, c)
    for p in (1.2, 2.0, 6.0):
        assert np.isclose(lp_norm(u, p), area ** (1 / p), rtol=1e-10)
    assert parseval_defect(_bump_field(cyl)) < 1e-10


def test_clusters_partition_spectrum():
    b = build_flat_torus_basis((2 * np.pi, 2 * np.pi), 6)
    idx = np.concatenate([c.indices for c in spectral_clusters(b)])
    assert np.array_equal(np.sort(idx), np.arange(b.J))
    for c in spectral_clusters(b):
        mu = b.sqrt_eigenvalues[c.indices]
        assert np.all((mu >= c.k) & (mu < c.k + 1))


def test_cluster_ratios_bounded():
    b = build_flat_torus_basis((2 * np.pi, 2 * np.pi), 6)
    rep = verify_cluster_estimates(b, trials=2)
    s = rep.constants()["sogge"]
    assert all(np.isfinite(v) and 0 < v < 10 for v in s.values())


def test_series_constant_finite():
    b = build_flat_torus_basis((6.0, 6.5), 12)
    t = np.concatenate([-np.logspace(-3, 0, 40), np.logspace(-3, 0, 40)])
    c = series_constant(b, t, [8.3, 11.7])
    assert np.isfinite(c) and c > 0
