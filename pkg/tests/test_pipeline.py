import json

import numpy as np
import pytest
from scipy import integrate

from cgolab.carleman import SpectralField
from cgolab.cgo import hankel_cgo_pair, neumann_solve
from cgolab.config import ExperimentConfig
from cgolab.pipeline import (FLambdaField, PipelineError, SeparablePotential, assemble_f_lambda, build_stage,
                             dn_consistency_check, fan_moments, hat_gram, inverse_fourier, probe_centers,
                             run_experiment, solve_kernel_least_squares, trapezoid_weights)
from cgolab.xray import ImageGrid, InversionError


def tiny_config(**kw):
    base = dict(half_length=4.0, slab_half_length=3.0, h1=0.5, sigma1=1.5, lam_step=0.25, n_omega=8,
                harmonics=4, grid=12, tau_schedule=(16.0,))
    base.update(kw)
    return ExperimentConfig(**base).validate()


@pytest.fixture(scope="module")
def cfg():
    return tiny_config()


@pytest.fixture(scope="module")
def stage(cfg):
    return build_stage(cfg, SeparablePotential.from_config(cfg), 16.0)


def test_profile_transform_matches_quadrature():
    pot = SeparablePotential(amplitude=0.7, sigma1=2.0, half_length=3.0, shift=0.4)
    for lam in (0.0, 0.3, -1.1):
        re = integrate.quad(lambda x: pot.profile(x) * np.cos(lam * x), -3, 3, epsabs=1e-13)[0]
        im = integrate.quad(lambda x: pot.profile(x) * np.sin(lam * x), -3, 3, epsabs=1e-13)[0]
        assert abs(pot.profile_transform(lam) - (re + 1j * im)) < 1e-10


def test_profile_transform_symmetry_and_shift():
    pot = SeparablePotential(sigma1=2.0, half_length=30.0)
    moved = SeparablePotential(sigma1=2.0, half_length=30.0, shift=1.5)
    lam = np.array([0.2, 0.45])
    assert np.allclose(pot.profile_transform(-lam), np.conj(pot.profile_transform(lam)), atol=1e-14)
    assert np.allclose(moved.profile_transform(lam), np.exp(1.5j * lam) * pot.profile_transform(lam), atol=1e-12)


def test_psi_vanishes_outside_disk():
    pot = SeparablePotential(bumps=((0.9, 0.0, 0.5, 1.0),))
    assert pot.psi(np.array(1.05), np.array(0.0)) == 0.0
    assert pot.psi(np.array(0.9), np.array(0.0)) == 1.0


def test_zero_potential_gives_zero_moments(cfg):
    st = build_stage(cfg, lambda x, u, v: 0 * x * u, 16.0)
    fm = fan_moments(st, np.array([1.6, 0.0]), [0, 1], [0.0])
    assert np.all(fm.moments == 0) and np.all(fm.born == 0)


def test_adjoint_moments_match_direct_solve(stage):
    omega = np.array([1.3, 1.0])
    ns, lams = [-2, 0, 3], [0.0, 0.25]
    fm = fan_moments(stage, omega, ns, lams, tol=1e-13)
    dom, op = stage.domain, stage.op
    cyl, base = dom.cyl, dom.cyl.base
    r, th = dom.polar(stage.center + omega)
    inside = dom.base_mask() > 0
    w = cyl.x1_weights()
    for i, lam in enumerate(lams):
        P1, P2 = hankel_cgo_pair(r, th, ns, lam, stage.tau)
        for j, n in enumerate(ns):
            u1 = np.exp(1j * lam * cyl.x1)[:, None, None] * (P1[j] * inside)[None]
            rhs = SpectralField(cyl, -base.analyze(op.m * u1))
            v = neumann_solve(stage.q, stage.tau, rhs, stage.params, tol=1e-13).v
            rem = base.synthesize(op.G(op.mult(op.s, v.coeffs)))
            direct = np.sum(w[:, None, None] * stage.q.values * P2[None] * (u1 + rem)) * base.cell_weight
            assert abs(fm.moments[i, j] - direct) < 1e-9 * abs(direct)
    assert np.all(np.abs(fm.moments - fm.born) <= fm.bound)


def test_moments_linear_within_budget(cfg, stage):
    pot = SeparablePotential.from_config(cfg)
    double = build_stage(cfg, lambda x, u, v: 2 * pot(x, u, v), 16.0)
    omega = np.array([0.0, -1.6])
    a = fan_moments(stage, omega, [0, 1], [0.0])
    b = fan_moments(double, omega, [0, 1], [0.0])
    assert np.allclose(b.born, 2 * a.born, rtol=1e-12)
    assert np.all(np.abs(b.moments - 2 * a.moments) <= b.bound + 2 * a.bound)


def test_boundary_moments_identity(cfg):
    dn = dn_consistency_check(cfg, SeparablePotential.from_config(cfg))
    assert dn.identity_defect < 1e-8
    assert dn.volume.shape == (2, 3)


def test_hat_gram_reproduces_angular_integrals():
    th = np.linspace(-0.4, 0.4, 9)
    h = th[1] - th[0]
    g = np.cos(3 * th) + 0.2j * th
    ns = np.arange(-5, 6)
    fine = np.linspace(th[0] - h, th[-1] + h, 40001)
    # piecewise linear interpolant of g, vanishing one spacing beyond the end nodes
    xp = np.concatenate([[th[0] - h], th, [th[-1] + h]])
    gp = np.concatenate([[0], g, [0]])
    interp = np.interp(fine, xp, gp.real) + 1j * np.interp(fine, xp, gp.imag)
    expect = integrate.trapezoid(np.exp(1j * ns[:, None] * fine[None]) * interp[None], fine, axis=1)
    assert np.allclose(hat_gram(ns, th, h) @ g, expect, atol=1e-7)


def test_asymptotic_route_aborts_on_ill_conditioned_gram():
    oms = probe_centers(4, 1.6)
    ns = np.arange(-16, 17)
    with pytest.raises(InversionError):
        assemble_f_lambda(oms, np.zeros((4, ns.size), complex), ns, 0.0, ImageGrid(8), n_theta=15)


def test_kernel_least_squares_consistent_system():
    rng = np.random.default_rng(3)
    W = rng.standard_normal((60, 20)) + 1j * rng.standard_normal((60, 20))
    x = rng.standard_normal(20)
    sol = solve_kernel_least_squares(W, W @ x, 1e-12, 1e-12)
    assert sol.converged and np.allclose(sol.image, x, atol=1e-6)


def test_inverse_fourier_of_exact_transform():
    pot = SeparablePotential(sigma1=3.0, half_length=20.0)
    grid = ImageGrid(8)
    X, Y = grid.points()
    lams = np.linspace(-2.0, 2.0, 161)
    vals = np.stack([pot.f_lambda(l, X, Y) for l in lams])
    ff = FLambdaField(lams, grid, vals, np.zeros(lams.size), np.zeros(lams.size), np.ones(lams.size, bool))
    x1 = np.array([-2.0, 0.0, 1.0])
    q = inverse_fourier(ff, x1)
    assert np.allclose(q, pot(x1[:, None, None], X[None], Y[None]), atol=1e-8)
    ff.ok[:] = False
    with pytest.raises(InversionError):
        inverse_fourier(ff, x1)


def test_trapezoid_weights():
    x = np.array([0.0, 0.5, 2.0])
    assert np.allclose(trapezoid_weights(x), [0.25, 1.0, 0.75])


def test_forced_failure_writes_error_record(tmp_path):
    cfg = tiny_config(amplitude=5000.0)
    with pytest.raises(PipelineError) as info:
        run_experiment(cfg, tmp_path, with_dn_check=False)
    assert info.value.stage == "cgo_moments"
    rec = json.loads((tmp_path / "error.json").read_text())
    assert rec["stage"] == "cgo_moments" and rec["error"] == "ContractionError"


def test_run_is_deterministic(tmp_path):
    cfg = tiny_config(noise=0.01, seed=5)
    a = run_experiment(cfg, tmp_path / "a", with_dn_check=False)
    run_experiment(cfg, tmp_path / "b", with_dn_check=False)
    for name in ("report.csv", "hashes.csv", "q_recon.cgog", "fans.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert np.all(a.f_field.ok)
    assert a.q_recon.shape == (13, 12, 12)
