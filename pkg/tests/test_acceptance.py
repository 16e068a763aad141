"""Acceptance criteria 1-10, one test each; every test prints a PASS/FAIL line with its timing."""

from pathlib import Path

import numpy as np
import pytest
from scipy import special

from cgolab import gridio
from cgolab.carleman import (SpectralField, apply_G_tau, conjugated_laplacian, m_tau, m_tau_bound, make_params,
                             sweep_cylinder, verify_carleman_sweep, verify_cluster_estimates)
from cgolab.cgo import build_cgo, cgo_domain, reference_ansatz, spiky_potential
from cgolab.config import ExperimentConfig
from cgolab.forward import BoxGrid, DirichletSystem, integral_identity_residual
from cgolab.geometry import ProductCylinder, build_flat_torus_basis, bump_disk, euclidean_disk
from cgolab.pipeline import run_experiment
from cgolab.xray import (DiscreteRayOperator, ImageGrid, adjoint_ray_transform, boundary_direction_grid,
                         disk_quadrature, invert_normal, kernel_K_lambda, loglog_slope, normal_operator,
                         plane_wave_quotients, ray_transform, santalo_integral)

from _oracles import m_tau_quad

GOLDEN = Path(__file__).parent / "golden" / "report_sha256.txt"

pytestmark = pytest.mark.slow


def test_criterion_01_multiplier(criterion):
    with criterion(1, "multiplier exactness", 10) as c:
        ts = np.linspace(-1.0, 1.0, 10)
        mus = np.linspace(0.5, 29.5, 10)
        taus = np.array([4.0, 7.0, 10.0, 13.0, 16.0, 19.0, 22.0, 25.0, -8.0, -20.0])
        worst, strict = 0.0, True
        for t in ts:
            for mu in mus:
                for tau in taus:
                    v = float(m_tau(t, mu, tau))
                    worst = max(worst, abs(v - m_tau_quad(t, mu, tau)))
                    strict &= abs(v) < float(m_tau_bound(t, mu, tau))
        c.check("max abs error vs quadrature", f"{worst:.2e}", worst <= 1e-8)
        c.check("bound strict on grid", strict, strict)


def test_criterion_02_inverse_identity(criterion):
    with criterion(2, "inverse-operator identity", 120) as c:
        basis = build_flat_torus_basis((6.0, 6.5), 13)
        cyl = ProductCylinder((0.0, 1.0), basis, 201)
        x = cyl.x1
        s = np.clip(1 - ((x - 0.5) / 0.45) ** 2, 1e-300, None)
        bump = np.where(np.abs(x - 0.5) < 0.45, np.exp(-1 / s), 0.0)
        rng = np.random.default_rng(0)
        c.check("J", basis.J, basis.J >= 500)
        for tau in (8.0, 16.0, 32.0):
            p = make_params(tau, basis)
            errs = []
            for _ in range(10):
                coef = (rng.standard_normal(basis.J) + 1j * rng.standard_normal(basis.J)) * np.exp(-basis.eigenvalues / 40)
                u = SpectralField(cyl, bump[:, None] * coef[None, :])
                errs.append((apply_G_tau(conjugated_laplacian(u, tau), p) + u).l2_norm() / u.l2_norm())
            c.check(f"tau={tau:g} max rel error", f"{max(errs):.2e}", p.admissible and max(errs) <= 1e-3)


def test_criterion_03_carleman_constants(criterion):
    with criterion(3, "Carleman constants", 300) as c:
        rep = verify_carleman_sweep(sweep_cylinder, [8.0, 16.0, 32.0, 64.0])
        c.check("admissible taus", rep.taus, len(rep.taus) == 4)
        for pair, label in (("L2", "L2*tau"), ("H1", "H1"), ("Lp", "L6/L6/5")):
            spread = rep.spread(pair)
            c.check(f"{label} spread", f"{spread:.3f}", spread < 2.0)


def test_criterion_04_cluster_estimates(criterion):
    with criterion(4, "cluster estimates", 60) as c:
        basis = build_flat_torus_basis((2 * np.pi, 2 * np.pi), 8)
        rep = verify_cluster_estimates(basis, trials=4, k_max=8)
        for key in ("sogge", "sogge_dual"):
            const = rep.constants()[key]
            ratio = max(const.values()) / min(v for k, v in const.items() if k <= 3)
            c.check(f"{key} max(k<=8)/min(k<=3)", f"{ratio:.3f}", np.isfinite(ratio) and ratio <= 2.0)
        c.check("max cluster k", max(rep.taus), max(rep.taus) == 8)


def test_criterion_05_cgo_remainder(criterion):
    with criterion(5, "CGO remainder decay", 300) as c:
        out = {}
        for tau in (8.0, 64.0):
            dom = cgo_domain(tau)
            q = spiky_potential(dom)
            out[tau] = (q.norm(1.5), build_cgo(q, reference_ansatz(dom), tau).diagnostics)
        l2 = out[64.0][1]["rtilde_L2"] / out[8.0][1]["rtilde_L2"]
        l6 = out[64.0][1]["rtilde_L6"] / out[8.0][1]["rtilde_L6"]
        c.check("|q|_L3/2", f"{out[8.0][0]:.3f}", out[8.0][0] < 2.0)
        c.check("L2 ratio 64/8", f"{l2:.3f}", l2 <= 0.5)
        c.check("L6 ratio 64/8", f"{l6:.3f}", l6 <= 2.0)
        c.check("contraction at 8", f"{out[8.0][1]['contraction']:.3f}", out[8.0][1]["contraction"] < 1)


def test_criterion_06_dn_map(criterion):
    with criterion(6, "DN duality and integral identity", 120) as c:
        grid = BoxGrid((-0.6, -0.6, -0.6), (0.6, 0.6, 0.6), (13, 13, 13))
        qr = lambda x, y, z: 1 + 0.8 * np.exp(-8 * ((x - 0.2) ** 2 + y ** 2 + (z + 0.1) ** 2))
        N = DirichletSystem(grid, qr).dn_schur()
        sym = float(np.max(np.abs(N - N.T)) / np.max(np.abs(N)))
        c.check("symmetry defect", f"{sym:.1e}", sym <= 1e-8)
        pairs = [
            (qr, 0.0),
            (lambda x, y, z: 2 + np.sin(3 * x) * np.cos(2 * y), 0.5),
            (lambda x, y, z: 1 + 0.4j * np.cos(2 * z), qr),
            (lambda x, y, z: -1.5 + x * x + 0 * y, lambda x, y, z: 0.3 * y + 0 * x),
            (lambda x, y, z: (1 + 0.5j) * np.exp(-(x * x + y * y + z * z)), lambda x, y, z: 0.7 - 0.2j + 0 * x),
        ]
        rng = np.random.default_rng(6)
        nb = grid.boundary_index().size
        worst = 0.0
        for q1, q2 in pairs:
            r = integral_identity_residual(grid, q1, q2, rng.standard_normal(nb), rng.standard_normal(nb))
            worst = max(worst, r.defect / r.tolerance)
        c.check("max defect / tolerance", f"{worst:.2e}", worst <= 1.0)


def test_criterion_07_xray_adjoint(criterion):
    with criterion(7, "X-ray adjoint and Santalo", 120) as c:
        man = euclidean_disk()
        rays = boundary_direction_grid(man, 128, 64)
        vol = santalo_integral(man, lambda x, y, vx, vy: np.ones_like(x), rays)
        c.check("Santalo rel defect", f"{abs(vol / (2 * np.pi ** 2) - 1):.1e}", abs(vol / (2 * np.pi ** 2) - 1) <= 1e-3)
        xq, yq, wq = disk_quadrature(man, 48, 96)
        rng = np.random.default_rng(7)
        worst = 0.0
        for k in range(20):
            lam = (0.0, 0.3)[k % 2]
            a = rng.standard_normal(3)
            d = rng.standard_normal(4)
            f = lambda x, y: np.exp(-((x - 0.3 * a[0]) ** 2 + (y - 0.3 * a[1]) ** 2)) * (1 + 0.3 * a[2] * x)
            h = lambda b, al: (1 + 0.5 * d[0] * np.cos(b) + 0.5 * d[1] * np.sin(2 * b + d[2]) + 0.3 * d[3] * al) \
                * np.cos(al) ** 4
            hv = h(rays.beta, rays.alpha)
            lhs = rays.pairing(ray_transform(man, f, lam, rays).values, hv)
            rhs = np.sum(wq * f(xq, yq) * adjoint_ray_transform(man, h, lam, np.stack([xq, yq], 1)))
            scale = np.sqrt(rays.pairing(hv ** 2, 1.0) * np.sum(wq * f(xq, yq) ** 2))
            worst = max(worst, abs(lhs - rhs) / scale)
        c.check("max adjoint defect (20 pairs)", f"{worst:.1e}", worst <= 1e-4)


def test_criterion_08_normal_operator(criterion):
    with criterion(8, "normal-operator structure", 180) as c:
        man = euclidean_disk()
        bm = bump_disk()
        rng = np.random.default_rng(8)
        sym = 0.0
        for _ in range(5):
            x, y = 0.5 * rng.uniform(-1, 1, 2), 0.5 * rng.uniform(-1, 1, 2)
            for lam in (0.0, 0.3):
                a, b = kernel_K_lambda(bm, x, y, lam), kernel_K_lambda(bm, y, x, lam)
                sym = max(sym, abs(a - b) / abs(a))
        nm = normal_operator(man, 0.3, ImageGrid(16), boundary_direction_grid(man, 96, 48))
        sym = max(sym, nm.symmetry_defect)
        c.check("kernel symmetry", f"{sym:.1e}", sym <= 1e-8)
        kerr = 0.0
        for _ in range(10):
            x, y = 0.6 * rng.uniform(-1, 1, 2), 0.6 * rng.uniform(-1, 1, 2)
            d = np.linalg.norm(x - y)
            kerr = max(kerr, abs(kernel_K_lambda(man, x, y, 0.0) * d / 2 - 1))
        c.check("K0 vs 2/|x-y|", f"{kerr:.1e}", kerr <= 1e-6)
        op = DiscreteRayOperator(man, ImageGrid(64), boundary_direction_grid(man, 192, 96), 0.0)
        ks = np.array([5.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0])
        slope = loglog_slope(ks, plane_wave_quotients(op, ks))
        c.check("spectral slope", f"{slope:.3f}", abs(slope + 1) <= 0.15)
        # A(1) = T*T 1 at the center by the continuous transform and its adjoint; 8 E(|x|^2) off center
        rays = boundary_direction_grid(man, 128, 64)
        data = ray_transform(man, lambda x, y: np.ones_like(x), 0.0, rays)
        A1 = adjoint_ray_transform(man, data, 0.0, np.array([[0.0, 0.0], [0.3, 0.2]]))
        c.check("A(1) center / 4pi - 1", f"{A1[0] / (4 * np.pi) - 1:.1e}", abs(A1[0] / (4 * np.pi) - 1) <= 0.01)
        off = A1[1] / (8 * special.ellipe(0.13)) - 1
        c.check("A(1)(0.3,0.2) vs 8E(r^2)", f"{off:.1e}", abs(off) <= 0.01)


def test_criterion_09_round_trip(criterion):
    with criterion(9, "ray-transform round trip", 180) as c:
        man = euclidean_disk()
        grid = ImageGrid(64)
        rays = boundary_direction_grid(man, 192, 96)
        phantom = lambda x, y: (np.clip(1 - ((x - 0.2) ** 2 + (y + 0.1) ** 2) / 0.25, 0, None) ** 3
                                + 0.6 * np.clip(1 - ((x + 0.35) ** 2 + (y - 0.3) ** 2) / 0.09, 0, None) ** 3)
        truth = grid.sample(phantom)
        for lam in (0.0, 0.3):
            op = DiscreteRayOperator(man, grid, rays, lam)
            res = invert_normal(op, ray_transform(man, phantom, lam, rays).values, 1e-6)
            err = np.linalg.norm(res.image - truth) / np.linalg.norm(truth)
            c.check(f"lam={lam:g} rel L2", f"{err:.4f}", err <= 0.05 and res.converged)


def test_criterion_10_end_to_end(criterion, tmp_path):
    with criterion(10, "end-to-end reconstruction", 1200) as c:
        cfg = ExperimentConfig.from_ini(Path(__file__).parents[1] / "src" / "cgolab" / "data" / "demo.ini")
        rep = run_experiment(cfg, tmp_path)
        c.check("rel L2", f"{rep.rel_l2:.4f}", rep.rel_l2 <= 0.15)
        c.check("rel L3/2", f"{rep.rel_l32:.4f}", True)
        _, hashes = gridio.read_csv(tmp_path / "hashes.csv")
        intact = all(gridio.file_sha256(tmp_path / name) == digest for name, digest in hashes)
        c.check("hashes.csv consistent", intact, intact)
        digest = gridio.file_sha256(tmp_path / "report.csv")
        if GOLDEN.exists():
            golden = GOLDEN.read_text().split()[0]
            c.check("report.csv golden hash", digest[:12], digest == golden)
        else:
            GOLDEN.parent.mkdir(exist_ok=True)
            GOLDEN.write_text(digest + "  report.csv\n")
            c.check("report.csv golden hash recorded", digest[:12], True)
