"""Command line interface: ``cgolab <subcommand> [--config PATH] [--out DIR] [--threads K] [--seed S]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

SUBCOMMANDS = ("verify-carleman", "verify-xray", "build-cgo", "dn-map", "reconstruct", "report")


def _load_config(args):
    from .config import ExperimentConfig
    cfg = ExperimentConfig.from_ini(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = int(args.seed)
    return cfg.validate()


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_verify_carleman(args) -> int:
    import numpy as np
    from . import gridio
    from .carleman import sweep_cylinder, verify_carleman_sweep, verify_cluster_estimates
    from .geometry import build_flat_torus_basis

    out = _out(args)
    taus = [float(t) for t in args.taus]
    rep = verify_carleman_sweep(sweep_cylinder, taus)
    rep.to_csv(out / "carleman.csv")
    rows = []
    for pair in ("L2", "H1", "Lp"):
        spread = rep.spread(pair)
        rows.append((pair, repr(spread), int(spread < 2)))
        print(f"{pair:>3}: constants {rep.constants()[pair]}  spread {spread:.3f}")
    basis = build_flat_torus_basis((2 * np.pi, 2 * np.pi), 8)
    clu = verify_cluster_estimates(basis, trials=4, seed=args.seed or 0)
    clu.to_csv(out / "clusters.csv")
    sogge = clu.constants()["sogge"]
    ratio = max(sogge.values()) / min(v for k, v in sogge.items() if k <= 3)
    rows.append(("sogge", repr(ratio), int(np.isfinite(ratio))))
    print(f"Sogge ratio max/min(k<=3): {ratio:.3f}")
    gridio.write_csv(out / "carleman_summary.csv", ["quantity", "spread", "bounded"], rows)
    return 0 if all(r[2] for r in rows) else 1


def cmd_verify_xray(args) -> int:
    import numpy as np
    from . import gridio
    from .geometry import euclidean_disk
    from .xray import (ImageGrid, adjoint_ray_transform, boundary_direction_grid, disk_quadrature,
                       kernel_K_lambda, normal_operator, ray_transform, santalo_integral)

    out = _out(args)
    man = euclidean_disk()
    rays = boundary_direction_grid(man, 128, 64)
    vol = santalo_integral(man, lambda x, y, vx, vy: np.ones_like(x), rays)
    rows = [("santalo_rel_defect", repr(float(abs(vol / (2 * np.pi ** 2) - 1))))]
    rng = np.random.default_rng(args.seed or 0)
    xq, yq, wq = disk_quadrature(man, 48, 96)
    worst = 0.0
    for k in range(4):
        lam = (0.0, 0.3)[k % 2]
        c = 0.3 * rng.standard_normal(2)
        f = lambda x, y: np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2))
        d = rng.standard_normal(2)
        h = lambda b, a: (1 + 0.5 * d[0] * np.cos(b) + 0.3 * d[1] * a) * np.cos(a) ** 4
        Tf = ray_transform(man, f, lam, rays)
        hv = h(rays.beta, rays.alpha)
        lhs = rays.pairing(Tf.values, hv)
        rhs = np.sum(wq * f(xq, yq) * adjoint_ray_transform(man, h, lam, np.stack([xq, yq], 1)))
        scale = np.sqrt(rays.pairing(hv ** 2, 1.0) * np.sum(wq * f(xq, yq) ** 2))
        worst = max(worst, abs(lhs - rhs) / scale)
    rows.append(("adjoint_rel_defect", repr(float(worst))))
    x, y = np.array([0.1, 0.2]), np.array([-0.3, 0.4])
    rows.append(("kernel_rel_defect", repr(float(abs(kernel_K_lambda(man, x, y, 0.0) * np.linalg.norm(x - y) / 2 - 1)))))
    nm = normal_operator(man, 0.0, ImageGrid(16))
    rows.append(("normal_symmetry_defect", repr(float(nm.symmetry_defect))))
    gridio.write_csv(out / "xray_checks.csv", ["check", "value"], rows)
    for name, val in rows:
        print(f"{name}: {float(val):.3e}")
    ok = worst <= 1e-4 and float(rows[0][1]) <= 1e-3 and float(rows[2][1]) <= 1e-6
    return 0 if ok else 1


def cmd_build_cgo(args) -> int:
    from . import gridio
    from .cgo import build_cgo, cgo_domain, reference_ansatz, spiky_potential

    out = _out(args)
    rows = []
    for tau in [float(t) for t in args.taus]:
        dom = cgo_domain(tau)
        q = spiky_potential(dom)
        sol = build_cgo(q, reference_ansatz(dom), tau)
        d = sol.diagnostics
        rows.append((repr(tau), repr(float(q.norm(1.5))), repr(float(d["rtilde_L2"])), repr(float(d["rtilde_L6"])),
                     repr(float(d["contraction"])), d["neumann_terms"], repr(float(d["residual"]))))
        print(f"tau={tau:g}: |r~|_2={d['rtilde_L2']:.3e} |r~|_6={d['rtilde_L6']:.3e} "
              f"contraction={d['contraction']:.3e} residual={d['residual']:.2e}")
        gridio.write_grid(out / f"rtilde_tau{tau:g}.cgog", sol.rtilde.to_grid())
    gridio.write_csv(out / "cgo.csv", ["tau", "q_L32", "rtilde_L2", "rtilde_L6", "contraction",
                                       "neumann_terms", "residual"], rows)
    return 0


def cmd_dn_map(args) -> int:
    import numpy as np
    from . import gridio
    from .forward import BoxGrid, DirichletSystem, integral_identity_residual
    from .pipeline import SeparablePotential

    cfg = _load_config(args)
    out = _out(args)
    pot = SeparablePotential.from_config(cfg)
    grid = BoxGrid((-0.6, -0.6, -0.6), (0.6, 0.6, 0.6), (args.nodes,) * 3)
    X1, U, V = grid.points()
    q = pot(X1, U, V)
    sysq = DirichletSystem(grid, q)
    N = sysq.dn_schur()
    gridio.write_grid(out / "dn_map.cgog", N)
    sym = float(np.max(np.abs(N - N.T)) / np.max(np.abs(N)))
    rng = np.random.default_rng(cfg.seed)
    nb = grid.boundary_index().size
    ident = integral_identity_residual(grid, q, 0.0, rng.standard_normal(nb), rng.standard_normal(nb))
    gridio.write_csv(out / "dn_checks.csv", ["check", "value"],
                     [("symmetry_defect", repr(sym)), ("identity_defect", repr(ident.defect)),
                      ("identity_tolerance", repr(ident.tolerance))])
    print(f"DN map {N.shape}: symmetry defect {sym:.2e}, identity defect {ident.defect:.2e} "
          f"(tolerance {ident.tolerance:.2e})")
    return 0 if sym <= 1e-8 and ident.ok else 1


def cmd_reconstruct(args) -> int:
    from .pipeline import PipelineError, run_experiment

    cfg = _load_config(args)
    try:
        rep = run_experiment(cfg, _out(args))
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"relative L2 error {rep.rel_l2:.4f}, L^3/2 error {rep.rel_l32:.4f}")
    print(f"artifacts written to {args.out}")
    return 0


def cmd_report(args) -> int:
    from . import gridio

    out = Path(args.out)
    header, rows = gridio.read_csv(out / "report.csv")
    for name, val in rows:
        print(f"{name:28s} {val}")
    status = 0
    if (out / "hashes.csv").exists():
        _, hashes = gridio.read_csv(out / "hashes.csv")
        for name, digest in hashes:
            if gridio.file_sha256(out / name) != digest:
                print(f"hash mismatch: {name}")
                status = 1
    return status


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    """Global flags; the subcommand copy suppresses defaults so flags may precede or follow it."""
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=d(None), help="INI experiment config (defaults to the bundled demo)")
    common.add_argument("--out", default=d("cgolab_out"), help="output directory")
    common.add_argument("--threads", type=int, default=d(None), help="BLAS/OpenMP thread count")
    common.add_argument("--seed", type=int, default=d(None), help="random seed (unsigned 64-bit)")
    common.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return common


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cgolab", parents=[_global_flags(False)],
                                description="CGO reconstruction experiments on product cylinders")
    common = _global_flags(True)
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("verify-carleman", parents=[common], help="Carleman sweep and cluster estimates")
    s.add_argument("--taus", nargs="+", default=["8", "16", "32", "64"])
    s.set_defaults(func=cmd_verify_carleman)
    s = sub.add_parser("verify-xray", parents=[common], help="X-ray adjoint, Santalo and kernel checks")
    s.set_defaults(func=cmd_verify_xray)
    s = sub.add_parser("build-cgo", parents=[common], help="CGO remainders for a spiky potential")
    s.add_argument("--taus", nargs="+", default=["8", "16", "32"])
    s.set_defaults(func=cmd_build_cgo)
    s = sub.add_parser("dn-map", parents=[common], help="DN map of the demo potential on a small box")
    s.add_argument("--nodes", type=int, default=13)
    s.set_defaults(func=cmd_dn_map)
    s = sub.add_parser("reconstruct", parents=[common], help="run the end-to-end experiment")
    s.set_defaults(func=cmd_reconstruct)
    s = sub.add_parser("report", parents=[common], help="print a stored report and check its hashes")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        raise SystemExit("--seed must be an unsigned 64-bit integer")
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return int(args.func(args) or 0)


if __name__ == "__main__":
    sys.exit(main())
