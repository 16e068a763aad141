"""End-to-end recovery of a potential on the product cylinder R x M0 from CGO moments.

Stages: potential on the cylinder grid, CGO probes around fan centers on a ring
outside the unit disk, moments int q u1 u2 (volume side, remainders included),
least squares for f_lam = int e^{i lam x1} q dx1 on an image grid, inverse
Fourier transform in lam, and error reporting against the closed form.
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from . import gridio
from .carleman import CarlemanParams, SpectralField, make_params
from .cgo import (CgoDomain, ContractionError, Potential, PotentialOperator, hankel_cgo_pair,
                  neumann_solve, potential_from_function)
from .config import ExperimentConfig
from .forward import BoxGrid, DirichletSystem
from .geometry import ProductCylinder, build_flat_torus_basis, euclidean_disk
from .xray import (DiscreteRayOperator, ImageGrid, InversionError, InversionResult, conjugate_gradient,
                   fan_ray_set, invert_normal)

log = logging.getLogger(__name__)


class BudgetError(RuntimeError):
    pass


class PipelineError(RuntimeError):
    """A stage failed; ``record`` is the machine-readable error record."""

    def __init__(self, stage: str, exc: BaseException):
        self.stage = stage
        self.record = {"stage": stage, "error": type(exc).__name__, "message": str(exc)}
        super().__init__(f"stage '{stage}' failed: {type(exc).__name__}: {exc}")


# ---------------------------------------------------------------------------
# Test potential
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparablePotential:
    """q(x1, u) = amplitude exp(-(x1 - shift)^2 / (2 sigma1^2)) psi(u) for |x1| <= half_length.

    psi is a sum of C^2 bumps weight * (1 - |u - c|^2 / rho^2)_+^3, each given
    as (c_u, c_v, rho, weight). Disk coordinates u are centred at the origin.
    """

    amplitude: float = 0.5
    sigma1: float = 6.0
    half_length: float = 22.0
    shift: float = 0.0
    bumps: tuple = ((0.25, -0.15, 0.5, 1.0), (-0.35, 0.3, 0.35, 0.6))

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> "SeparablePotential":
        return cls(cfg.amplitude, cfg.sigma1, cfg.slab_half_length, cfg.shift, tuple(cfg.bumps))

    def psi(self, u, v) -> np.ndarray:
        out = np.zeros(np.broadcast(u, v).shape)
        for cu, cv, rho, w in self.bumps:
            out = out + w * np.clip(1 - ((u - cu) ** 2 + (v - cv) ** 2) / rho ** 2, 0, None) ** 3
        return out * (u * u + v * v < 1.0)

    def profile(self, x1) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        g = self.amplitude * np.exp(-(x1 - self.shift) ** 2 / (2 * self.sigma1 ** 2))
        return np.where(np.abs(x1) <= self.half_length, g, 0.0)

    def __call__(self, x1, u, v) -> np.ndarray:
        return self.profile(x1) * self.psi(u, v)

    def profile_transform(self, lam) -> np.ndarray:
        """int_{-L}^{L} profile(x1) e^{i lam x1} dx1 in closed form (complex erf)."""
        lam = np.asarray(lam, dtype=float)
        s, L = self.sigma1, self.half_length
        z = lambda a: (a - self.shift - 1j * lam * s * s) / (np.sqrt(2) * s)
        val = special.erf(z(L)) - special.erf(z(-L))
        pref = s * np.sqrt(np.pi / 2) * np.exp(1j * lam * self.shift - 0.5 * (lam * s) ** 2)
        return self.amplitude * pref * val

    def f_lambda(self, lam: float, u, v) -> np.ndarray:
        return self.profile_transform(lam) * self.psi(u, v)


# ---------------------------------------------------------------------------
# CGO stages and volume moments
# ---------------------------------------------------------------------------


@dataclass
class CgoStage:
    """Cylinder discretisation, sampled potential and the Neumann operator for one tau."""

    tau: float
    domain: CgoDomain
    q: Potential
    params: CarlemanParams
    op: PotentialOperator
    weight_m2: np.ndarray  # sum_x1 w |m|^2 on the base grid

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.domain.center, dtype=float)


def build_stage(cfg: ExperimentConfig, potential: Callable, tau: float) -> CgoStage:
    basis = build_flat_torus_basis(cfg.torus_cell, int(np.ceil(cfg.cluster_factor * tau)) + cfg.cluster_offset,
                                   oversample=cfg.oversample)
    cyl = ProductCylinder((-cfg.half_length, cfg.half_length), basis, cfg.n_x1)
    center = tuple(0.5 * L for L in cfg.torus_cell)
    dom = CgoDomain(cyl, center, 1.0, (-cfg.slab_half_length, cfg.slab_half_length))
    q = potential_from_function(dom, lambda x, X, Y: potential(x, X - center[0], Y - center[1]))
    params = make_params(tau, basis)
    if not params.admissible:
        raise ValueError(f"tau={tau} is too close to the torus spectrum (gap {params.spectral_gap:.3g})")
    op = PotentialOperator(q, params)
    w = cyl.x1_weights()
    return CgoStage(tau, dom, q, params, op, np.einsum("i,ijk->jk", w, np.abs(op.m) ** 2))


@dataclass
class FanMoments:
    """Moments int q u1 u2 for one fan center, indexed [lam, n]."""

    omega: np.ndarray  # disk coordinates
    tau: float
    lams: np.ndarray
    ns: np.ndarray
    moments: np.ndarray
    born: np.ndarray
    bound: np.ndarray  # Cauchy-Schwarz bound on |moments - born|
    contraction: float
    terms: int
    seconds: float = 0.0

    @property
    def budget_ratio(self) -> float:
        return float(np.max(self.bound) / max(np.max(np.abs(self.born)), 1e-300))

    @property
    def correction_ratio(self) -> float:
        return float(np.max(np.abs(self.moments - self.born)) / max(np.max(np.abs(self.born)), 1e-300))


def fan_moments(stage: CgoStage, omega: np.ndarray, ns: Sequence[int], lams: Sequence[float],
                tol: float = 1e-10) -> FanMoments:
    """Volume moments for u1 = e^{-tau x1}(e^{i lam x1} P1_n + r), u2 = e^{tau x1} P2.

    With v solving (I + A) v = -m u1~ the remainder is r = G(|q|^{1/2} v), and
    int q P2 r = -int m y u1~ where y solves (I + A^t) y = |q|^{1/2} G_{-tau}(q P2).
    One transposed Neumann solve therefore serves every (n, lam).
    """
    t0 = time.perf_counter()
    dom, base = stage.domain, stage.domain.cyl.base
    cyl = dom.cyl
    ns = np.asarray(ns, dtype=int)
    lams = np.asarray(lams, dtype=float)
    r, th = dom.polar(stage.center + omega)
    inside = dom.base_mask() > 0
    _, P2 = hankel_cgo_pair(r[inside], th[inside], 0, 0.0, stage.tau)
    P2g = np.zeros(r.shape, complex)
    P2g[inside] = P2
    op = stage.op
    qP2 = stage.q.values * P2g[None]
    z = op.mult(op.s, op.G(base.analyze(qP2), transpose=True))
    res = neumann_solve(stage.q, stage.tau, SpectralField(cyl, z), stage.params, tol=tol, transpose=True)
    y = res.v.to_grid() * (stage.q.values != 0)
    w = cyl.x1_weights()
    Q = qP2 - op.m * y
    phase = np.exp(1j * np.outer(lams, cyl.x1)) * w[None]
    Qhat = np.tensordot(phase, Q, axes=(1, 0))[:, inside]  # [lam, pts]
    Bhat = np.tensordot(phase, qP2, axes=(1, 0))[:, inside]
    y_norm = np.sqrt(np.sum(w[:, None, None] * np.abs(y) ** 2) * base.cell_weight)
    shape = (lams.size, ns.size)
    moments, born, bound = np.zeros(shape, complex), np.zeros(shape, complex), np.zeros(shape)
    for i, lam in enumerate(lams):
        P1, _ = hankel_cgo_pair(r[inside], th[inside], ns, lam, stage.tau)
        moments[i] = P1 @ Qhat[i] * base.cell_weight
        born[i] = P1 @ Bhat[i] * base.cell_weight
        mu_norm = np.sqrt(np.abs(P1) ** 2 @ stage.weight_m2[inside] * base.cell_weight)
        bound[i] = y_norm * mu_norm
    slack = 1e-9 * (np.abs(moments) + np.abs(born))
    if np.any(np.abs(moments - born) > bound + slack):
        raise BudgetError(f"remainder exceeds its Cauchy-Schwarz budget at omega={omega}, tau={stage.tau}")
    return FanMoments(np.asarray(omega, float), stage.tau, lams, ns, moments, born, bound,
                      res.contraction, res.n_terms, time.perf_counter() - t0)


def probe_centers(n_omega: int, radius: float) -> np.ndarray:
    beta = 2 * np.pi * np.arange(n_omega) / n_omega
    return radius * np.stack([np.cos(beta), np.sin(beta)], axis=1)


class MomentEngine:
    """Computes fan moments, raising tau along the schedule until the remainder budget is met."""

    def __init__(self, cfg: ExperimentConfig, potential: Callable):
        self.cfg = cfg
        self.potential = potential
        self._stages: dict = {}

    def stage(self, tau: float) -> CgoStage:
        if tau not in self._stages:
            log.info("building CGO stage tau=%g", tau)
            self._stages[tau] = build_stage(self.cfg, self.potential, tau)
        return self._stages[tau]

    def fan(self, omega: np.ndarray, ns, lams) -> FanMoments:
        schedule = list(self.cfg.tau_schedule)
        last = None
        for k, tau in enumerate(schedule):
            try:
                fm = fan_moments(self.stage(tau), omega, ns, lams)
            except ContractionError as exc:
                log.warning("tau=%g failed to contract: %s", tau, exc)
                if k == len(schedule) - 1:
                    raise
                continue
            last = fm
            if fm.budget_ratio <= self.cfg.remainder_tol:
                break
            log.info("omega=%s: remainder budget %.3g above %.3g at tau=%g", np.round(omega, 3),
                     fm.budget_ratio, self.cfg.remainder_tol, tau)
        if last.budget_ratio > self.cfg.remainder_tol:
            warnings.warn(f"remainder budget {last.budget_ratio:.3g} above tolerance {self.cfg.remainder_tol:.3g} "
                          f"at the tau cap {last.tau:g}", RuntimeWarning)
        return last

    def all_fans(self, omegas: np.ndarray, ns, lams) -> list:
        out = []
        for j, om in enumerate(omegas):
            out.append(self.fan(om, ns, lams))
            log.info("fan %d/%d tau=%g budget %.2e (%.1fs)", j + 1, len(omegas), out[-1].tau,
                     out[-1].budget_ratio, out[-1].seconds)
        return out


# ---------------------------------------------------------------------------
# Boundary-side moments on a small box (Dirichlet-to-Neumann pairing)
# ---------------------------------------------------------------------------


@dataclass
class BoundaryMoments:
    ns: np.ndarray
    lams: np.ndarray
    boundary: np.ndarray  # f2 . (N_q - N_0) f1
    volume: np.ndarray  # int q u1 u2 with the discrete solutions
    born: np.ndarray  # int q u1^0 u2^0 with the exact free solutions
    solve_residual: float

    @property
    def identity_defect(self) -> float:
        return float(np.max(np.abs(self.boundary - self.volume)) / max(np.max(np.abs(self.volume)), 1e-300))


def extract_moments_boundary(grid: BoxGrid, potential: Callable, omega, ns, lams, tau: float) -> BoundaryMoments:
    """Moments from the DN maps of q and 0 on a box in (x1, u, v), using exact free CGO traces.

    Only practical on small boxes at moderate tau: the traces oscillate at
    frequency tau and must be resolved by the box grid.
    """
    X1, U, V = grid.points()
    sq = DirichletSystem(grid, potential(X1, U, V))
    s0 = DirichletSystem(grid, 0.0)
    Nq, N0 = sq.dn_schur(), s0.dn_schur()
    ib = grid.boundary_index()
    r = np.hypot(U - omega[0], V - omega[1]).ravel()
    th = np.arctan2(V - omega[1], U - omega[0]).ravel()
    x1 = X1.ravel()
    ns, lams = np.asarray(ns, int), np.asarray(lams, float)
    _, P2 = hankel_cgo_pair(r, th, 0, 0.0, tau)
    u2 = np.exp(tau * x1) * P2
    u2h = s0.solve(u2[ib]).ravel()
    wts = grid.node_weights().ravel()
    qv = np.ravel(sq.q)
    shape = (lams.size, ns.size)
    bnd, vol, born = np.zeros(shape, complex), np.zeros(shape, complex), np.zeros(shape, complex)
    res = 0.0
    for i, lam in enumerate(lams):
        P1, _ = hankel_cgo_pair(r, th, ns, lam, tau)
        for j in range(ns.size):
            u1 = np.exp(-(tau - 1j * lam) * x1) * P1[j]
            u1q = sq.solve(u1[ib]).ravel()
            res = max(res, sq.residual(u1q))
            bnd[i, j] = u2[ib] @ ((Nq - N0) @ u1[ib])
            vol[i, j] = np.sum(wts * qv * u1q * u2h)
            born[i, j] = np.sum(wts * qv * u1 * u2)
    return BoundaryMoments(ns, lams, bnd, vol, born, res)


# ---------------------------------------------------------------------------
# Least squares for f_lam
# ---------------------------------------------------------------------------


def kernel_matrix(grid: ImageGrid, fans: Sequence[FanMoments], lam_index: int) -> np.ndarray:
    """Rows P1_n P2 * pixel area at the pixels inside the disk, one row per (fan, n)."""
    X, Y = grid.points()
    m = grid.mask
    rows = []
    for fm in fans:
        dx, dy = X[m] - fm.omega[0], Y[m] - fm.omega[1]
        P1, P2 = hankel_cgo_pair(np.hypot(dx, dy), np.arctan2(dy, dx), fm.ns, fm.lams[lam_index], fm.tau)
        rows.append(P1 * P2[None] * grid.cell_area)
    return np.concatenate(rows, axis=0)


def solve_kernel_least_squares(W: np.ndarray, data: np.ndarray, ridge: float, tol: float,
                               max_iter: Optional[int] = None) -> InversionResult:
    """Row-normalised ridge least squares by CG on the normal equations.

    The ridge is relative: ridge * s_max^2 with s_max the largest singular value
    of the normalised matrix.
    """
    rn = np.linalg.norm(W, axis=1)
    rn[rn == 0] = 1.0
    Wn, dn = W / rn[:, None], data / rn
    smax = np.linalg.norm(Wn, 2)
    rg = ridge * smax * smax
    WH = Wn.conj().T
    x, it, res = conjugate_gradient(lambda v: WH @ (Wn @ v) + rg * v, WH @ dn, tol, max_iter or 20 * W.shape[1])
    return InversionResult(x, it, res, res <= tol)


@dataclass
class FLambdaField:
    """f_lam = int e^{i lam x1} q dx1 on the image grid, one image per lam.

    ``ok`` flags the lam values whose inversion converged; ``provenance``
    records the fan centers, harmonics and tau values behind each image.
    """

    lams: np.ndarray
    grid: ImageGrid
    values: np.ndarray  # [lam, n, n]
    iterations: np.ndarray
    residuals: np.ndarray
    ok: np.ndarray
    provenance: dict = field(default_factory=dict)


def recover_f_lambda(fans: Sequence[FanMoments], grid: ImageGrid, ridge: float, tol: float) -> FLambdaField:
    """Per-lam kernel least squares; a failed lam is recorded and left as zeros."""
    lams = fans[0].lams
    m = grid.mask
    vals = np.zeros((lams.size, grid.n, grid.n), complex)
    its, ress = np.zeros(lams.size, int), np.full(lams.size, np.inf)
    ok = np.zeros(lams.size, bool)
    for i, lam in enumerate(lams):
        try:
            W = kernel_matrix(grid, fans, i)
            d = np.concatenate([fm.moments[i] for fm in fans])
            sol = solve_kernel_least_squares(W, d, ridge, tol)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            log.warning("inversion failed at lam=%g: %s", lam, exc)
            continue
        its[i], ress[i] = sol.iterations, sol.residual
        ok[i] = sol.converged and np.all(np.isfinite(sol.image))
        if ok[i]:
            vals[i][m] = sol.image
        else:
            log.warning("inversion did not converge at lam=%g (residual %.2e)", lam, sol.residual)
    prov = {"omegas": np.array([fm.omega for fm in fans]), "taus": np.array([fm.tau for fm in fans]),
            "harmonics": fans[0].ns.copy()}
    return FLambdaField(lams, grid, vals, its, ress, ok, prov)


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x, dtype=float)
    d = np.diff(x)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def inverse_fourier(field_: FLambdaField, x1: np.ndarray) -> np.ndarray:
    """q(x1, .) = (1/2pi) int f_lam e^{-i lam x1} dlam by the trapezoid rule over the surviving lam."""
    keep = field_.ok
    lams = field_.lams[keep]
    if lams.size == 0:
        raise InversionError("no lam value survived the inversion")
    w = trapezoid_weights(lams)
    ker = np.exp(-1j * np.outer(x1, lams)) * w[None] / (2 * np.pi)
    return np.tensordot(ker, field_.values[keep], axes=(1, 0))


def recover_potential(field_: FLambdaField, x1: np.ndarray, truth: Optional[Callable] = None) -> tuple:
    """q_hat on (x1 grid) x (image grid) and, if ``truth`` is given, the sampled ground truth."""
    X, Y = field_.grid.points()
    m = field_.grid.mask[None]
    q_hat = inverse_fourier(field_, x1) * m
    q_true = None if truth is None else truth(x1[:, None, None], X[None], Y[None]) * m
    return q_hat, q_true


# ---------------------------------------------------------------------------
# Asymptotic route: fan moments -> ray data -> weighted X-ray inversion
# ---------------------------------------------------------------------------


def fan_sector(omega: np.ndarray, radius: float = 1.0) -> tuple:
    """Central direction and half-opening of the directions from omega that meet the disk."""
    d = float(np.hypot(*omega))
    return float(np.arctan2(-omega[1], -omega[0])), float(np.arcsin(radius / d))


def hat_gram(ns: np.ndarray, thetas: np.ndarray, spacing: float) -> np.ndarray:
    """G[n, j] = int e^{i n theta} phi_j(theta) dtheta for hats of half-width ``spacing``."""
    ns = np.asarray(ns, float)[:, None]
    return spacing * np.exp(1j * ns * thetas[None]) * np.sinc(ns * spacing / (2 * np.pi)) ** 2


def assemble_f_lambda(fans_omega: np.ndarray, moments: np.ndarray, ns: np.ndarray, lam: float,
                      grid: ImageGrid, n_theta: int = 15, ridge: float = 1e-2, tol: float = 1e-8,
                      max_condition: float = 1e6) -> tuple:
    """Invert the leading-order model M_n = int e^{i n theta} g(theta) dtheta fan by fan.

    g(theta) = e^{-lam r_in} T_lam f(ray) is expanded in hats on the open fan
    sector (g vanishes at the tangent directions); its nodal values become weighted
    X-ray data that are inverted with the discrete normal operator. Raises
    InversionError when the Gram system is worse conditioned than ``max_condition``.
    Returns (InversionResult, RaySet, ray values).
    """
    man = euclidean_disk()
    oms, ths, wts, vals = [], [], [], []
    R = float(np.mean(np.hypot(fans_omega[:, 0], fans_omega[:, 1])))
    dbeta = 2 * np.pi / len(fans_omega)
    for om, mom in zip(fans_omega, moments):
        c, a = fan_sector(om)
        h = 2 * a / (n_theta + 1)
        th = c - a + h * np.arange(1, n_theta + 1)
        G = hat_gram(ns, th, h)
        cond = np.linalg.cond(G)
        if cond > max_condition:
            raise InversionError(f"fan Gram system condition {cond:.3g} exceeds {max_condition:.3g}")
        g = np.linalg.lstsq(G, mom, rcond=None)[0]
        beta = np.arctan2(om[1], om[0])
        oms.append(np.repeat(om[None], n_theta, axis=0))
        ths.append(th)
        wts.append(R * np.abs(np.cos(th - beta)) * dbeta * h)
        vals.append(g)
    oms, ths = np.concatenate(oms), np.concatenate(ths)
    wts, g = np.concatenate(wts), np.concatenate(vals)
    rays, r_in, keep = fan_ray_set(man, oms, ths, wts)
    rays.weight = rays.weight / rays.mu
    data = np.exp(lam * r_in) * g[keep]
    op = DiscreteRayOperator(man, grid, rays, lam)
    return invert_normal(op, data, ridge=ridge, tol=tol), rays, data


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------


def relative_error(a: np.ndarray, b: np.ndarray, p: float = 2.0, weights=None) -> float:
    w = 1.0 if weights is None else weights
    num = np.sum(w * np.abs(a - b) ** p) ** (1 / p)
    den = np.sum(w * np.abs(b) ** p) ** (1 / p)
    return float(num / den)


def sig6(x: float) -> str:
    return f"{float(x):.6g}"


def reconstruction_errors(q_hat: np.ndarray, q_true: np.ndarray, x1: np.ndarray, mask: np.ndarray) -> dict:
    """Relative L^2 and L^{3/2} errors (trapezoid in x1, pixel sums on the disk)."""
    w = trapezoid_weights(x1)[:, None, None] * mask[None]
    return {"rel_l2": relative_error(q_hat, q_true, 2.0, w), "rel_l32": relative_error(q_hat, q_true, 1.5, w)}


@dataclass
class ReconReport:
    config: ExperimentConfig
    fans: list
    f_field: FLambdaField
    x1: np.ndarray
    q_recon: np.ndarray  # [x1, n, n]
    q_true: np.ndarray
    f_errors: np.ndarray
    dn_check: Optional[BoundaryMoments] = None
    timings: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    @property
    def errors(self) -> dict:
        return reconstruction_errors(self.q_recon, self.q_true, self.x1, self.f_field.grid.mask)

    @property
    def rel_l2(self) -> float:
        return self.errors["rel_l2"]

    @property
    def rel_l32(self) -> float:
        return self.errors["rel_l32"]

    def summary_rows(self) -> list:
        taus = np.array([fm.tau for fm in self.fans])
        err = self.errors
        lams = self.f_field.lams
        rows = [
            ("rel_l2_error", sig6(err["rel_l2"])),
            ("rel_l32_error", sig6(err["rel_l32"])),
            ("max_f_lambda_error", sig6(np.max(self.f_errors))),
            ("lambda_band_min", sig6(lams.min())),
            ("lambda_band_max", sig6(lams.max())),
            ("lambda_failed", int(np.sum(~self.f_field.ok))),
            ("n_fans", len(self.fans)),
            ("n_harmonics", self.fans[0].ns.size),
            ("n_lambda", lams.size),
            ("tau_cap", sig6(max(self.config.tau_schedule))),
            ("fans_escalated", int(np.sum(taus > self.config.tau_schedule[0]))),
            ("max_budget_ratio", sig6(max(fm.budget_ratio for fm in self.fans))),
            ("max_correction_ratio", sig6(max(fm.correction_ratio for fm in self.fans))),
            ("max_contraction", sig6(max(fm.contraction for fm in self.fans))),
            ("max_cg_residual", sig6(np.max(self.f_field.residuals))),
        ]
        if self.dn_check is not None:
            rows.append(("dn_identity_defect", sig6(self.dn_check.identity_defect)))
        for lam, e in zip(lams, self.f_errors):
            rows.append((f"f_lambda_error[{lam:+.2f}]", sig6(e)))
        return rows

    def plot_rows(self) -> list:
        """Centre-slice profiles: q along x1 at the pixel nearest the first bump, and q(0, .) on the axis v = 0."""
        g = self.f_field.grid
        cu, cv = self.config.bumps[0][:2]
        i, j = int(np.argmin(np.abs(g.axis - cu))), int(np.argmin(np.abs(g.axis - cv)))
        k0 = int(np.argmin(np.abs(self.x1)))
        jc = g.n // 2
        rows = [("x1_profile", sig6(x), sig6(self.q_true[k, i, j]), sig6(self.q_recon[k, i, j].real),
                 sig6(self.q_recon[k, i, j].imag)) for k, x in enumerate(self.x1)]
        rows += [("u_profile", sig6(u), sig6(self.q_true[k0, a, jc]), sig6(self.q_recon[k0, a, jc].real),
                  sig6(self.q_recon[k0, a, jc].imag)) for a, u in enumerate(g.axis)]
        return rows

    def write(self, out: Path) -> dict:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        files = {}

        def csv(name, header, rows):
            gridio.write_csv(out / name, header, rows)
            files[name] = out / name

        csv("report.csv", ["metric", "value"], self.summary_rows())
        csv("fans.csv", ["index", "omega_u", "omega_v", "tau", "contraction", "neumann_terms",
                         "budget_ratio", "correction_ratio"],
            [(j, sig6(fm.omega[0]), sig6(fm.omega[1]), sig6(fm.tau), sig6(fm.contraction), fm.terms,
              sig6(fm.budget_ratio), sig6(fm.correction_ratio)) for j, fm in enumerate(self.fans)])
        csv("lambda.csv", ["lambda", "ok", "rel_error", "cg_iterations", "cg_residual"],
            [(sig6(l), int(ok), sig6(e), int(it), sig6(r)) for l, ok, e, it, r in
             zip(self.f_field.lams, self.f_field.ok, self.f_errors, self.f_field.iterations,
                 self.f_field.residuals)])
        csv("plot_data.csv", ["series", "coordinate", "q_true", "q_recon_re", "q_recon_im"], self.plot_rows())
        for name, arr in (("f_lambda.cgog", self.f_field.values), ("q_recon.cgog", self.q_recon),
                          ("q_true.cgog", self.q_true), ("x1.cgog", self.x1), ("lambda.cgog", self.f_field.lams)):
            gridio.write_grid(out / name, arr)
            files[name] = out / name
        self.config.to_ini(out / "config.ini")
        files["config.ini"] = out / "config.ini"
        gridio.write_csv(out / "timings.csv", ["stage", "seconds"],
                         [(k, f"{v:.2f}") for k, v in self.timings.items()])
        gridio.write_csv(out / "hashes.csv", ["file", "sha256"],
                         [(k, gridio.file_sha256(v)) for k, v in sorted(files.items())])
        self.files = files
        return files


def dn_consistency_check(cfg: ExperimentConfig, potential: SeparablePotential, tau: float = 4.0,
                         n_nodes: int = 13) -> BoundaryMoments:
    """Boundary versus volume moments on a small box inside the disk at low tau."""
    grid = BoxGrid((-0.6, -0.6, -0.6), (0.6, 0.6, 0.6), (n_nodes,) * 3)
    omega = np.array([cfg.omega_radius, 0.0])
    return extract_moments_boundary(grid, potential, omega, [0, 1, 2], [0.0, 0.3], tau)


class _Stage:
    """Context manager that times a stage and wraps its failures in PipelineError."""

    def __init__(self, name: str, timings: dict, out: Optional[Path]):
        self.name, self.timings, self.out = name, timings, out

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, typ, exc, tb):
        self.timings[self.name] = time.perf_counter() - self.t0
        if exc is None or isinstance(exc, PipelineError):
            return False
        err = PipelineError(self.name, exc)
        if self.out is not None:
            Path(self.out).mkdir(parents=True, exist_ok=True)
            (Path(self.out) / "error.json").write_text(json.dumps(err.record, indent=2) + "\n")
        raise err from exc


def run_experiment(cfg: ExperimentConfig, out: Optional[Path] = None, with_dn_check: bool = True,
                   potential: Optional[SeparablePotential] = None) -> ReconReport:
    """Full synthetic round trip; artifacts go to ``out`` when given."""
    timings: dict = {}
    with _Stage("config", timings, out):
        cfg.validate()
        pot = potential or SeparablePotential.from_config(cfg)
        rng = np.random.default_rng(cfg.seed)
    dn = None
    if with_dn_check:
        with _Stage("forward", timings, out):
            dn = dn_consistency_check(cfg, pot)
            log.info("DN identity defect %.2e", dn.identity_defect)
    with _Stage("cgo_moments", timings, out):
        engine = MomentEngine(cfg, pot)
        ns = np.arange(-cfg.harmonics, cfg.harmonics + 1)
        fans = engine.all_fans(probe_centers(cfg.n_omega, cfg.omega_radius), ns, cfg.lambdas)
        if cfg.noise > 0:
            for fm in fans:
                scale = cfg.noise * np.sqrt(np.mean(np.abs(fm.moments) ** 2))
                noise = rng.standard_normal(fm.moments.shape) + 1j * rng.standard_normal(fm.moments.shape)
                fm.moments = fm.moments + scale * noise / np.sqrt(2)
    with _Stage("f_lambda", timings, out):
        grid = ImageGrid(cfg.grid, 1.0)
        ff = recover_f_lambda(fans, grid, cfg.ridge, cfg.tol)
        X, Y = grid.points()
        m = grid.mask
        f_err = np.array([relative_error(ff.values[i][m], pot.f_lambda(lam, X, Y)[m])
                          for i, lam in enumerate(ff.lams)])
    with _Stage("recovery", timings, out):
        x1 = np.linspace(-cfg.slab_half_length, cfg.slab_half_length,
                         int(round(2 * cfg.slab_half_length / cfg.h1)) + 1)
        q_rec, q_true = recover_potential(ff, x1, pot)
    rep = ReconReport(cfg, fans, ff, x1, q_rec, q_true, f_err, dn, timings)
    if out is not None:
        with _Stage("write", timings, out):
            rep.write(out)
    return rep
