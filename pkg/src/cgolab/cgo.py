"""Complex geometrical optics solutions on I x T^2 over a disk-shaped M0.

The working region is M = slab x disk, embedded in the cylinder I x T^2 on
which G_tau is available. The fan center omega lies outside the disk, so the
polar normal coordinates (r, theta) around omega are smooth on M. Amplitudes
are multiplied by a C^infinity radial cutoff that equals 1 near the disk and
vanishes before omega, which turns them into smooth periodic functions.

Products with the potential are formed on the base grid and projected back
onto the retained modes (a Galerkin product).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .carleman import (CarlemanParams, SpectralField, apply_G_tau, conjugated_laplacian, lp_norm,
                       make_params)
from .geometry import ProductCylinder, build_flat_torus_basis


class ContractionError(RuntimeError):
    """The Neumann series for the potential correction does not contract."""


# ---------------------------------------------------------------------------
# Domain and potential
# ---------------------------------------------------------------------------


def smooth_transition(s):
    """C^infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class CgoDomain:
    """M = slab x disk(center, radius) inside the cylinder ``cyl`` = I x T^2."""

    cyl: ProductCylinder
    center: tuple
    radius: float
    slab: tuple

    def __post_init__(self):
        a, b = self.cyl.interval
        if not (a < self.slab[0] < self.slab[1] < b):
            raise ValueError("slab must lie strictly inside the x1 interval")
        L = self.cyl.base.side_lengths
        c = self.center
        if not all(self.radius < ci < Li - self.radius for ci, Li in zip(c, L)):
            raise ValueError("disk must fit inside the torus cell")

    def base_coords(self):
        return self.cyl.base.grid_points()

    def base_mask(self) -> np.ndarray:
        X, Y = self.base_coords()
        return ((X - self.center[0]) ** 2 + (Y - self.center[1]) ** 2 <= self.radius ** 2).astype(float)

    def slab_mask(self) -> np.ndarray:
        x = self.cyl.x1
        return ((x >= self.slab[0] - 1e-12) & (x <= self.slab[1] + 1e-12)).astype(float)

    def mask(self) -> np.ndarray:
        return self.slab_mask()[:, None, None] * self.base_mask()[None]

    def norm(self, values: np.ndarray, p: float) -> float:
        """L^p(M) norm of grid values (x1 grid x base grid)."""
        return lp_norm(values, p, cyl=self.cyl, mask=self.mask())

    def polar(self, omega):
        X, Y = self.base_coords()
        dx, dy = X - omega[0], Y - omega[1]
        return np.hypot(dx, dy), np.arctan2(dy, dx)

    def cutoff(self, omega) -> np.ndarray:
        """Smooth radial cutoff: 1 within radius + 0.1 d, 0 beyond radius + 0.6 d, d = dist - radius."""
        d = float(np.hypot(omega[0] - self.center[0], omega[1] - self.center[1])) - self.radius
        if d <= 0:
            raise ValueError("fan center must lie outside M0")
        X, Y = self.base_coords()
        rc = np.hypot(X - self.center[0], Y - self.center[1])
        r0, r1 = self.radius + 0.1 * d, self.radius + 0.6 * d
        return 1.0 - smooth_transition((rc - r0) / (r1 - r0))


def cgo_domain(tau: float, side_lengths=(5.0, 5.3), interval=(-0.2, 1.2), slab=(0.0, 1.0),
               radius: float = 1.0, h1: float = 0.025, cluster_factor: float = 1.6,
               oversample: float = 1.5) -> CgoDomain:
    """Domain with a mode budget adapted to tau (clusters up to cluster_factor * tau + 8)."""
    basis = build_flat_torus_basis(side_lengths, int(np.ceil(cluster_factor * abs(tau))) + 8,
                                   oversample=oversample)
    n = int(round((interval[1] - interval[0]) / h1)) + 1
    cyl = ProductCylinder(tuple(interval), basis, n)
    center = tuple(0.5 * L for L in side_lengths)
    return CgoDomain(cyl, center, radius, tuple(slab))


@dataclass
class Potential:
    """Complex potential sampled on the cylinder grid, zero outside M."""

    domain: CgoDomain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex) * self.domain.mask()

    @property
    def abs_sqrt(self) -> np.ndarray:
        return np.sqrt(np.abs(self.values))

    @property
    def alpha(self) -> np.ndarray:
        return np.angle(self.values)

    @property
    def m(self) -> np.ndarray:
        """|q|^{1/2} e^{i alpha}, so that q = |q|^{1/2} m."""
        return self.abs_sqrt * np.exp(1j * self.alpha)

    def norm(self, p: float) -> float:
        return lp_norm(self.values, p, cyl=self.domain.cyl)

    def n_half_norm(self) -> float:
        return self.norm(self.domain.cyl.n / 2.0)

    def scaled(self, s: complex) -> "Potential":
        return Potential(self.domain, self.values * s)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)


def potential_from_function(domain: CgoDomain, func) -> Potential:
    X, Y = domain.base_coords()
    vals = np.stack([func(x, X, Y) for x in domain.cyl.x1])
    return Potential(domain, vals)


def split_potential(q: Potential, eps: float):
    """q = q_sharp + q_flat with q_sharp = q 1{|q| <= mu} and ||q_flat||_{L^{n/2}} <= eps.

    mu is the smallest level among the sorted |q| values for which the tail
    still meets the bound. If q itself already has ||q||_{L^{n/2}} <= eps no
    trimming is needed and q_flat = 0.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    cyl = q.domain.cyl
    p = cyl.n / 2.0
    if q.n_half_norm() <= eps:
        return q, Potential(q.domain, np.zeros_like(q.values))
    w = (cyl.x1_weights()[:, None, None] * np.ones(cyl.base.grid_shape)[None] * cyl.base.cell_weight).ravel()
    a = np.abs(q.values).ravel()
    order = np.argsort(-a, kind="stable")
    contrib = np.cumsum(w[order] * a[order] ** p)
    # levels: trimming all values strictly above a[order[k]] keeps a tail of contrib[k-1]
    levels = a[order]
    best = levels[0]
    for k in range(1, a.size):
        if levels[k] == levels[k - 1]:
            continue
        tail = contrib[k - 1] ** (1.0 / p)
        if tail <= eps:
            best = levels[k]
        else:
            break
    flat = np.where(np.abs(q.values) > best, q.values, 0)
    return Potential(q.domain, q.values - flat), Potential(q.domain, flat)


# ---------------------------------------------------------------------------
# Ansatz
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CgoAnsatz:
    """Fan center omega, frequency lam and angular profile b = sum_n c_n e^{i n theta}."""

    omega: tuple
    lam: float
    harmonics: tuple = (0,)
    coeffs: tuple = (1.0,)

    def b(self, theta) -> np.ndarray:
        return sum(c * np.exp(1j * n * theta) for n, c in zip(self.harmonics, self.coeffs))

    def b_dd(self, theta) -> np.ndarray:
        return sum(-n * n * c * np.exp(1j * n * theta) for n, c in zip(self.harmonics, self.coeffs))


@dataclass
class CgoSolution:
    """CGO data. The amplitude is kept analytically as e^{i lam x1} A(x') on the base grid."""

    tau: float
    ansatz: CgoAnsatz
    domain: CgoDomain
    a_profile: np.ndarray
    f: SpectralField
    r0: SpectralField
    r1: Optional[SpectralField] = None
    v: Optional[SpectralField] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def rtilde(self) -> SpectralField:
        return self.r0 if self.r1 is None else self.r0 + self.r1

    def a_grid(self) -> np.ndarray:
        phase = np.exp(1j * self.ansatz.lam * self.domain.cyl.x1)
        return phase[:, None, None] * self.a_profile[None]

    def conjugated_grid(self) -> np.ndarray:
        """Grid values of e^{tau x1} u = a + r~ (meaningful on M)."""
        return self.a_grid() + self.rtilde.to_grid()

    def u_grid(self) -> np.ndarray:
        return np.exp(-self.tau * self.domain.cyl.x1)[:, None, None] * self.conjugated_grid()


def _fan_polar(domain: CgoDomain, ansatz: CgoAnsatz):
    r, th = domain.polar(ansatz.omega)
    d = float(np.hypot(ansatz.omega[0] - domain.center[0], ansatz.omega[1] - domain.center[1])) - domain.radius
    return r, th, r > 0.05 * d


def amplitude_profile(domain: CgoDomain, ansatz: CgoAnsatz, tau: float) -> np.ndarray:
    """A(x') = e^{-(lam + i tau) r} r^{-1/2} b(theta), set to 0 in a small disk around omega."""
    r, th, ok = _fan_polar(domain, ansatz)
    rs = np.where(ok, r, 1.0)
    return np.where(ok, np.exp(-(ansatz.lam + 1j * tau) * rs) / np.sqrt(rs) * ansatz.b(th), 0.0)


def source_closed_form(domain: CgoDomain, ansatz: CgoAnsatz, tau: float) -> np.ndarray:
    """Base profile of e^{tau x1} Delta e^{-tau x1} a: e^{-(lam + i tau) r} r^{-5/2} (b/4 + b'').

    With a = e^{i lam x1} A the x1 part contributes (i lam - tau)^2 A, which
    cancels the kappa^2 A term of the radial Laplacian (kappa = lam + i tau).
    """
    r, th, ok = _fan_polar(domain, ansatz)
    rs = np.where(ok, r, 1.0)
    F = np.exp(-(ansatz.lam + 1j * tau) * rs) * rs ** -2.5 * (0.25 * ansatz.b(th) + ansatz.b_dd(th))
    return np.where(ok, F, 0.0)


def _masked_h1(domain: CgoDomain, u: SpectralField) -> float:
    """H^1(M) norm via grid synthesis of u, d_x1 u and the tangential gradient."""
    base = domain.cyl.base
    mask = domain.mask()
    w1 = domain.cyl.x1_weights()
    du = np.gradient(u.coeffs, domain.cyl.h1, axis=0, edge_order=2)
    total = 0.0
    for coeffs in (u.coeffs, du):
        total += float(np.sum(w1[:, None, None] * mask * np.abs(base.synthesize(coeffs)) ** 2))
    for i, L in enumerate(base.side_lengths):
        kx = 2j * np.pi * base.kvecs[:, i] / L
        g = base.synthesize(u.coeffs * kx[None, :])
        total += float(np.sum(w1[:, None, None] * mask * np.abs(g) ** 2))
    return float(np.sqrt(total * base.cell_weight))


def build_free_cgo(domain: CgoDomain, ansatz: CgoAnsatz, tau: float,
                   params: Optional[CarlemanParams] = None) -> CgoSolution:
    """u0 = e^{-tau x1}(a + r0) with r0 = G_tau(zeta f), f = e^{tau x1} Delta e^{-tau x1} a.

    zeta is a smooth cutoff equal to 1 on M, so e^{tau x1}(-Delta)e^{-tau x1}(a + r0) = 0
    on M. Cutting off the O(1) source rather than the amplitude keeps the
    projected data free of the tau^2 cancellation inside f.
    """
    params = params or make_params(tau, domain.cyl.base)
    omega = np.asarray(ansatz.omega, float)
    if np.hypot(*(omega - np.asarray(domain.center))) <= domain.radius:
        raise ValueError("fan center must lie outside M0")
    cyl = domain.cyl
    base = cyl.base
    phase = np.exp(1j * ansatz.lam * cyl.x1)
    F = source_closed_form(domain, ansatz, tau) * domain.cutoff(ansatz.omega)
    f = SpectralField(cyl, phase[:, None] * base.analyze(F)[None, :])
    r0 = apply_G_tau(f, params)
    sol = CgoSolution(tau, ansatz, domain, amplitude_profile(domain, ansatz, tau), f, r0)
    r, th, _ = _fan_polar(domain, ansatz)
    bm = domain.base_mask()
    rs = np.where(bm > 0, r, 1.0)
    amp_lap = np.exp(-ansatz.lam * rs) * (-ansatz.lam * ansatz.b(th) / rs + ansatz.b_dd(th) / rs ** 2) * bm
    slab_len = domain.slab[1] - domain.slab[0]
    bm3 = domain.mask()
    sol.diagnostics.update({
        "tau": tau,
        "source_L2": domain.norm(np.exp(1j * ansatz.lam * cyl.x1)[:, None, None] * F[None] * bm3, 2),
        "source_projection_error": float(np.max(np.abs(base.synthesize(base.analyze(F)) - F)[bm > 0])),
        "amplitude_laplacian_L2": float(np.sqrt(slab_len * np.sum(np.abs(amp_lap) ** 2) * base.cell_weight)),
        "r0_L2": domain.norm(r0.to_grid(), 2),
        "r0_H1": _masked_h1(domain, r0),
        "r0_L6": domain.norm(r0.to_grid(), 2 * cyl.n / (cyl.n - 2)),
    })
    sol.diagnostics["free_residual"] = cgo_residual(None, sol)
    return sol


# ---------------------------------------------------------------------------
# Potential correction
# ---------------------------------------------------------------------------


class PotentialOperator:
    """A v = m G_tau(|q|^{1/2} v) on coefficient arrays, with Galerkin products."""

    def __init__(self, q: Potential, params: CarlemanParams):
        self.q = q
        self.params = params
        self.cyl = q.domain.cyl
        self.s = q.abs_sqrt
        self.m = q.m
        self.params_T = replace(params, tau=-params.tau)

    def mult(self, arr: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        base = self.cyl.base
        return base.analyze(arr * base.synthesize(coeffs))

    def G(self, coeffs, transpose: bool = False) -> np.ndarray:
        p = self.params_T if transpose else self.params
        return apply_G_tau(SpectralField(self.cyl, coeffs), p).coeffs

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.mult(self.m, self.G(self.mult(self.s, v)))

    def apply_transpose(self, v: np.ndarray) -> np.ndarray:
        """Bilinear transpose |q|^{1/2} G_{-tau}(m v)."""
        return self.mult(self.s, self.G(self.mult(self.m, v), transpose=True))

    def apply_adjoint(self, v: np.ndarray) -> np.ndarray:
        return self.mult(self.s, self.G(self.mult(np.conj(self.m), v), transpose=True))

    def norm_estimate(self, iters: int = 12, seed: int = 0) -> float:
        """Power iteration for ||A||_{L^2 -> L^2} (trapezoid-weighted in x1)."""
        rng = np.random.default_rng(seed)
        shape = (self.cyl.n_x1, self.cyl.base.J)
        x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        x = self.mult(self.s, x)
        w = self.cyl.x1_weights()[:, None]
        nrm = lambda y: float(np.sqrt(np.sum(w * np.abs(y) ** 2)))
        est = 0.0
        for _ in range(iters):
            n0 = nrm(x)
            if n0 == 0:
                return 0.0
            x = x / n0
            y = self.apply(x)
            est = nrm(y)
            x = self.apply_adjoint(y)
            # adjoint w.r.t. the weighted inner product: trapezoid weights commute
        return est


@dataclass
class NeumannResult:
    v: SpectralField
    n_terms: int
    contraction: float
    increments: list
    norm_estimate: Optional[float] = None


def neumann_solve(q: Potential, tau: float, rhs: SpectralField, params: Optional[CarlemanParams] = None,
                  tol: float = 1e-10, max_terms: int = 400, transpose: bool = False,
                  estimate_norm: bool = False, max_factor: float = 0.9) -> NeumannResult:
    """v = sum_k (-A)^k rhs with A = m G_tau |q|^{1/2} (or its transpose).

    Terms are added until the increment norm drops below tol * ||rhs||. The
    empirical contraction factor is the largest ratio of consecutive increment
    norms after the first term; if it exceeds ``max_factor`` the solve fails.
    """
    params = params or make_params(tau, q.domain.cyl.base)
    cyl = rhs.cyl
    w = cyl.x1_weights()[:, None]
    nrm = lambda y: float(np.sqrt(np.sum(w * np.abs(y) ** 2)))
    if q.is_zero:
        return NeumannResult(SpectralField(cyl, rhs.coeffs.copy()), 1, 0.0, [nrm(rhs.coeffs)])
    op = PotentialOperator(q, params)
    step = op.apply_transpose if transpose else op.apply
    est = op.norm_estimate() if estimate_norm else None
    v = rhs.coeffs.copy()
    term = rhs.coeffs.copy()
    base = nrm(rhs.coeffs)
    incs = [base]
    ratios = []
    for k in range(1, max_terms + 1):
        term = -step(term)
        inc = nrm(term)
        incs.append(inc)
        v = v + term
        if incs[-2] > 0:
            ratios.append(inc / incs[-2])
        if len(ratios) >= 3 and min(ratios[-3:]) > max_factor:
            raise ContractionError(
                f"Neumann series does not contract at tau={tau}: factor {ratios[-1]:.3f} > {max_factor} "
                f"(operator norm estimate {op.norm_estimate():.3f}); increase tau")
        if inc <= tol * base:
            break
    else:
        raise ContractionError(f"Neumann series did not converge in {max_terms} terms at tau={tau}")
    factor = max(ratios[1:]) if len(ratios) > 1 else (ratios[0] if ratios else 0.0)
    if factor > max_factor:
        raise ContractionError(f"empirical contraction factor {factor:.3f} exceeds {max_factor} at tau={tau}")
    return NeumannResult(SpectralField(cyl, v), k + 1, factor, incs, est)


def dense_operator(q: Potential, tau: float, params: Optional[CarlemanParams] = None) -> np.ndarray:
    """Matrix of A on the flattened coefficient space (for small bases only)."""
    params = params or make_params(tau, q.domain.cyl.base)
    op = PotentialOperator(q, params)
    shape = (q.domain.cyl.n_x1, q.domain.cyl.base.J)
    n = shape[0] * shape[1]
    cols = []
    for i in range(n):
        e = np.zeros(n, complex)
        e[i] = 1.0
        cols.append(op.apply(e.reshape(shape)).ravel())
    return np.stack(cols, axis=1)


def build_cgo(q: Potential, ansatz: CgoAnsatz, tau: float, params: Optional[CarlemanParams] = None,
              tol: float = 1e-10, estimate_norm: bool = True) -> CgoSolution:
    """u = u0 + e^{-tau x1} r1 solving (-Delta + q) u = 0 in M, r~ = r0 + r1."""
    domain = q.domain
    params = params or make_params(tau, domain.cyl.base)
    sol = build_free_cgo(domain, ansatz, tau, params)
    cyl = domain.cyl
    if q.is_zero:
        sol.r1 = SpectralField.zeros(cyl)
        sol.v = SpectralField.zeros(cyl)
        nres = NeumannResult(sol.v, 0, 0.0, [0.0], 0.0)
    else:
        op = PotentialOperator(q, params)
        w0 = sol.a_grid() + sol.r0.to_grid()
        rhs = SpectralField(cyl, -cyl.base.analyze(op.m * w0))
        nres = neumann_solve(q, tau, rhs, params, tol=tol, estimate_norm=estimate_norm)
        sol.v = nres.v
        sol.r1 = SpectralField(cyl, op.G(op.mult(op.s, nres.v.coeffs)))
    rt = sol.rtilde
    p = 2 * cyl.n / (cyl.n - 2)
    sol.diagnostics.update({
        "neumann_terms": nres.n_terms,
        "contraction": nres.contraction,
        "operator_norm": nres.norm_estimate,
        "v_L2": nres.v.l2_norm(),
        "r1_L2": domain.norm(sol.r1.to_grid(), 2),
        "rtilde_L2": domain.norm(rt.to_grid(), 2),
        "rtilde_L6": domain.norm(rt.to_grid(), p),
        "residual": cgo_residual(q, sol),
        "q_a_L2": domain.norm(q.values * sol.a_grid(), 2),
    })
    return sol


def cgo_residual(q: Optional[Potential], sol: CgoSolution) -> float:
    """||e^{tau x1}(-Delta + q) e^{-tau x1}(a + r~)||_{L^2(M)}.

    The amplitude part uses the closed form e^{tau x1}(-Delta)e^{-tau x1} a = -f on M;
    the remainder goes through the fourth-order x1 stencil and the spectral Laplacian.
    """
    domain = sol.domain
    base = domain.cyl.base
    phase = np.exp(1j * sol.ansatz.lam * domain.cyl.x1)
    f_exact = phase[:, None, None] * source_closed_form(domain, sol.ansatz, sol.tau)[None]
    res = -conjugated_laplacian(sol.rtilde, sol.tau, check_support=False).to_grid() - f_exact
    if q is not None and not q.is_zero:
        res = res + base.synthesize(base.analyze(q.values * sol.conjugated_grid()))
    return domain.norm(res, 2)


# ---------------------------------------------------------------------------
# Exactly harmonic flat CGOs (Hankel form)
# ---------------------------------------------------------------------------


def hankel2_orders(nmax: int, z: np.ndarray) -> np.ndarray:
    """H_n^(2)(z) for n = 0..nmax by forward recurrence (stable for Hankel functions)."""
    z = np.asarray(z, dtype=complex)
    out = np.empty((nmax + 1,) + z.shape, dtype=complex)
    out[0] = special.hankel2(0, z)
    if nmax >= 1:
        out[1] = special.hankel2(1, z)
    for n in range(1, nmax):
        out[n + 1] = (2 * n / z) * out[n] - out[n - 1]
    return out


def hankel_cgo_pair(r: np.ndarray, theta: np.ndarray, n, lam: float, tau: float):
    """Conjugated profiles of exactly harmonic flat CGOs around a fan center.

    u1 = e^{-sigma x1} c1 H_n^(2)(sigma r) e^{i n theta} with sigma = tau - i lam and
    u2 = e^{tau x1} c2 H_0^(1)(tau r). Returned are the x'-profiles
    P1 = c1 H_n^(2)(sigma r) e^{i n theta}, P2 = c2 H_0^(1)(tau r), so that
    e^{tau x1} u1 = e^{i lam x1} P1 and e^{-tau x1} u2 = P2. The constants make
    P1 ~ e^{-i tau r} r^{-1/2} e^{-lam r} e^{i n theta} and P2 ~ e^{i tau r} r^{-1/2}
    as tau r -> infinity. ``n`` may be an integer or a sequence of integers, in
    which case P1 gets a leading axis over n.
    """
    sigma = tau - 1j * lam
    ns = np.atleast_1d(np.asarray(n, dtype=int))
    H = hankel2_orders(int(np.max(np.abs(ns))), sigma * np.asarray(r))
    Hn = H[np.abs(ns)] * np.where(ns < 0, (-1.0) ** np.abs(ns), 1.0).reshape((-1,) + (1,) * np.ndim(r))
    c1 = np.sqrt(np.pi * sigma / 2) * np.exp(-1j * (ns * np.pi / 2 + np.pi / 4))
    P1 = c1.reshape((-1,) + (1,) * np.ndim(r)) * Hn * np.exp(1j * ns.reshape((-1,) + (1,) * np.ndim(r)) * theta)
    P2 = np.sqrt(np.pi * tau / 2) * np.exp(1j * np.pi / 4) * special.hankel1(0, tau * np.asarray(r))
    if np.ndim(n) == 0:
        P1 = P1[0]
    return P1, P2


# ---------------------------------------------------------------------------
# Reference inputs
# ---------------------------------------------------------------------------


def spiky_potential(domain: CgoDomain, amplitude: float = 24.0, width: float = 0.1,
                    offset=(0.5, 0.3, -0.2)) -> Potential:
    """Narrow Gaussian spike; ||q||_{L^{3/2}} stays O(1) while ||q||_inf is large."""
    c = np.asarray(domain.center, float)
    x0, u0, v0 = offset
    return potential_from_function(domain, lambda x, X, Y: amplitude * np.exp(
        -((x - x0) ** 2 + (X - c[0] - u0) ** 2 + (Y - c[1] - v0) ** 2) / (2 * width * width)))


def reference_ansatz(domain: CgoDomain, lam: float = 0.7, distance: float = 2.1,
                     angle: float = 2.5) -> CgoAnsatz:
    """Fan center at ``distance`` from the disk center, b = 1 + 0.3 e^{i theta}."""
    c = np.asarray(domain.center, float)
    om = tuple(c + distance * np.array([np.cos(angle), np.sin(angle)]))
    return CgoAnsatz(om, lam, (0, 1), (1.0, 0.3))
