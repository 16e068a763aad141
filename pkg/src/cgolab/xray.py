"""Attenuated geodesic ray transform on a simple disk, its adjoint and normal operator.

Rays are stored as a RaySet: starting points on the boundary, inward unit
directions, the weight mu = -<xi, nu>_g and quadrature weights for the
measure d(d SM0) = ds_g(x) d alpha, where alpha is the angle between xi and
the inward normal. The L^2_mu pairing of ray data is sum(weight * mu * T f * h).

On the Euclidean disk lines are handled in closed form; otherwise geodesics
come from the RK4 flow of the geometry module.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse import linalg as spla

from .geometry import GeometryError, SimpleManifold2D


class InversionError(RuntimeError):
    """Conjugate gradients did not reach the requested residual."""


# ---------------------------------------------------------------------------
# Ray sets
# ---------------------------------------------------------------------------


@dataclass
class RaySet:
    """Rays (x, xi) with x on the boundary and xi inward; ``weight`` integrates d(d SM0)."""

    x: np.ndarray
    xi: np.ndarray
    weight: np.ndarray
    mu: np.ndarray
    tau: np.ndarray
    beta: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    shape: Optional[tuple] = None

    @property
    def size(self) -> int:
        return self.x.shape[0]

    def pairing(self, a: np.ndarray, b: np.ndarray) -> complex:
        """(a, b)_{L^2_mu}, bilinear."""
        return np.sum(self.weight * self.mu * a * b)


def _angle_to_direction(man: SimpleManifold2D, x: np.ndarray, beta: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    ang = beta + np.pi + alpha
    return man.unit(x[:, 0], x[:, 1], np.stack([np.cos(ang), np.sin(ang)], axis=1))


def boundary_direction_grid(man: SimpleManifold2D, n_beta: int = 128, n_alpha: int = 64,
                            margin: float = 0.05) -> RaySet:
    """Uniform boundary angles beta times Gauss-Legendre alpha with |cos alpha| >= margin.

    Directions closer to tangential than the margin are dropped without
    reweighting, so integrands that vanish there are integrated exactly.
    """
    a_max = np.arccos(margin)
    s, w = np.polynomial.legendre.leggauss(n_alpha)
    alpha = a_max * s
    w_alpha = a_max * w
    beta = 2 * np.pi * np.arange(n_beta) / n_beta
    B, A = np.meshgrid(beta, alpha, indexing="ij")
    WA = np.broadcast_to(w_alpha, B.shape)
    B, A, WA = B.ravel(), A.ravel(), WA.ravel()
    R = man.radius
    x = R * np.stack([np.cos(B), np.sin(B)], axis=1)
    xi = _angle_to_direction(man, x, B, A)
    ds = np.sqrt(man.c(x[:, 0], x[:, 1])) * R * (2 * np.pi / n_beta)
    tau = man.exit_times(x, xi)
    return RaySet(x, xi, ds * WA, np.cos(A), tau, B, A, (n_beta, n_alpha))


def fan_ray_set(man: SimpleManifold2D, omegas: np.ndarray, thetas: np.ndarray,
                weights: np.ndarray) -> tuple:
    """Rays from fan centers omega (outside the disk) in directions theta, Euclidean disk only.

    Returns (RaySet of the rays that meet the disk, distance from omega to the
    entry point, index of the kept (omega, theta) pairs). ``weights`` is the
    measure of each ray in the Santaló normalization, divided by mu.
    """
    if not man.flat:
        raise NotImplementedError("fan ray sets are implemented for the Euclidean disk")
    omegas = np.atleast_2d(omegas)
    d = np.stack([np.cos(thetas), np.sin(thetas)], axis=-1)
    b = np.sum(omegas * d, axis=1)
    disc = b * b - (np.sum(omegas ** 2, axis=1) - man.radius ** 2)
    keep = np.flatnonzero(disc > 0)
    r_in = -b[keep] - np.sqrt(disc[keep])
    x = omegas[keep] + r_in[:, None] * d[keep]
    nu = x / man.radius
    mu = -np.sum(d[keep] * nu, axis=1)
    tau = 2 * np.sqrt(disc[keep])
    beta = np.arctan2(x[:, 1], x[:, 0]) % (2 * np.pi)
    alpha = np.arctan2(-nu[:, 0] * d[keep, 1] + nu[:, 1] * d[keep, 0], mu)
    rays = RaySet(x, d[keep].copy(), np.asarray(weights)[keep], mu, tau, beta, alpha)
    return rays, r_in, keep


# ---------------------------------------------------------------------------
# Functions on M0
# ---------------------------------------------------------------------------


@dataclass
class ImageGrid:
    """n x n pixel centers on [-R, R]^2; ``mask`` selects centers inside the disk."""

    n: int
    radius: float = 1.0

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.n)

    @property
    def spacing(self) -> float:
        return 2 * self.radius / (self.n - 1)

    @property
    def cell_area(self) -> float:
        return self.spacing ** 2

    def points(self) -> tuple:
        return tuple(np.meshgrid(self.axis, self.axis, indexing="ij"))

    @property
    def mask(self) -> np.ndarray:
        X, Y = self.points()
        return X * X + Y * Y < self.radius ** 2

    def sample(self, f: Callable) -> np.ndarray:
        X, Y = self.points()
        return np.where(self.mask, f(X, Y), 0.0)


@dataclass
class GridFunction:
    """Bilinear interpolant of pixel values, zero outside the grid."""

    grid: ImageGrid
    values: np.ndarray

    def __call__(self, x, y):
        ax = self.grid.axis
        itp = RegularGridInterpolator((ax, ax), self.values, method="linear", bounds_error=False, fill_value=0.0)
        pts = np.stack([np.ravel(x), np.ravel(y)], axis=1)
        return itp(pts).reshape(np.shape(x))


# ---------------------------------------------------------------------------
# Sampling along rays
# ---------------------------------------------------------------------------


@dataclass
class RaySamples:
    """Quadrature nodes along each ray: points[i, k], velocities[i, k], arc length t[i, k], weights[i, k]."""

    points: np.ndarray
    velocities: np.ndarray
    t: np.ndarray
    weights: np.ndarray


def sample_rays(man: SimpleManifold2D, rays: RaySet, h: Optional[float] = None,
                rule: str = "simpson") -> RaySamples:
    """Composite Simpson or trapezoid nodes (flat) or RK4 samples with a trapezoid rule (curved).

    The trapezoid rule is the one to use against piecewise-linear pixel
    interpolants: Simpson's alternating weights alias with the hat functions.
    """
    if man.flat:
        h = 0.02 if h is None else h
        m = max(2, int(np.ceil(np.max(rays.tau) / h / 2)) * 2)
        s = np.linspace(0.0, 1.0, m + 1)
        simpson = np.ones(m + 1)
        if rule == "simpson":
            simpson[1:-1:2] = 4
            simpson[2:-1:2] = 2
            simpson /= 3 * m
        else:
            simpson[[0, -1]] = 0.5
            simpson /= m
        t = rays.tau[:, None] * s[None, :]
        pts = rays.x[:, None, :] + t[..., None] * rays.xi[:, None, :]
        vel = np.broadcast_to(rays.xi[:, None, :], pts.shape)
        return RaySamples(pts, vel, t, rays.tau[:, None] * simpson[None, :])
    h = man.step if h is None else h
    t_exit, S_exit, path = man.shoot(rays.x, rays.xi, h=h, record=True)
    nk = path.shape[0]
    n = rays.size
    tk = np.arange(nk) * h
    inside = tk[None, :] < t_exit[:, None]
    last = np.sum(inside, axis=1) - 1
    rem = t_exit - tk[last]
    w = np.where(inside, h, 0.0)
    w[:, 0] = 0.5 * h
    idx = np.arange(n)
    w[idx, last] = np.where(last > 0, 0.5 * h, 0.0) + 0.5 * rem
    pts = np.concatenate([np.transpose(path[:, :2, :], (2, 0, 1)), S_exit[:2].T[:, None, :]], axis=1)
    vel = np.concatenate([np.transpose(path[:, 2:4, :], (2, 0, 1)), S_exit[2:4].T[:, None, :]], axis=1)
    t = np.concatenate([np.broadcast_to(tk, (n, nk)), t_exit[:, None]], axis=1)
    w = np.concatenate([w, 0.5 * rem[:, None]], axis=1)
    return RaySamples(pts, vel, t, w)


@dataclass
class RayTransformData:
    rays: RaySet
    values: np.ndarray
    lam: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["beta", "alpha", "value_re", "value_im"])
            for b, a, v in zip(self.rays.beta, self.rays.alpha, self.values):
                v = complex(v)
                wr.writerow([repr(float(b)), repr(float(a)), repr(v.real), repr(v.imag)])


def ray_transform(man: SimpleManifold2D, f: Callable, lam: float, rays: RaySet,
                  h: Optional[float] = None, samples: Optional[RaySamples] = None) -> RayTransformData:
    """T_lam f(x, xi) = int_0^tau f(gamma(t)) e^{-lam t} dt; f is a callable (x, y) or GridFunction."""
    smp = samples or sample_rays(man, rays, h)
    vals = f(smp.points[..., 0], smp.points[..., 1])
    out = np.sum(smp.weights * np.exp(-lam * smp.t) * vals, axis=1)
    return RayTransformData(rays, out, lam)


# ---------------------------------------------------------------------------
# Adjoint
# ---------------------------------------------------------------------------


def _trace_back(man: SimpleManifold2D, X: np.ndarray, V: np.ndarray):
    """Exit time, exit point and exit velocity of the geodesics from X along V."""
    if man.flat:
        tau = man.exit_times(X, V)
        return tau, X + tau[:, None] * V, V
    t, S = man.shoot(X, V)
    return t, S[:2].T, S[2:4].T


def entry_coordinates(man: SimpleManifold2D, X: np.ndarray, xi: np.ndarray):
    """(beta, alpha, tau(x, -xi)) of the boundary point where the geodesic through (x, xi) enters."""
    t_back, Y, Vy = _trace_back(man, X, -xi)
    beta = np.arctan2(Y[:, 1], Y[:, 0]) % (2 * np.pi)
    inward = -Vy
    ang = np.arctan2(inward[:, 1], inward[:, 0])
    alpha = (ang - beta - np.pi + np.pi) % (2 * np.pi) - np.pi
    return beta, alpha, t_back


def data_interpolator(data: RayTransformData) -> Callable:
    """Cubic interpolant h(beta, alpha) of data on a boundary_direction_grid (0 outside the alpha range)."""
    rays = data.rays
    if rays.shape is None:
        raise ValueError("interpolation needs data on a boundary_direction_grid")
    nb, na = rays.shape
    beta = rays.beta.reshape(nb, na)[:, 0]
    alpha = rays.alpha.reshape(nb, na)[0]
    vals = np.asarray(data.values).reshape(nb, na)
    pad = 3
    bb = np.concatenate([beta[-pad:] - 2 * np.pi, beta, beta[:pad] + 2 * np.pi])
    vv = np.concatenate([vals[-pad:], vals, vals[:pad]])
    itp = RegularGridInterpolator((bb, alpha), vv, method="cubic", bounds_error=False, fill_value=0.0)

    def h(b, a):
        pts = np.stack([np.ravel(b) % (2 * np.pi), np.ravel(a)], axis=1)
        return itp(pts).reshape(np.shape(b))

    return h


def adjoint_ray_transform(man: SimpleManifold2D, h: Union[Callable, RayTransformData], lam: float,
                          X: np.ndarray, n_xi: int = 256, chunk: int = 20000) -> np.ndarray:
    """T_lam^* h(x) = int_{S_x} e^{-lam tau(x, -xi)} h(entry(x, xi)) dS_x(xi) at points X (m x 2)."""
    hf = data_interpolator(h) if isinstance(h, RayTransformData) else h
    X = np.atleast_2d(np.asarray(X, float))
    phi = 2 * np.pi * np.arange(n_xi) / n_xi
    out = np.zeros(X.shape[0], dtype=complex)
    step = max(1, chunk // n_xi)
    for s in range(0, X.shape[0], step):
        Xs = X[s:s + step]
        P = np.repeat(Xs, n_xi, axis=0)
        ang = np.tile(phi, Xs.shape[0])
        V = man.unit(P[:, 0], P[:, 1], np.stack([np.cos(ang), np.sin(ang)], axis=1))
        beta, alpha, tb = entry_coordinates(man, P, V)
        vals = np.exp(-lam * tb) * hf(beta, alpha)
        out[s:s + step] = vals.reshape(Xs.shape[0], n_xi).sum(axis=1) * (2 * np.pi / n_xi)
    return out if np.iscomplexobj(out) and np.any(out.imag) else out.real


def disk_quadrature(man: SimpleManifold2D, n_r: int = 48, n_theta: int = 96) -> tuple:
    """Polar Gauss-Legendre x uniform nodes with weights for dV_g on the disk."""
    s, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * man.radius * (s + 1)
    wr = 0.5 * man.radius * w * r
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    Rr, T = np.meshgrid(r, th, indexing="ij")
    W = (wr[:, None] * np.full(n_theta, 2 * np.pi / n_theta)[None, :])
    x, y = (Rr * np.cos(T)).ravel(), (Rr * np.sin(T)).ravel()
    return x, y, W.ravel() * man.c(x, y)


# ---------------------------------------------------------------------------
# Santaló formula
# ---------------------------------------------------------------------------


def santalo_integral(man: SimpleManifold2D, F: Callable, rays: RaySet, h: Optional[float] = None) -> float:
    """int_{d+ SM0} int_0^tau F(phi_t(x, xi)) mu dt d(d SM0); F takes (x, y, vx, vy) with unit g-velocity."""
    smp = sample_rays(man, rays, h)
    vals = F(smp.points[..., 0], smp.points[..., 1], smp.velocities[..., 0], smp.velocities[..., 1])
    inner = np.sum(smp.weights * vals, axis=1)
    return float(np.sum(rays.weight * rays.mu * inner))


def sphere_bundle_integral(man: SimpleManifold2D, F: Callable, n_r: int = 48, n_theta: int = 96,
                           n_xi: int = 64) -> float:
    """Direct int_{SM0} F dV_g dS_x by polar quadrature in x and a uniform fiber grid."""
    x, y, w = disk_quadrature(man, n_r, n_theta)
    phi = 2 * np.pi * np.arange(n_xi) / n_xi
    tot = 0.0
    cs = 1.0 / np.sqrt(man.c(x, y))
    for p in phi:
        tot += float(np.sum(w * F(x, y, cs * np.cos(p), cs * np.sin(p))))
    return tot * 2 * np.pi / n_xi


# ---------------------------------------------------------------------------
# Kernel of the normal operator
# ---------------------------------------------------------------------------


@dataclass
class ConnectingGeodesic:
    direction: np.ndarray
    length: float
    jacobi: float
    arrival: np.ndarray


def _flow_to(man: SimpleManifold2D, x, v, s: float, h: float):
    n = max(1, int(np.ceil(s / h)))
    S = man.initial_state(x, v)
    for _ in range(n):
        S = man.rk4(S, s / n)
    return S[:, 0]


def connecting_geodesic(man: SimpleManifold2D, x, y, tol: float = 1e-8, max_iter: int = 30) -> ConnectingGeodesic:
    """Unit initial direction at x, distance and normal Jacobi field of the geodesic from x to y.

    Euclidean metrics are closed form. Otherwise Newton iterates on (angle,
    length) using d(endpoint)/d(length) = velocity and
    d(endpoint)/d(angle) = J times the unit normal.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if man.flat:
        d = y - x
        L = float(np.linalg.norm(d))
        return ConnectingGeodesic(d / L, L, L, d / L)
    d = y - x
    ang = np.arctan2(d[1], d[0])
    s = float(np.sqrt(man.c(*(0.5 * (x + y)))) * np.linalg.norm(d))
    h = man.step
    for _ in range(max_iter):
        v = man.unit(x[0], x[1], np.array([np.cos(ang), np.sin(ang)]))
        S = _flow_to(man, x, v, s, h)
        err = S[:2] - y
        vel = S[2:4]
        cz = man.c(S[0], S[1])
        nrm = np.array([-vel[1], vel[0]])  # unit normal in g (rotation preserves g-length)
        Jm = np.column_stack([vel, S[4] * nrm])
        step = np.linalg.solve(Jm, -err)
        s += step[0]
        ang += step[1]
        if np.sqrt(cz) * np.linalg.norm(err) < tol:
            break
    else:
        raise GeometryError("shooting for the connecting geodesic did not converge")
    v = man.unit(x[0], x[1], np.array([np.cos(ang), np.sin(ang)]))
    S = _flow_to(man, x, v, s, h)
    return ConnectingGeodesic(v, s, float(S[4]), S[2:4])


def kernel_K_lambda(man: SimpleManifold2D, x, y, lam: float, measure: str = "volume") -> float:
    """K_lam(x, y) = (e^{-lam phi_+} + e^{-lam phi_-}) / J(x, y) against dV_g(y).

    phi_+ = 2 tau(x, -eta) + d and phi_- = 2 tau(x, eta) - d, where eta is the
    unit direction at x of the geodesic to y, d its length and J the normal
    Jacobi field at y (|x - y| in the Euclidean case). With
    measure="lebesgue" the kernel is taken against dy instead.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if np.allclose(x, y):
        raise ValueError("the kernel is singular on the diagonal")
    g = connecting_geodesic(man, x, y)
    tp = man.exit_times(x[None], -g.direction[None])[0]
    tm = man.exit_times(x[None], g.direction[None])[0]
    phi_p = 2 * tp + g.length
    phi_m = 2 * tm - g.length
    K = (np.exp(-lam * phi_p) + np.exp(-lam * phi_m)) / g.jacobi
    if measure == "lebesgue":
        K *= man.c(y[0], y[1])
    return float(K)


# ---------------------------------------------------------------------------
# Discrete operator and inversion
# ---------------------------------------------------------------------------


def _bilinear_matrix(grid: ImageGrid, pts: np.ndarray, w: np.ndarray, rows: np.ndarray):
    ax0 = -grid.radius
    hh = grid.spacing
    u = (pts[:, 0] - ax0) / hh
    v = (pts[:, 1] - ax0) / hh
    i0 = np.floor(u).astype(np.int64)
    j0 = np.floor(v).astype(np.int64)
    fu, fv = u - i0, v - j0
    R, C, V = [], [], []
    for di, dj, ww in ((0, 0, (1 - fu) * (1 - fv)), (1, 0, fu * (1 - fv)), (0, 1, (1 - fu) * fv), (1, 1, fu * fv)):
        ii, jj = i0 + di, j0 + dj
        ok = (ii >= 0) & (ii < grid.n) & (jj >= 0) & (jj < grid.n)
        R.append(rows[ok])
        C.append(ii[ok] * grid.n + jj[ok])
        V.append((w * ww)[ok])
    return np.concatenate(R), np.concatenate(C), np.concatenate(V)


class DiscreteRayOperator:
    """Sparse T_lam acting on pixel values inside the disk (bilinear interpolation along rays).

    The adjoint is taken with respect to the pixel-area inner product, so the
    normal operator is A = T^t W T / cell_area with W = weight * mu.
    """

    def __init__(self, man: SimpleManifold2D, grid: ImageGrid, rays: RaySet, lam: float,
                 h: Optional[float] = None):
        self.man, self.grid, self.rays, self.lam = man, grid, rays, lam
        smp = sample_rays(man, rays, h if h is not None else (grid.spacing / 3 if man.flat else None), rule="trapezoid")
        nr, nk = smp.t.shape
        rows = np.repeat(np.arange(nr), nk)
        w = (smp.weights * np.exp(-lam * smp.t)).ravel()
        R, C, V = _bilinear_matrix(grid, smp.points.reshape(-1, 2), w, rows)
        mask = grid.mask.ravel()
        self.cols = np.flatnonzero(mask)
        remap = -np.ones(grid.n * grid.n, dtype=np.int64)
        remap[self.cols] = np.arange(self.cols.size)
        keep = remap[C] >= 0
        self.T = sparse.csr_matrix((V[keep], (R[keep], remap[C[keep]])), shape=(nr, self.cols.size))
        self.W = rays.weight * rays.mu

    @property
    def n_unknowns(self) -> int:
        return self.cols.size

    def to_image(self, vec: np.ndarray) -> np.ndarray:
        img = np.zeros(self.grid.n * self.grid.n, dtype=np.result_type(vec, float))
        img[self.cols] = vec
        return img.reshape(self.grid.n, self.grid.n)

    def from_image(self, img: np.ndarray) -> np.ndarray:
        return np.asarray(img).ravel()[self.cols]

    def forward(self, vec: np.ndarray) -> np.ndarray:
        return self.T @ vec

    def adjoint(self, data: np.ndarray) -> np.ndarray:
        return (self.T.T @ (self.W * data)) / self.grid.cell_area

    def normal(self, vec: np.ndarray) -> np.ndarray:
        return self.adjoint(self.forward(vec))

    def dense_normal(self) -> np.ndarray:
        Tw = self.T.multiply(np.sqrt(self.W)[:, None]).tocsc()
        return (Tw.T @ Tw).toarray() / self.grid.cell_area


@dataclass
class NormalOperatorMatrix:
    matrix: np.ndarray
    lam: float
    symmetry_defect: float
    eigenvalues: np.ndarray

    @property
    def condition_number(self) -> float:
        ev = self.eigenvalues
        return float(ev[-1] / max(ev[0], 1e-300))


def normal_operator(man: SimpleManifold2D, lam: float, grid: ImageGrid, rays: Optional[RaySet] = None,
                    h: Optional[float] = None) -> NormalOperatorMatrix:
    rays = rays or boundary_direction_grid(man)
    A = DiscreteRayOperator(man, grid, rays, lam, h).dense_normal()
    sym = float(np.linalg.norm(A - A.T) / np.linalg.norm(A))
    ev = np.linalg.eigvalsh(0.5 * (A + A.T))
    return NormalOperatorMatrix(A, lam, sym, ev)


@dataclass
class InversionResult:
    image: np.ndarray
    iterations: int
    residual: float
    converged: bool


def conjugate_gradient(apply: Callable, b: np.ndarray, tol: float = 1e-8, max_iter: Optional[int] = None,
                       inner: Optional[Callable] = None) -> tuple:
    """Plain CG for a Hermitian positive definite operator; returns (x, iterations, relative residual)."""
    inner = inner or (lambda a, c: np.vdot(a, c))
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = inner(r, r).real
    b_norm = np.sqrt(rr)
    max_iter = max_iter or 10 * b.size
    if b_norm == 0:
        return x, 0, 0.0
    it = 0
    for it in range(1, max_iter + 1):
        Ap = apply(p)
        a = rr / inner(p, Ap).real
        x = x + a * p
        r = r - a * Ap
        rr_new = inner(r, r).real
        if np.sqrt(rr_new) <= tol * b_norm:
            rr = rr_new
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x, it, float(np.sqrt(rr) / b_norm)


def invert_normal(op: DiscreteRayOperator, data: np.ndarray, ridge: float = 1e-6, tol: float = 1e-8,
                  raise_on_failure: bool = False) -> InversionResult:
    """Solve (A + ridge I) f = T^* data by CG (iteration cap 10 x unknowns)."""
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    rhs = op.adjoint(np.asarray(data))
    x, it, res = conjugate_gradient(lambda v: op.normal(v) + ridge * v, rhs, tol, 10 * rhs.size)
    ok = res <= tol
    if not ok and raise_on_failure:
        raise InversionError(f"CG stopped at relative residual {res:.2e} after {it} iterations")
    return InversionResult(op.to_image(x), it, res, ok)


def plane_wave_quotients(op: DiscreteRayOperator, kappas: Sequence[float], width: float = 0.45) -> np.ndarray:
    """Rayleigh quotients <f, A f>/<f, f> for windowed plane waves cos(kappa x) w(x)."""
    X, Y = op.grid.points()
    win = np.exp(-(X * X + Y * Y) / (2 * width ** 2)) * op.grid.mask
    out = []
    for k in kappas:
        f = op.from_image(win * np.cos(k * X))
        out.append(float(np.dot(f, op.normal(f)) / np.dot(f, f)))
    return np.array(out)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def condition_sweep(man: SimpleManifold2D, lams: Sequence[float], grid: ImageGrid,
                    rays: Optional[RaySet] = None) -> list:
    rays = rays or boundary_direction_grid(man)
    return [(float(l), normal_operator(man, l, grid, rays).condition_number) for l in lams]
