"""Geometric substrate: torus eigenbases, product cylinders, simple 2D manifolds.

Base manifolds come in two flavours. The flat torus carries an explicit
spectrum and is used for everything that needs eigenfunctions. Disk-type
manifolds with a conformal metric ``c(x) |dx|^2`` carry the geodesic flow,
Jacobi fields and polar normal (fan) coordinates used by the ray transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.integrate import quad
from scipy.optimize import brentq


class GeometryError(RuntimeError):
    """Raised for invalid geometric input or failed geodesic integration."""


# ---------------------------------------------------------------------------
# Flat torus eigenbasis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenBasis:
    """Ordered eigenpairs of -Delta on a flat torus.

    ``kvecs[j]`` is the integer frequency vector of mode ``j``; the mode is
    ``exp(2 pi i k.x / L) / sqrt(area)``. Functions are sampled on a uniform
    grid of shape ``grid_shape`` with equal quadrature weights.
    """

    side_lengths: tuple
    eigenvalues: np.ndarray
    kvecs: np.ndarray
    grid_shape: tuple
    max_cluster: int

    @property
    def dim(self) -> int:
        return len(self.side_lengths)

    @property
    def J(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def area(self) -> float:
        return float(np.prod(self.side_lengths))

    @property
    def cell_weight(self) -> float:
        """Quadrature weight of one base grid point."""
        return self.area / float(np.prod(self.grid_shape))

    @property
    def sqrt_eigenvalues(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    def grid_axes(self) -> list:
        return [np.arange(n) * (L / n) for n, L in zip(self.grid_shape, self.side_lengths)]

    def grid_points(self) -> tuple:
        return tuple(np.meshgrid(*self.grid_axes(), indexing="ij"))

    def _flat_index(self) -> tuple:
        return tuple(np.mod(self.kvecs[:, i], self.grid_shape[i]) for i in range(self.dim))

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Evaluate sum_j c_j psi_j on the grid; ``coeffs`` has modes on the last axis."""
        coeffs = np.asarray(coeffs)
        lead = coeffs.shape[:-1]
        full = np.zeros(lead + tuple(self.grid_shape), dtype=complex)
        full[(Ellipsis,) + self._flat_index()] = coeffs
        axes = tuple(range(len(lead), len(lead) + self.dim))
        scale = np.prod(self.grid_shape) / np.sqrt(self.area)
        return sfft.ifftn(full, axes=axes) * scale

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Quadrature inner products <u, psi_j> for grid samples ``values``."""
        values = np.asarray(values)
        lead = values.shape[: values.ndim - self.dim]
        axes = tuple(range(len(lead), len(lead) + self.dim))
        spec = sfft.fftn(values, axes=axes)
        return spec[(Ellipsis,) + self._flat_index()] * (np.sqrt(self.area) / np.prod(self.grid_shape))

    def evaluate(self, j: int) -> np.ndarray:
        """Sample mode ``j`` on the grid."""
        phase = sum(2j * np.pi * self.kvecs[j, i] * X / self.side_lengths[i]
                    for i, X in enumerate(self.grid_points()))
        return np.exp(phase) / np.sqrt(self.area)

    def orthonormality_defect(self, modes: Optional[Sequence[int]] = None) -> float:
        """max |<psi_i, psi_j> - delta_ij| by direct quadrature."""
        idx = np.arange(self.J) if modes is None else np.asarray(modes)
        Psi = np.stack([self.evaluate(j).ravel() for j in idx], axis=1)
        G = (Psi.conj().T @ Psi) * self.cell_weight
        return float(np.max(np.abs(G - np.eye(len(idx)))))

    def eigen_residual(self, modes: Optional[Sequence[int]] = None) -> float:
        """max_j ||-Delta psi_j - lambda_j psi_j||, with -Delta applied spectrally on the grid."""
        idx = np.arange(self.J) if modes is None else np.asarray(modes)
        freqs = [2 * np.pi * sfft.fftfreq(n, d=L / n) for n, L in zip(self.grid_shape, self.side_lengths)]
        K2 = sum(F ** 2 for F in np.meshgrid(*freqs, indexing="ij"))
        worst = 0.0
        for j in idx:
            psi = self.evaluate(j)
            lap = sfft.ifftn(K2 * sfft.fftn(psi))
            res = np.sqrt(np.sum(np.abs(lap - self.eigenvalues[j] * psi) ** 2) * self.cell_weight)
            worst = max(worst, float(res))
        return worst

    def laplacian_grid(self, values: np.ndarray) -> np.ndarray:
        """Spectral -Delta of grid samples (acts on the trailing ``dim`` axes)."""
        values = np.asarray(values)
        lead = values.ndim - self.dim
        axes = tuple(range(lead, values.ndim))
        freqs = [2 * np.pi * sfft.fftfreq(n, d=L / n) for n, L in zip(self.grid_shape, self.side_lengths)]
        K2 = sum(F ** 2 for F in np.meshgrid(*freqs, indexing="ij"))
        return sfft.ifftn(K2 * sfft.fftn(values, axes=axes), axes=axes)


def build_flat_torus_basis(side_lengths, max_cluster: int, grid_shape=None,
                           oversample: float = 1.0) -> EigenBasis:
    """All torus modes with sqrt(lambda) < max_cluster + 1, sorted by (lambda, k).

    ``grid_shape`` defaults to the smallest even sizes that sample every
    retained mode without aliasing, optionally scaled by ``oversample``.
    """
    L = np.atleast_1d(np.asarray(side_lengths, dtype=float))
    if np.any(L <= 0) or not np.all(np.isfinite(L)):
        raise ValueError("side lengths must be positive")
    if int(max_cluster) < 1:
        raise ValueError("max_cluster must be >= 1")
    bound = float(max_cluster) + 1.0
    kmax = np.floor(bound * L / (2 * np.pi)).astype(int)
    ranges = [np.arange(-k, k + 1) for k in kmax]
    K = np.stack([g.ravel() for g in np.meshgrid(*ranges, indexing="ij")], axis=1)
    lam = np.sum((2 * np.pi * K / L) ** 2, axis=1)
    keep = np.sqrt(lam) < bound
    K, lam = K[keep], lam[keep]
    # round before sorting so that mathematically equal eigenvalues tie exactly
    key_lam = np.round(lam, 9)
    order = np.lexsort(tuple(K[:, i] for i in range(K.shape[1] - 1, -1, -1)) + (key_lam,))
    K, lam = K[order], lam[order]
    if grid_shape is None:
        need = 2 * np.max(np.abs(K), axis=0) + 2
        grid_shape = tuple(int(2 * np.ceil(oversample * n / 2)) for n in need)
    grid_shape = tuple(int(n) for n in np.atleast_1d(grid_shape))
    if len(grid_shape) != L.size:
        raise ValueError("grid_shape must match the torus dimension")
    return EigenBasis(tuple(float(x) for x in L), lam, K, grid_shape, int(max_cluster))


@dataclass(frozen=True)
class ProductCylinder:
    """The product I x M0 with metric e (+) g0, sampled on a uniform x1 grid."""

    interval: tuple
    base: EigenBasis
    n_x1: int

    def __post_init__(self):
        a, b = self.interval
        if not b > a:
            raise ValueError("interval must have positive length")
        if self.n_x1 < 5:
            raise ValueError("need at least 5 x1 grid points")

    @property
    def n(self) -> int:
        return 1 + self.base.dim

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(self.interval[0], self.interval[1], self.n_x1)

    @property
    def h1(self) -> float:
        return (self.interval[1] - self.interval[0]) / (self.n_x1 - 1)

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    def x1_weights(self) -> np.ndarray:
        """Trapezoid weights on the x1 grid."""
        w = np.full(self.n_x1, self.h1)
        w[0] = w[-1] = 0.5 * self.h1
        return w


# ---------------------------------------------------------------------------
# Simple 2D manifolds with conformal metrics
# ---------------------------------------------------------------------------


def _euclidean_factor(x, y):
    one = np.ones_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float))
    zero = np.zeros_like(one)
    return one, zero, zero, zero


def gaussian_bump_factor(amplitude: float, center=(0.0, 0.0), width: float = 0.5) -> Callable:
    """Conformal factor c = 1 + A exp(-|x - x0|^2 / (2 w^2)).

    Returns a function giving (c, dc/dx, dc/dy, Laplacian of log c).
    """
    x0, y0 = center
    w2 = width * width

    def factor(x, y):
        dx, dy = x - x0, y - y0
        e = amplitude * np.exp(-(dx * dx + dy * dy) / (2 * w2))
        c = 1.0 + e
        cx, cy = -e * dx / w2, -e * dy / w2
        lap_c = e * ((dx * dx + dy * dy) / (w2 * w2) - 2.0 / w2)
        lap_logc = lap_c / c - (cx * cx + cy * cy) / (c * c)
        return c, cx, cy, lap_logc

    return factor


@dataclass(frozen=True)
class SimpleManifold2D:
    """Disk of radius ``radius`` with metric c(x)|dx|^2.

    ``factor(x, y)`` returns (c, c_x, c_y, Laplacian of log c). Geodesics are
    integrated with a fixed-step classical RK4 scheme of step ``step``.
    """

    radius: float = 1.0
    factor: Callable = _euclidean_factor
    step: float = 1e-2
    max_length: float = 20.0
    name: str = "euclidean"
    flat: bool = True

    # metric pieces ---------------------------------------------------------
    def c(self, x, y):
        return self.factor(x, y)[0]

    def metric(self, x, y) -> np.ndarray:
        c = self.c(x, y)
        g = np.zeros(np.shape(c) + (2, 2))
        g[..., 0, 0] = c
        g[..., 1, 1] = c
        return g

    def christoffel(self, x, y) -> np.ndarray:
        """Gamma^k_ij for g = e^{2 phi} delta, phi = log(c)/2; array [..., k, i, j]."""
        c, cx, cy, _ = self.factor(x, y)
        d = [cx / (2 * c), cy / (2 * c)]
        G = np.zeros(np.shape(c) + (2, 2, 2))
        for k in range(2):
            for i in range(2):
                for j in range(2):
                    val = (d[j] if i == k else 0) + (d[i] if j == k else 0) - (d[k] if i == j else 0)
                    G[..., k, i, j] = val
        return G

    def gauss_curvature(self, x, y):
        c, _, _, lap_logc = self.factor(x, y)
        return -lap_logc / (2 * c)

    def rho(self, x, y):
        """Boundary defining function, positive inside."""
        return self.radius ** 2 - x * x - y * y

    def outward_normal(self, x, y):
        r = np.hypot(x, y)
        return np.stack([x / r, y / r], axis=-1)

    def enlarged(self, factor: float = 1.5) -> "SimpleManifold2D":
        return SimpleManifold2D(self.radius * factor, self.factor, self.step, self.max_length,
                                self.name, self.flat)

    def unit(self, x, y, direction) -> np.ndarray:
        """Scale a coordinate vector to unit g-length at (x, y)."""
        direction = np.asarray(direction, dtype=float)
        nrm = np.sqrt(self.c(x, y)) * np.linalg.norm(direction, axis=-1)
        return direction / nrm[..., None] if np.ndim(nrm) else direction / nrm

    # flow -----------------------------------------------------------------
    def _rhs(self, S):
        x, y, vx, vy, J, dJ = S
        c, cx, cy, lap_logc = self.factor(x, y)
        px, py = cx / (2 * c), cy / (2 * c)
        dot = px * vx + py * vy
        v2 = vx * vx + vy * vy
        K = -lap_logc / (2 * c)
        return np.stack([vx, vy, -2 * dot * vx + v2 * px, -2 * dot * vy + v2 * py, dJ, -K * J])

    def rk4(self, S, h):
        k1 = self._rhs(S)
        k2 = self._rhs(S + 0.5 * h * k1)
        k3 = self._rhs(S + 0.5 * h * k2)
        k4 = self._rhs(S + h * k3)
        return S + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def initial_state(self, X, V) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        V = np.atleast_2d(np.asarray(V, dtype=float))
        X, V = np.broadcast_arrays(X, V)
        n = X.shape[0]
        return np.stack([X[:, 0], X[:, 1], V[:, 0], V[:, 1], np.zeros(n), np.ones(n)])

    def shoot(self, X, V, rho: Optional[Callable] = None, h: Optional[float] = None,
              record: bool = False, max_length: Optional[float] = None):
        """Integrate unit-speed geodesics until each leaves {rho > 0}.

        Rays start at points with rho >= 0. Returns exit times and exit states
        (6 x n), plus the sampled states (steps x 6 x n) when ``record``.
        The crossing is located by bisection on the length of the last step.
        """
        rho = rho or self.rho
        h = self.step if h is None else h
        max_length = self.max_length if max_length is None else max_length
        S = self.initial_state(X, V)
        n = S.shape[1]
        t_exit = np.full(n, np.nan)
        S_exit = np.zeros_like(S)
        active = np.ones(n, dtype=bool)
        path = [S.copy()] if record else None
        t = 0.0
        nsteps = int(np.ceil(max_length / h))
        for _ in range(nsteps):
            Sn = self.rk4(S, h)
            out = active & (rho(Sn[0], Sn[1]) < 0)
            if np.any(out):
                idx = np.nonzero(out)[0]
                s_exit, St = self._bisect_crossing(S[:, idx], h, rho)
                t_exit[idx] = t + s_exit
                S_exit[:, idx] = St
                active[idx] = False
            S = Sn
            t += h
            if record:
                path.append(S.copy())
            if not np.any(active):
                break
        if np.any(active):
            raise GeometryError("geodesic exceeded max length; metric not simple or step too large")
        if record:
            return t_exit, S_exit, np.array(path)
        return t_exit, S_exit

    def _bisect_crossing(self, S, h, rho, iters: int = 60):
        lo = np.zeros(S.shape[1])
        hi = np.full(S.shape[1], h)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            Sm = self.rk4(S, mid)
            inside = rho(Sm[0], Sm[1]) >= 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        s = 0.5 * (lo + hi)
        return s, self.rk4(S, s)

    def exit_times(self, X, V) -> np.ndarray:
        """tau(x, xi) for unit vectors V at points X (closed form when flat)."""
        X = np.atleast_2d(X)
        V = np.atleast_2d(V)
        if self.flat:
            b = np.sum(X * V, axis=1)
            disc = b * b + self.radius ** 2 - np.sum(X * X, axis=1)
            return -b + np.sqrt(np.maximum(disc, 0.0))
        return self.shoot(X, V)[0]

    # checks ---------------------------------------------------------------
    def boundary_curvature(self, n: int = 256) -> np.ndarray:
        """Geodesic curvature of the boundary circle (positive means strictly convex)."""
        b = np.linspace(0, 2 * np.pi, n, endpoint=False)
        x, y = self.radius * np.cos(b), self.radius * np.sin(b)
        c, cx, cy, _ = self.factor(x, y)
        dphi_dnu = (cx * np.cos(b) + cy * np.sin(b)) / (2 * c)
        return (1.0 / self.radius + dphi_dnu) / np.sqrt(c)

    def check_simple(self, n_points: int = 8, n_dirs: int = 16) -> dict:
        """Boundary convexity plus a Jacobi-field conjugate-point scan."""
        kappa = self.boundary_curvature()
        b = np.linspace(0, 2 * np.pi, n_points, endpoint=False)
        a = np.linspace(-1.4, 1.4, n_dirs)
        B, A = np.meshgrid(b, a, indexing="ij")
        X = self.radius * np.stack([np.cos(B.ravel()), np.sin(B.ravel())], axis=1)
        ang = B.ravel() + np.pi + A.ravel()
        V = self.unit(X[:, 0], X[:, 1], np.stack([np.cos(ang), np.sin(ang)], axis=1))
        t_exit, _, path = self.shoot(X, V, record=True)
        J = path[:, 4, :]
        steps = np.arange(path.shape[0])[:, None] * self.step
        interior = (steps > 0) & (steps <= t_exit[None, :])
        min_J = float(np.min(np.where(interior, J, np.inf)))
        return {"min_boundary_curvature": float(np.min(kappa)), "min_jacobi": min_J,
                "simple": bool(np.min(kappa) > 0 and min_J > 0)}


def euclidean_disk(radius: float = 1.0, step: float = 1e-2) -> SimpleManifold2D:
    return SimpleManifold2D(radius=radius, step=step)


def bump_disk(amplitude: float = 0.3, center=(0.2, 0.1), width: float = 0.4,
              radius: float = 1.0, step: float = 1e-2) -> SimpleManifold2D:
    """Unit disk with a mild Gaussian conformal bump."""
    return SimpleManifold2D(radius=radius, factor=gaussian_bump_factor(amplitude, center, width),
                            step=step, name="gaussian_bump", flat=False)


@dataclass
class GeodesicPath:
    points: np.ndarray
    velocities: np.ndarray
    times: np.ndarray
    exit_time: float
    exit_point: np.ndarray
    jacobi: np.ndarray


def integrate_geodesic(man: SimpleManifold2D, x, xi, h: Optional[float] = None) -> GeodesicPath:
    """Sampled unit-speed geodesic from (x, xi) to its first boundary crossing."""
    h = man.step if h is None else float(h)
    if h <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    speed = np.sqrt(man.c(x[0], x[1])) * np.linalg.norm(xi)
    if abs(speed - 1.0) > 1e-9:
        raise ValueError("xi must be a unit vector for the metric")
    if man.rho(x[0], x[1]) < -1e-12:
        raise ValueError("start point outside the manifold")
    t_exit, S_exit, path = man.shoot(x[None, :], xi[None, :], h=h, record=True)
    te = float(t_exit[0])
    times = np.arange(path.shape[0]) * h
    keep = times < te
    P = path[keep, :, 0]
    return GeodesicPath(P[:, :2], P[:, 2:4], times[keep], te, S_exit[:2, 0], P[:, 4])


def unit_speed_defect(man: SimpleManifold2D, path: GeodesicPath) -> float:
    c = man.c(path.points[:, 0], path.points[:, 1])
    return float(np.max(np.abs(c * np.sum(path.velocities ** 2, axis=1) - 1.0)))


# ---------------------------------------------------------------------------
# Polar normal coordinates (fans)
# ---------------------------------------------------------------------------


@dataclass
class FanCoordinates:
    """Geodesic fan from a center omega outside the working disk.

    Each ray is sampled at arc length steps ``h`` out to the boundary of the
    enlarged manifold; ``states[k, :, i]`` is (x, y, vx, vy, J, J') at
    r = k h on ray i. ``J`` is the normal Jacobi field, so dV = J dr dtheta
    and the |g|^{1/4} factor of the amplitude is sqrt(J).
    """

    manifold: SimpleManifold2D
    enlarged: SimpleManifold2D
    omega: np.ndarray
    theta: np.ndarray
    theta_weights: np.ndarray
    theta_range: tuple
    h: float
    states: np.ndarray
    r_in: np.ndarray
    r_out: np.ndarray
    r_end: np.ndarray

    def _interp(self, i, r):
        """Cubic Hermite interpolation of the state along ray i at arc length r."""
        r = np.asarray(r, dtype=float)
        k = np.clip(np.floor(r / self.h).astype(int), 0, self.states.shape[0] - 2)
        s = (r - k * self.h) / self.h
        S0, S1 = self.states[k, :, i], self.states[k + 1, :, i]
        # derivatives: x' = v, v' from the ODE, J' stored
        D0 = self.enlarged._rhs(S0.T).T
        D1 = self.enlarged._rhs(S1.T).T
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return (h00[:, None] * S0 + h10[:, None] * self.h * D0 + h01[:, None] * S1
                + h11[:, None] * self.h * D1)

    def fan_to_point(self, r, theta) -> np.ndarray:
        """Map (r, theta) to a point by integrating the ray from omega."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        r, theta = np.broadcast_arrays(r, theta)
        man = self.enlarged
        V = man.unit(self.omega[0], self.omega[1], np.stack([np.cos(theta), np.sin(theta)], axis=1))
        S = man.initial_state(np.broadcast_to(self.omega, V.shape), V)
        nfull = np.floor(r / self.h).astype(int)
        for k in range(int(np.max(nfull)) if nfull.size else 0):
            S = np.where(k < nfull, man.rk4(S, self.h), S)
        S = man.rk4(S, r - nfull * self.h)
        return S[:2].T

    def point_to_fan(self, p) -> tuple:
        """Invert the fan map: nearest ray, then 1D root finds in theta and r."""
        p = np.asarray(p, dtype=float)
        if self.manifold.flat:
            d = p - self.omega
            return float(np.hypot(*d)), float(np.arctan2(d[1], d[0]))

        def closest(theta):
            # arc length of closest approach along ray theta, and signed offset
            P = self.fan_to_point(np.arange(0, self.r_end.max() + self.h, self.h), theta)
            k = int(np.argmin(np.sum((P - p) ** 2, axis=1)))

            def along(r):
                q, t = self.fan_to_point([r, r + 1e-7], theta)
                return float(np.dot(q - p, t - q))

            lo, hi = max(0.0, (k - 1) * self.h), (k + 1) * self.h
            r_star = brentq(along, lo, hi, xtol=1e-14) if along(lo) * along(hi) < 0 else k * self.h
            q, t = self.fan_to_point([r_star, r_star + 1e-7], theta)
            tang = t - q
            off = p - q
            return r_star, float(tang[0] * off[1] - tang[1] * off[0])

        d = p - self.omega
        t0 = np.arctan2(d[1], d[0])
        dt = 0.05
        lo, hi = t0 - dt, t0 + dt
        while closest(lo)[1] * closest(hi)[1] > 0:
            dt *= 2
            lo, hi = t0 - dt, t0 + dt
            if dt > 1.0:
                raise GeometryError("point not covered by the fan")
        theta = brentq(lambda t: closest(t)[1], lo, hi, xtol=1e-14)
        return float(closest(theta)[0]), float(theta)

    def jacobian(self, i, r):
        """Volume density J(r) on ray i, i.e. |g|^{1/2} in (r, theta)."""
        return self._interp(i, r)[:, 4]

    def quadrature(self, n_r: int = 16):
        """Points and weights integrating over the working disk in fan coordinates."""
        xg, wg = np.polynomial.legendre.leggauss(n_r)
        pts, wts, rr, tt = [], [], [], []
        for i in range(self.theta.size):
            if not np.isfinite(self.r_in[i]):
                continue
            a, b = self.r_in[i], self.r_out[i]
            r = 0.5 * (a + b) + 0.5 * (b - a) * xg
            S = self._interp(i, r)
            pts.append(S[:, :2])
            wts.append(0.5 * (b - a) * wg * S[:, 4] * self.theta_weights[i])
            rr.append(r)
            tt.append(np.full(n_r, self.theta[i]))
        return (np.concatenate(pts), np.concatenate(wts), np.concatenate(rr), np.concatenate(tt))

    def volume(self, n_r: int = 16) -> float:
        return float(np.sum(self.quadrature(n_r)[1]))

    def unit_speed_defect(self) -> float:
        S = self.states
        c = self.enlarged.c(S[:, 0], S[:, 1])
        valid = (np.arange(S.shape[0])[:, None] * self.h) <= self.r_end[None, :]
        speed = c * (S[:, 2] ** 2 + S[:, 3] ** 2)
        return float(np.max(np.abs(np.where(valid, speed - 1.0, 0.0))))

    def check_injective(self, n_probe: int = 64) -> bool:
        """Crossing check: neighbouring rays keep their angular order inside the disk."""
        n = self.states.shape[0]
        ok = True
        d = self.states[:, :2, :] - self.omega[None, :, None]
        ang = np.unwrap(np.arctan2(d[:, 1, :], d[:, 0, :]), axis=1)
        r = np.arange(n) * self.h
        inside = self.manifold.rho(self.states[:, 0, :], self.states[:, 1, :]) > 0
        for k in range(1, n, max(1, n // n_probe)):
            sel = inside[k]
            if np.count_nonzero(sel) > 1:
                ok &= bool(np.all(np.diff(ang[k, sel]) > 0))
        return ok and bool(np.all(self.states[1:, 4, :][(r[1:, None] <= self.r_end[None, :])] > 0))


def _ray_hits(man: SimpleManifold2D, big: SimpleManifold2D, omega, thetas, h) -> np.ndarray:
    V = big.unit(omega[0], omega[1], np.stack([np.cos(thetas), np.sin(thetas)], axis=1))
    _, _, path = big.shoot(np.broadcast_to(omega, V.shape), V, h=h, record=True)
    rho = man.rho(path[:, 0, :], path[:, 1, :])
    # mask samples beyond the enlarged boundary
    big_rho = big.rho(path[:, 0, :], path[:, 1, :])
    rho = np.where(big_rho >= 0, rho, -np.inf)
    return np.max(rho, axis=0) > 0


def polar_normal_coords(man: SimpleManifold2D, omega, n_theta: int = 64,
                        enlarge: float = 2.0, h: Optional[float] = None) -> FanCoordinates:
    """Fan of unit-speed geodesics from omega covering the disk ``man``.

    The theta range is the exact cone of rays meeting the disk, found by
    bisection; theta nodes are Gauss-Legendre nodes in s with
    theta = theta_c + half * sin(s), which absorbs the square-root behaviour
    of chord lengths at tangency.
    """
    omega = np.asarray(omega, dtype=float)
    h = man.step if h is None else h
    big = man.enlarged(enlarge)
    if man.rho(*omega) > 1e-12:
        raise GeometryError("fan center must lie outside the working region")
    if big.rho(*omega) <= 0:
        raise GeometryError("fan center must lie inside the enlarged manifold")
    tc = float(np.arctan2(-omega[1], -omega[0]))
    if man.flat:
        half = float(np.arcsin(min(1.0, man.radius / np.hypot(*omega))))
    else:
        # bisection (both sides at once) on the angular offset where rays stop meeting the disk
        sgn = np.array([1.0, -1.0])
        lo, hi = np.zeros(2), np.full(2, 0.5 * np.pi)
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            hit = _ray_hits(man, big, omega, tc + sgn * mid, h)
            lo = np.where(hit, mid, lo)
            hi = np.where(hit, hi, mid)
        sides = 0.5 * (lo + hi)
        tc = tc + 0.5 * (sides[0] - sides[1])
        half = 0.5 * (sides[0] + sides[1])
    s, ws = np.polynomial.legendre.leggauss(n_theta)
    s = 0.5 * np.pi * s
    ws = 0.5 * np.pi * ws
    theta = tc + half * np.sin(s)
    wtheta = half * np.cos(s) * ws
    V = big.unit(omega[0], omega[1], np.stack([np.cos(theta), np.sin(theta)], axis=1))
    X0 = np.broadcast_to(omega, V.shape)
    r_end, _, path = big.shoot(X0, V, h=h, record=True)
    # entry/exit of the working disk along each ray
    r_in = np.full(theta.size, np.nan)
    r_out = np.full(theta.size, np.nan)
    rho = man.rho(path[:, 0, :], path[:, 1, :])
    for i in range(theta.size):
        inside = np.nonzero(rho[:, i] > 0)[0]
        if inside.size == 0:
            continue
        k0, k1 = inside[0], inside[-1]
        f = lambda r, i=i: float(man.rho(*_hermite_point(big, path, i, r, h)))
        r_in[i] = brentq(f, (k0 - 1) * h, k0 * h, xtol=1e-13)
        r_out[i] = brentq(f, k1 * h, (k1 + 1) * h, xtol=1e-13)
    return FanCoordinates(man, big, omega, theta, wtheta, (tc - half, tc + half), h, path,
                          r_in, r_out, r_end)


def _hermite_point(big, path, i, r, h):
    k = min(int(np.floor(r / h)), path.shape[0] - 2)
    S = path[k, :, i]
    return big.rk4(S[:, None], r - k * h)[:2, 0]


# ---------------------------------------------------------------------------
# Warped products
# ---------------------------------------------------------------------------


@dataclass
class WarpChange:
    """y1 = eta(x1) with eta(t) = int_0^t exp(-f(s)) ds."""

    f_profile: Callable
    interval: tuple

    def eta(self, t):
        t = np.asarray(t, dtype=float)
        out = np.array([quad(lambda s: np.exp(-self.f_profile(s)), 0.0, ti, epsabs=1e-14,
                             epsrel=1e-13, limit=200)[0] for ti in t.ravel()])
        if not np.all(np.isfinite(out)):
            raise GeometryError("non-finite warp profile")
        return out.reshape(t.shape)

    def eta_inv(self, y):
        y = np.asarray(y, dtype=float)
        a, b = self.interval
        # widen the bracket slightly so endpoints round-trip
        lo, hi = a - 1e-9 - 0.01 * (b - a), b + 1e-9 + 0.01 * (b - a)
        ylo, yhi = float(self.eta(lo)), float(self.eta(hi))
        out = []
        for yi in y.ravel():
            if not ylo <= yi <= yhi:
                raise ValueError("y outside the warped interval")
            out.append(brentq(lambda t: float(self.eta(t)) - yi, lo, hi, xtol=1e-15, rtol=1e-15))
        return np.array(out).reshape(y.shape)

    def conformal_factor(self, y):
        """e^{2 f(eta^{-1}(y))}."""
        return np.exp(2.0 * self.f_profile(self.eta_inv(y)))

    def metric_residual(self, y, dy: float = 1e-5) -> float:
        """Max componentwise gap between the pulled-back metric and c(y) * (1 (+) g0).

        The dy1^2 component is (d eta^{-1}/dy)^2, obtained by central
        differences; the base block is e^{2f} g0 by construction.
        """
        y = np.asarray(y, dtype=float)
        deriv = (self.eta_inv(y + dy) - self.eta_inv(y - dy)) / (2 * dy)
        c = self.conformal_factor(y)
        return float(np.max(np.abs(deriv ** 2 - c)))


def warp_to_product(f_profile: Callable, interval=(0.0, 1.0)) -> WarpChange:
    """Coordinate change turning the warped product into a conformal product."""
    a, b = interval
    if not b > a:
        raise ValueError("interval must have positive length")
    return WarpChange(f_profile, (float(a), float(b)))
