"""Dirichlet problem and DN map for -Delta + q on a Euclidean box.

The discrete form is

    B(u, v) = sum_edges w_e (u_p - u_p')(v_p - v_p') + sum_nodes m_p q_p u_p v_p,

with trapezoid node weights m_p and edge weights w_e = (cell volume / h_d^2)
times the trapezoid factors of the remaining directions. It is bilinear and
symmetric (also for complex q), and at interior nodes B(u, e_p)/m_p is the
7-point finite-difference operator. Boundary fluxes are only ever defined
through B, never by one-sided differences.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla


class EigenvalueGuardError(RuntimeError):
    """0 is (numerically) a Dirichlet eigenvalue of -Delta + q."""


@dataclass(frozen=True)
class BoxGrid:
    """Tensor grid over the box prod_d [lower_d, upper_d]."""

    lower: tuple
    upper: tuple
    shape: tuple

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.upper, float) - np.asarray(self.lower, float)) / (np.asarray(self.shape) - 1)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> list:
        return [np.linspace(a, b, n) for a, b, n in zip(self.lower, self.upper, self.shape)]

    def points(self) -> tuple:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def trapezoid_factors(self) -> list:
        out = []
        for n in self.shape:
            t = np.ones(n)
            t[0] = t[-1] = 0.5
            out.append(t)
        return out

    def node_weights(self) -> np.ndarray:
        w = np.prod(self.spacing)
        for i, t in enumerate(self.trapezoid_factors()):
            sh = [1] * self.dim
            sh[i] = -1
            w = w * t.reshape(sh)
        return np.broadcast_to(w, self.shape).copy()

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, bool)
        for d in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[d] = 0
            m[tuple(idx)] = True
            idx[d] = -1
            m[tuple(idx)] = True
        return m

    def boundary_index(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask().ravel())

    def interior_index(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask().ravel())

    def outward_normals(self) -> np.ndarray:
        """Averaged outward normal at boundary nodes (edges and corners get the normalized sum)."""
        nb = np.zeros(self.shape + (self.dim,))
        for d in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[d] = 0
            nb[tuple(idx) + (d,)] -= 1
            idx[d] = -1
            nb[tuple(idx) + (d,)] += 1
        nb = nb.reshape(-1, self.dim)[self.boundary_index()]
        return nb / np.linalg.norm(nb, axis=1, keepdims=True)

    def boundary_weights(self) -> np.ndarray:
        """Surface quadrature weights at boundary nodes (trapezoid rule on each face, summed)."""
        h = self.spacing
        w = np.zeros(self.shape)
        tf = self.trapezoid_factors()
        for d in range(self.dim):
            face = np.prod(np.delete(h, d))
            for end in (0, -1):
                sl = [slice(None)] * self.dim
                sl[d] = end
                fw = face
                for e in range(self.dim):
                    if e != d:
                        sh = [1] * (self.dim - 1)
                        sh[e if e < d else e - 1] = -1
                        fw = fw * tf[e].reshape(sh)
                w[tuple(sl)] += fw
        return w.ravel()[self.boundary_index()]


def stiffness_matrix(grid: BoxGrid) -> sparse.csr_matrix:
    """Edge-weight Laplacian form (symmetric, real)."""
    h = grid.spacing
    vol = np.prod(h)
    tf = grid.trapezoid_factors()
    idx = np.arange(grid.size).reshape(grid.shape)
    rows, cols, vals = [], [], []
    for d in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[d] = slice(0, -1)
        hi[d] = slice(1, None)
        w = np.full(idx[tuple(lo)].shape, vol / h[d] ** 2)
        for e in range(grid.dim):
            if e != d:
                sh = [1] * grid.dim
                sh[e] = -1
                w = w * tf[e].reshape(sh)
        p, pp, w = idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel(), w.ravel()
        rows += [p, pp, p, pp]
        cols += [p, pp, pp, p]
        vals += [w, w, -w, -w]
    K = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(grid.size, grid.size))
    return K.tocsr()


def sample_potential(grid: BoxGrid, q: Union[None, float, complex, Callable, np.ndarray]) -> np.ndarray:
    if q is None:
        return np.zeros(grid.shape)
    if callable(q):
        return np.asarray(q(*grid.points()))
    q = np.asarray(q)
    return np.broadcast_to(q, grid.shape).copy()


class DirichletSystem:
    """Assembled form B_q with boundary elimination and a sparse LU of the interior block."""

    def __init__(self, grid: BoxGrid, q=None, guard: float = 1e-6, check_guard: bool = True):
        self.grid = grid
        self.q = sample_potential(grid, q)
        self.m = grid.node_weights()
        self.K = stiffness_matrix(grid)
        M = sparse.diags(self.m.ravel())
        self.B = (self.K + M @ sparse.diags(self.q.ravel())).tocsr()
        if np.iscomplexobj(self.B.data) and not np.any(self.B.data.imag):
            self.B = self.B.real.tocsr()
        self.ib = grid.boundary_index()
        self.ii = grid.interior_index()
        self.B_II = self.B[self.ii][:, self.ii].tocsc()
        self.B_IB = self.B[self.ii][:, self.ib].tocsr()
        self.B_BB = self.B[self.ib][:, self.ib].tocsr()
        self.lu = spla.splu(self.B_II)
        self.guard = guard
        self.sigma_min = None
        self.scale = None
        if check_guard:
            self.check_guard()

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.B.data)

    def _scaled_sigma_min(self, iters: int = 30, seed: int = 0) -> float:
        """Inverse iteration on (M^{-1/2} B_II M^{-1/2})^H (same)."""
        s = np.sqrt(self.m.ravel()[self.ii])
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(self.ii.size)
        sig = np.inf
        for _ in range(iters):
            x = x / np.linalg.norm(x)
            y = self.lu_solve(x * s) * s
            sig = 1.0 / np.linalg.norm(y)
            x = self.lu_solve(y * s, trans="H") * s
        return float(sig)

    def lu_solve(self, b: np.ndarray, trans: str = "N") -> np.ndarray:
        """Interior solve; complex right-hand sides against a real factorization are split."""
        if self.is_complex:
            return self.lu.solve(np.asarray(b, complex), trans=trans)
        if np.iscomplexobj(b):
            return self.lu.solve(b.real.copy(), trans=trans) + 1j * self.lu.solve(b.imag.copy(), trans=trans)
        return self.lu.solve(np.asarray(b, float), trans=trans)

    def check_guard(self):
        h = self.grid.spacing
        self.scale = float(4 * np.sum(1.0 / h ** 2) + np.max(np.abs(self.q)))
        self.sigma_min = self._scaled_sigma_min()
        if self.sigma_min < self.guard * self.scale:
            raise EigenvalueGuardError(
                f"smallest singular value {self.sigma_min:.3e} below guard {self.guard:.1e} x scale {self.scale:.3e}")
        return self.sigma_min

    def coercivity(self, shift: Optional[float] = None) -> float:
        """Smallest eigenvalue of M^{-1/2}(Re B_II + C M_II)M^{-1/2}, C = 1 + max(0, -min Re q) by default."""
        if shift is None:
            shift = 1.0 + max(0.0, -float(np.min(self.q.real)))
        s = 1.0 / np.sqrt(self.m.ravel()[self.ii])
        A = self.B_II.real if self.is_complex else self.B_II
        S = sparse.diags(s) @ (A + sparse.diags(shift * self.m.ravel()[self.ii])) @ sparse.diags(s)
        S = 0.5 * (S + S.T)
        val = spla.eigsh(S.tocsc(), k=1, sigma=0.0, which="LM", return_eigenvectors=False)
        return float(val[0])

    def solve(self, f_boundary: np.ndarray) -> np.ndarray:
        """Full nodal solution with trace f_boundary (ordered like boundary_index)."""
        f = np.asarray(f_boundary)
        uI = self.lu_solve(-(self.B_IB @ f))
        dtype = np.result_type(uI, f)
        u = np.zeros(self.grid.size, dtype=dtype)
        u[self.ib] = f
        u[self.ii] = uI
        return u.reshape(self.grid.shape)

    def form(self, u: np.ndarray, v: np.ndarray) -> complex:
        """B(u, v), bilinear."""
        return complex(u.ravel() @ (self.B @ v.ravel()))

    def residual(self, u: np.ndarray) -> float:
        """Max interior strong-form residual (-Delta_h + q) u."""
        r = (self.B @ u.ravel())[self.ii] / self.m.ravel()[self.ii]
        return float(np.max(np.abs(r))) if r.size else 0.0

    def dn_schur(self) -> np.ndarray:
        """N = B_BB - B_BI B_II^{-1} B_IB, the discrete DN form on boundary nodes."""
        X = self.lu_solve(self.B_IB.toarray())
        N = self.B_BB.toarray() - self.B_IB.T.toarray() @ X
        return N


def solve_dirichlet(grid: BoxGrid, q, f: Union[np.ndarray, Callable], system: Optional[DirichletSystem] = None
                    ) -> np.ndarray:
    """Solve (-Delta + q) u = 0 with u = f on the boundary; f is a callable or boundary values."""
    sysm = system or DirichletSystem(grid, q)
    if callable(f):
        pts = [p.ravel()[grid.boundary_index()] for p in grid.points()]
        f = f(*pts)
    return sysm.solve(np.asarray(f))


@dataclass
class DNMapMatrix:
    """Entries <Lambda f_i, h_k> of the DN map for trace bases F (columns f_i) and H (columns h_k)."""

    matrix: np.ndarray
    grid: BoxGrid
    basis_name: str = "nodal"

    def density(self, f: np.ndarray) -> np.ndarray:
        """Lambda f as a boundary density (nodal basis only): divide the pairing by dS weights."""
        return (self.matrix @ f) / self.grid.boundary_weights()

    def symmetry_defect(self) -> float:
        A = self.matrix
        return float(np.max(np.abs(A - A.T)) / max(np.max(np.abs(A)), 1e-300))


def dn_map(grid: BoxGrid, q=None, F: Optional[np.ndarray] = None, H: Optional[np.ndarray] = None,
           system: Optional[DirichletSystem] = None) -> DNMapMatrix:
    """Weak DN matrix: entry (i, k) = B_q(u_i, v_k), u_i the solution with trace f_i, v_k any extension of h_k."""
    sysm = system or DirichletSystem(grid, q)
    N = sysm.dn_schur()
    if F is None and H is None:
        return DNMapMatrix(N, grid)
    nb = sysm.ib.size
    F = np.eye(nb) if F is None else F
    H = F if H is None else H
    return DNMapMatrix(F.T @ N @ H, grid, "custom")


def pairing_with_extension(system: DirichletSystem, f: np.ndarray, h: np.ndarray,
                           interior: Optional[np.ndarray] = None) -> complex:
    """<Lambda f, h> evaluated as B(u, v) with v = h on the boundary and ``interior`` inside (0 by default)."""
    u = system.solve(f)
    v = np.zeros(system.grid.size, dtype=np.result_type(h, complex))
    v[system.ib] = h
    if interior is not None:
        v[system.ii] = interior
    return system.form(u, v.reshape(system.grid.shape))


@dataclass
class IntegralIdentity:
    volume: complex
    boundary: complex
    residual: float
    tolerance: float

    @property
    def defect(self) -> float:
        return abs(self.volume - self.boundary)

    @property
    def ok(self) -> bool:
        return self.defect <= self.tolerance


def integral_identity_residual(grid: BoxGrid, q1, q2, f1: np.ndarray, f2: np.ndarray,
                               residual_tol: float = 1e-8) -> IntegralIdentity:
    """Compare int (q1 - q2) u1 u2 dV with int (Lambda_1 - Lambda_2)(u1|) u2| dS.

    u1 solves with q1 and trace f1, u2 with q2 and trace f2. The boundary side
    is evaluated with the two Schur-complement DN matrices; the agreement
    tolerance is max(10 x the solve residual, 1e-10 x the size of the terms).
    """
    s1, s2 = DirichletSystem(grid, q1), DirichletSystem(grid, q2)
    u1, u2 = s1.solve(f1), s2.solve(f2)
    res = max(s1.residual(u1), s2.residual(u2))
    scale_res = res * float(np.sum(grid.node_weights() * np.abs(u1) * np.abs(u2)))
    if res > residual_tol * max(1.0, s1.scale or 1.0):
        warnings.warn(f"PDE residual {res:.2e} exceeds tolerance", RuntimeWarning)
    vol = complex(np.sum(grid.node_weights() * (s1.q - s2.q) * u1 * u2))
    N1, N2 = s1.dn_schur(), s2.dn_schur()
    bnd = complex(f2 @ ((N1 - N2) @ f1))
    size = float(np.abs(f2) @ (np.abs(N1) + np.abs(N2)) @ np.abs(f1))
    tol = max(10.0 * scale_res, 1e-10 * size)
    return IntegralIdentity(vol, bnd, res, tol)


def boundary_trace(grid: BoxGrid, func: Callable) -> np.ndarray:
    pts = [p.ravel()[grid.boundary_index()] for p in grid.points()]
    return np.asarray(func(*pts))
