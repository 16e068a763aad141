"""Conjugated Laplacian, the multiplier m_tau, the inverse G_tau, and estimate checks.

Fields on the cylinder I x T^{n-1} are stored as per-x1 Fourier coefficients
against an :class:`~cgolab.geometry.EigenBasis`. ``G_tau`` acts mode by mode
as a convolution in x1 with ``m_tau(., sqrt(lambda_j))``; since the kernel is
a sum of one-sided exponentials, the convolution is evaluated by exponential
recursions that integrate the kernel exactly against the piecewise linear
interpolant of the data.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .geometry import EigenBasis, ProductCylinder, build_flat_torus_basis


# ---------------------------------------------------------------------------
# The multiplier m_tau
# ---------------------------------------------------------------------------


def m_tau(t, mu, tau):
    """Closed form of (1/2pi) int e^{it eta} / (eta^2 + 2i tau eta - tau^2 + mu^2) d eta.

    Partial fractions give one-sided exponentials; mu = 0 is the double-pole
    case t e^{tau t} on t < 0. Negative tau uses m_tau(t) = m_{|tau|}(-t).
    """
    t, mu, tau = np.broadcast_arrays(np.asarray(t, float), np.asarray(mu, float), np.asarray(tau, float))
    if np.any(mu < 0):
        raise ValueError("mu must be nonnegative")
    if np.any(np.isclose(np.abs(tau), mu, rtol=0, atol=1e-14)):
        raise ValueError("resonant |tau| = mu is excluded")
    s = np.where(tau < 0, -t, t)
    a = np.abs(tau)
    out = np.zeros(t.shape)
    neg = s < 0
    zero = mu == 0
    lo = (mu < a) & ~zero
    hi = mu > a
    safe_mu = np.where(zero, 1.0, mu)
    # mu < tau: both poles in the same half plane, supported on s < 0
    v = (np.exp((a + mu) * s) - np.exp((a - mu) * s)) / (2 * safe_mu)
    out = np.where(lo & neg, v, out)
    # mu > tau: poles on opposite sides
    v_neg = np.exp((a + mu) * np.minimum(s, 0)) / (2 * safe_mu)
    v_pos = np.exp((a - mu) * np.maximum(s, 0)) / (2 * safe_mu)
    out = np.where(hi & neg, v_neg, out)
    out = np.where(hi & ~neg, v_pos, out)
    out = np.where(zero & neg, s * np.exp(a * np.minimum(s, 0)), out)
    return out


def m_tau_bound(t, mu, tau):
    """The majorant (1/mu) e^{-|tau - mu| |t|}."""
    return np.exp(-np.abs(np.abs(tau) - mu) * np.abs(t)) / mu


# ---------------------------------------------------------------------------
# Spectral fields
# ---------------------------------------------------------------------------


@dataclass
class SpectralField:
    """Coefficients u_hat[x1 index, j] of a function on I x M0."""

    cyl: ProductCylinder
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape[:2] != (self.cyl.n_x1, self.cyl.base.J):
            raise ValueError("coefficient array does not match the cylinder")

    @classmethod
    def zeros(cls, cyl: ProductCylinder) -> "SpectralField":
        return cls(cyl, np.zeros((cyl.n_x1, cyl.base.J), complex))

    @classmethod
    def from_grid(cls, cyl: ProductCylinder, values: np.ndarray) -> "SpectralField":
        return cls(cyl, cyl.base.analyze(values))

    @classmethod
    def from_function(cls, cyl: ProductCylinder, func: Callable) -> "SpectralField":
        """Sample func(x1, *base_coords) on the tensor grid and project."""
        X = cyl.base.grid_points()
        vals = np.stack([func(x, *X) for x in cyl.x1])
        return cls.from_grid(cyl, vals)

    def to_grid(self) -> np.ndarray:
        return self.cyl.base.synthesize(self.coeffs)

    def __add__(self, other):
        return SpectralField(self.cyl, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpectralField(self.cyl, self.coeffs - other.coeffs)

    def __mul__(self, s):
        return SpectralField(self.cyl, self.coeffs * s)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.cyl, -self.coeffs)

    def l2_norm(self) -> float:
        w = self.cyl.x1_weights()
        return float(np.sqrt(np.sum(w[:, None] * np.abs(self.coeffs) ** 2)))

    def h1_norm(self) -> float:
        """(||u||^2 + ||d_x1 u||^2 + ||grad' u||^2)^{1/2} with one-sided edge derivatives."""
        w = self.cyl.x1_weights()
        du = np.gradient(self.coeffs, self.cyl.h1, axis=0, edge_order=2)
        lam = self.cyl.base.eigenvalues
        dens = np.abs(self.coeffs) ** 2 * (1 + lam)[None, :] + np.abs(du) ** 2
        return float(np.sqrt(np.sum(w[:, None] * dens)))

    def slice_norms(self) -> np.ndarray:
        """Per-x1 L^2(M0) norms (Parseval)."""
        return np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=1))


def parseval_defect(u: SpectralField) -> float:
    """Max over slices of |grid L^2 norm - coefficient l^2 norm|."""
    g = u.to_grid()
    axes = tuple(range(1, g.ndim))
    grid_norm = np.sqrt(np.sum(np.abs(g) ** 2, axis=axes) * u.cyl.base.cell_weight)
    return float(np.max(np.abs(grid_norm - u.slice_norms())))


def lp_norm(u: Union[SpectralField, np.ndarray], p: float, cyl: Optional[ProductCylinder] = None,
            mask: Optional[np.ndarray] = None, chunk: int = 2_000_000) -> float:
    """Quadrature L^p norm on the x1 grid times the base grid.

    ``u`` is a SpectralField or an array of grid values shaped
    (n_x1, *grid_shape); ``mask`` restricts the integral to a subregion.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if isinstance(u, SpectralField):
        cyl = u.cyl
        coeffs = u.coeffs
        grid = None
    else:
        grid = np.asarray(u)
        coeffs = None
    w1 = cyl.x1_weights()
    cw = cyl.base.cell_weight
    size = int(np.prod(cyl.base.grid_shape))
    step = max(1, chunk // size)
    total = 0.0
    peak = 0.0
    for s in range(0, cyl.n_x1, step):
        sl = slice(s, min(cyl.n_x1, s + step))
        vals = cyl.base.synthesize(coeffs[sl]) if grid is None else grid[sl]
        a = np.abs(vals)
        if mask is not None:
            a = a * mask[sl]
        if np.isinf(p):
            peak = max(peak, float(np.max(a)))
        else:
            axes = tuple(range(1, a.ndim))
            total += float(np.sum(w1[sl] * np.sum(a ** p, axis=axes))) * cw
    return peak if np.isinf(p) else total ** (1.0 / p)


# ---------------------------------------------------------------------------
# Parameters and admissibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CarlemanParams:
    """tau with its spectral guard; ``admissible`` means min_j |tau^2 - lambda_j| >= delta_spec."""

    tau: float
    delta_spec: float
    spectral_gap: float
    admissible: bool
    cutoff_inflation: float = 0.2


def default_delta_spec(tau: float) -> float:
    return 1e-3 * (1.0 + abs(tau))


def make_params(tau: float, basis: EigenBasis, delta_spec: Optional[float] = None) -> CarlemanParams:
    if abs(tau) < 4:
        raise ValueError("|tau| must be at least 4")
    d = default_delta_spec(tau) if delta_spec is None else float(delta_spec)
    gap = float(np.min(np.abs(tau * tau - basis.eigenvalues)))
    return CarlemanParams(float(tau), d, gap, gap >= d)


def torus_spectral_gap(side_lengths, tau: float) -> float:
    """min |tau^2 - lambda| over all torus eigenvalues (not only retained ones)."""
    b = build_flat_torus_basis(side_lengths, int(abs(tau)) + 2, grid_shape=(2,) * len(side_lengths))
    return float(np.min(np.abs(tau * tau - b.eigenvalues)))


# ---------------------------------------------------------------------------
# Conjugated Laplacian
# ---------------------------------------------------------------------------


def _d1_d2(c: np.ndarray, h: float):
    """Fourth-order centred first and second x1-derivatives with zero padding."""
    pad = [(2, 2)] + [(0, 0)] * (c.ndim - 1)
    p = np.pad(c, pad)
    d1 = (-p[4:] + 8 * p[3:-1] - 8 * p[1:-3] + p[:-4]) / (12 * h)
    d2 = (-p[4:] + 16 * p[3:-1] - 30 * p[2:-2] + 16 * p[1:-3] - p[:-4]) / (12 * h * h)
    return d1, d2


def conjugated_laplacian(u: SpectralField, tau: float, check_support: bool = True) -> SpectralField:
    """e^{tau x1} Delta e^{-tau x1} u = u'' - 2 tau u' + tau^2 u - lambda_j u, mode by mode."""
    c = u.coeffs
    if check_support:
        edge = max(np.max(np.abs(c[:2])), np.max(np.abs(c[-2:])))
        scale = np.max(np.abs(c))
        if scale > 0 and edge > 1e-8 * scale:
            warnings.warn("field is not supported in the interior of I; edge stencils are contaminated",
                          RuntimeWarning, stacklevel=2)
    d1, d2 = _d1_d2(c, u.cyl.h1)
    lam = u.cyl.base.eigenvalues[None, :]
    return SpectralField(u.cyl, d2 - 2 * tau * d1 + (tau * tau - lam) * c)


# ---------------------------------------------------------------------------
# G_tau
# ---------------------------------------------------------------------------


def _exp_weights(a: np.ndarray, h: float):
    """Weights of int_0^h e^{-a s} (linear interpolant) ds for the two end values.

    Returns (w_near, w_far, E) with E = e^{-a h}: the integral equals
    w_near * f(near) + w_far * f(far), where 'near' is the output point.
    """
    z = np.asarray(a * h, dtype=float)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    i0 = np.where(small, 1 - z / 2 + z ** 2 / 6 - z ** 3 / 24, -np.expm1(-zs) / zs)
    i1 = np.where(small, 0.5 - z / 3 + z ** 2 / 8 - z ** 3 / 30,
                  (-np.expm1(-zs) - zs * np.exp(-zs)) / zs ** 2)
    return h * (i0 - i1), h * i1, np.exp(-z)


def _anticausal(f: np.ndarray, a: np.ndarray, h: float) -> np.ndarray:
    """A_a f(x) = int_x^inf e^{-a (y - x)} f(y) dy along axis 0 (f zero past the grid)."""
    w0, w1, E = _exp_weights(a, h)
    out = np.zeros(f.shape, dtype=complex)
    acc = np.zeros(f.shape[1:], dtype=complex)
    for i in range(f.shape[0] - 2, -1, -1):
        acc = E * acc + w0 * f[i] + w1 * f[i + 1]
        out[i] = acc
    return out


def _causal(f: np.ndarray, a: np.ndarray, h: float) -> np.ndarray:
    """C_a f(x) = int_-inf^x e^{-a (x - y)} f(y) dy along axis 0."""
    w0, w1, E = _exp_weights(a, h)
    out = np.zeros(f.shape, dtype=complex)
    acc = np.zeros(f.shape[1:], dtype=complex)
    for i in range(1, f.shape[0]):
        acc = E * acc + w0 * f[i] + w1 * f[i - 1]
        out[i] = acc
    return out


def _g_positive(f: np.ndarray, mu: np.ndarray, tau: float, h: float) -> np.ndarray:
    """Convolution with m_tau(., mu) for tau > 0; modes on axis 1, mu of shape (f.shape[1],)."""
    out = np.zeros(f.shape, dtype=complex)
    extra = (None,) * (f.ndim - 2)
    lo = (mu > 0) & (mu < tau)
    hi = mu > tau
    zero = mu == 0
    if np.any(lo):
        m = mu[lo][(slice(None),) + extra]
        fl = f[:, lo]
        out[:, lo] = (_anticausal(fl, tau + m, h) - _anticausal(fl, tau - m, h)) / (2 * m)
    if np.any(hi):
        m = mu[hi][(slice(None),) + extra]
        fh = f[:, hi]
        out[:, hi] = (_anticausal(fh, tau + m, h) + _causal(fh, m - tau, h)) / (2 * m)
    if np.any(zero):
        fz = f[:, zero]
        a = np.full(fz.shape[1:], tau)
        out[:, zero] = -_anticausal(_anticausal(fz, a, h), a, h)
    return out


def g_tau_coeffs(c: np.ndarray, mu: np.ndarray, tau: float, h: float) -> np.ndarray:
    """Apply the x1 convolution with m_tau to coefficient arrays (x1 on axis 0, modes on axis 1)."""
    if np.any(np.isclose(mu, abs(tau), rtol=0, atol=1e-14)):
        raise ValueError("resonant mode")
    if tau > 0:
        return _g_positive(c, mu, tau, h)
    return _g_positive(c[::-1], mu, -tau, h)[::-1]


def smoothstep5(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10 - 15 * s + 6 * s * s)


def cutoff_chi(x: np.ndarray, interval, inflation: float = 0.2) -> np.ndarray:
    """Quintic-smoothstep bump equal to 1 on I, vanishing outside I inflated by ``inflation``."""
    a, b = interval
    pad = 0.5 * inflation * (b - a)
    left = smoothstep5((x - (a - pad)) / pad)
    right = smoothstep5(((b + pad) - x) / pad)
    return left * right


def apply_G_tau(f: SpectralField, params: CarlemanParams, extend: bool = False) -> SpectralField:
    """G_tau f = chi * (m_tau convolution of f extended by zero outside I).

    By default the result is returned on the grid of I, where chi = 1. With
    ``extend`` the x1 grid is padded to I inflated by 20% and the cutoff is
    applied explicitly.
    """
    if not params.admissible:
        raise ValueError(f"tau = {params.tau} is not admissible (gap {params.spectral_gap:.3g})")
    cyl = f.cyl
    mu = cyl.base.sqrt_eigenvalues
    h = cyl.h1
    if not extend:
        return SpectralField(cyl, g_tau_coeffs(f.coeffs, mu, params.tau, h))
    npad = int(np.ceil(0.5 * params.cutoff_inflation * cyl.length / h))
    c = np.pad(f.coeffs, [(npad, npad), (0, 0)])
    g = g_tau_coeffs(c, mu, params.tau, h)
    a, b = cyl.interval
    big = ProductCylinder((a - npad * h, b + npad * h), cyl.base, cyl.n_x1 + 2 * npad)
    chi = cutoff_chi(big.x1, cyl.interval, params.cutoff_inflation)
    return SpectralField(big, g * chi[:, None])


def apply_G_tau_adjoint(f: SpectralField, params: CarlemanParams) -> SpectralField:
    """L^2 adjoint (and bilinear transpose) of G_tau on I: the kernel is real, so it is G_{-tau}."""
    p = replace(params, tau=-params.tau)
    return apply_G_tau(f, p)


# ---------------------------------------------------------------------------
# Spectral clusters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralCluster:
    k: int
    indices: np.ndarray

    def project(self, coeffs: np.ndarray) -> np.ndarray:
        """chi_k applied to coefficients with modes on the last axis."""
        out = np.zeros_like(coeffs)
        out[..., self.indices] = coeffs[..., self.indices]
        return out


def cluster_index(basis: EigenBasis) -> np.ndarray:
    """k with k <= sqrt(lambda_j) < k + 1 for every mode (guarding round-off at integers)."""
    s = basis.sqrt_eigenvalues
    k = np.floor(s + 1e-12).astype(int)
    return k


def spectral_clusters(basis: EigenBasis) -> list:
    ks = cluster_index(basis)
    return [SpectralCluster(k, np.nonzero(ks == k)[0]) for k in range(int(ks.max()) + 1)]


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class EstimateReport:
    """Measured ratios; constants are maxima over the stored sample set."""

    taus: list
    rows: list = field(default_factory=list)
    inputs: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add(self, tau, norm_pair: str, ratio: float, input_id: str):
        self.rows.append({"tau": tau, "norm_pair": norm_pair, "ratio": float(ratio), "input_id": input_id})

    def constants(self) -> dict:
        """{norm_pair: {tau: max ratio}}."""
        out: dict = {}
        for r in self.rows:
            d = out.setdefault(r["norm_pair"], {})
            d[r["tau"]] = max(d.get(r["tau"], 0.0), r["ratio"])
        return out

    def spread(self, norm_pair: str) -> float:
        """max/min of the per-tau constants for one norm pair."""
        v = np.array(list(self.constants()[norm_pair].values()))
        return float(v.max() / v.min())

    def loglog_slope(self, norm_pair: str) -> float:
        c = self.constants()[norm_pair]
        t = np.array(sorted(c))
        v = np.array([c[x] for x in t])
        return float(np.polyfit(np.log(t), np.log(v), 1)[0])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["tau", "norm_pair", "ratio", "input_id"])
            w.writeheader()
            for r in self.rows:
                w.writerow({**r, "ratio": repr(r["ratio"])})


# ---------------------------------------------------------------------------
# Sogge cluster estimates
# ---------------------------------------------------------------------------


def _with_grid(basis: EigenBasis, grid_shape) -> EigenBasis:
    return EigenBasis(basis.side_lengths, basis.eigenvalues, basis.kvecs, tuple(grid_shape), basis.max_cluster)


def base_lp_norm(basis: EigenBasis, coeffs: np.ndarray, p: float) -> float:
    vals = np.abs(basis.synthesize(coeffs))
    if np.isinf(p):
        return float(vals.max())
    return float((np.sum(vals ** p) * basis.cell_weight) ** (1.0 / p))


def verify_cluster_estimates(basis: EigenBasis, trials: int, n: Optional[int] = None,
                             k_max: int = 8, seed: int = 0, oversample: int = 3) -> EstimateReport:
    """Sogge ratios ||chi_k u||_{L^p} / ((1+k)^{1/2-1/n} ||u||_{L^2}), p = 2n/(n-2).

    ``n`` is the cylinder dimension (defaults to dim(M0) + 1). Inputs per k are
    ``trials`` random functions, every single mode of the cluster, and the
    cluster kernel sum_{j in C_k} psi_j (the extremiser for large p). The dual
    ratio ||chi_k u||_{L^2} / ((1+k)^{1/2-1/n} ||u||_{L^{p'}}) is reported too.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = basis.dim + 1 if n is None else n
    p = 2 * n / (n - 2)
    pd = 2 * n / (n + 2)
    expo = 0.5 - 1.0 / n
    fine = _with_grid(basis, tuple(oversample * s for s in basis.grid_shape))
    rng = np.random.default_rng(seed)
    clusters = [c for c in spectral_clusters(basis) if c.k <= k_max]
    rep = EstimateReport(taus=[c.k for c in clusters], meta={"p": p, "n": n})
    for c in clusters:
        scale = (1 + c.k) ** expo
        inputs = {}
        for t in range(trials):
            inputs[f"k{c.k}_random{t}"] = rng.standard_normal(basis.J) + 1j * rng.standard_normal(basis.J)
        for j in c.indices:
            e = np.zeros(basis.J, complex)
            e[j] = 1.0
            inputs[f"k{c.k}_mode{j}"] = e
        kern = np.zeros(basis.J, complex)
        kern[c.indices] = 1.0
        inputs[f"k{c.k}_kernel"] = kern
        for name, u in inputs.items():
            cu = c.project(u)
            l2 = float(np.linalg.norm(u))
            rep.add(c.k, "sogge", base_lp_norm(fine, cu, p) / (scale * l2), name)
            rep.add(c.k, "sogge_dual", float(np.linalg.norm(cu)) / (scale * base_lp_norm(fine, u, pd)), name)
            rep.inputs[name] = u
    return rep


def series_sum(basis: EigenBasis, t: np.ndarray, tau: float, n: int = 3) -> np.ndarray:
    """sum_k (1+k)^{1-2/n} sup_{j in C_k} |m_tau(t, sqrt(lambda_j))| on a t grid."""
    t = np.atleast_1d(np.asarray(t, float))
    out = np.zeros(t.shape)
    for c in spectral_clusters(basis):
        mu = basis.sqrt_eigenvalues[c.indices]
        mu = mu[~np.isclose(mu, abs(tau), rtol=0, atol=1e-12)]
        if mu.size == 0:
            continue
        vals = np.abs(m_tau(t[:, None], mu[None, :], tau))
        out += (1 + c.k) ** (1 - 2.0 / n) * vals.max(axis=1)
    return out


def series_constant(basis: EigenBasis, t: np.ndarray, taus: Sequence[float], n: int = 3) -> float:
    """Smallest C with series_sum <= C (1 + |t|^{-1+2/n}) over the (t, tau) grid."""
    t = np.asarray(t, float)
    env = 1 + np.abs(t) ** (-1 + 2.0 / n)
    return float(max(np.max(series_sum(basis, t, tau, n) / env) for tau in taus))


# ---------------------------------------------------------------------------
# Carleman sweep
# ---------------------------------------------------------------------------


def _g_matrix(mu: float, tau: float, n: int, h: float) -> np.ndarray:
    """Dense matrix of the 1D convolution with m_tau(., mu) on an n-point grid."""
    eye = np.eye(n, dtype=complex)[:, None, :]
    return g_tau_coeffs(eye, np.array([mu]), tau, h)[:, 0, :]


def _top_singular(B: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Maximiser of ||B v||_w / ||v||_w for trapezoid weights w."""
    sw = np.sqrt(w)
    _, _, vh = np.linalg.svd(B * (1.0 / sw)[None, :], full_matrices=False)
    return vh[0].conj() / sw


def _subbasis(basis: EigenBasis, idx) -> EigenBasis:
    idx = np.atleast_1d(idx)
    return EigenBasis(basis.side_lengths, basis.eigenvalues[idx], basis.kvecs[idx], basis.grid_shape,
                      basis.max_cluster)


def sweep_cylinder(tau: float, side_lengths=(6.0, 6.5), interval=(0.0, 1.0),
                   probe_scale: float = 4.0) -> ProductCylinder:
    """Per-tau cylinder: clusters up to 2 tau and an x1 step resolving scale probe_scale / tau."""
    basis = build_flat_torus_basis(side_lengths, int(np.ceil(2 * abs(tau))))
    s = probe_scale / abs(tau)
    length = interval[1] - interval[0]
    h = min(length / 64, s / 6)
    n = int(np.ceil(length / h)) + 1
    return ProductCylinder(tuple(interval), basis, n)


def carleman_probes(cyl: ProductCylinder, tau: float, n_near: int = 4,
                    probe_scale: float = 4.0) -> list:
    """tau-adapted probe inputs as (input_id, SpectralField) pairs.

    * near-resonant single modes with x1 profiles maximising the L^2 and H^1
      ratios of the 1D operator (dense SVD), on a one-mode sub-basis;
    * a Gaussian of scale probe_scale / tau, the scale-invariant regime of
      the L^{2n/(n+2)} -> L^{2n/(n-2)} bound.
    """
    base = cyl.base
    mu_all = base.sqrt_eigenvalues
    uniq, first = np.unique(np.round(mu_all, 10), return_index=True)
    below = first[uniq < abs(tau)][-n_near:]
    above = first[uniq > abs(tau)][:n_near]
    cand = list(below) + list(above) + [0, first[-1]]
    w = cyl.x1_weights()
    D = np.gradient(np.eye(cyl.n_x1), cyl.h1, axis=0, edge_order=2)
    probes = []
    for j in dict.fromkeys(cand):
        mu = float(mu_all[j])
        M = _g_matrix(mu, tau, cyl.n_x1, cyl.h1)
        sub = ProductCylinder(cyl.interval, _subbasis(base, j), cyl.n_x1)
        v2 = _top_singular(M, w)
        probes.append((f"mode{j}_L2", SpectralField(sub, v2[:, None])))
        # H^1: maximise (|Mv|^2 + |DMv|^2 + mu^2 |Mv|^2)_w / |v|_w^2
        sw = np.sqrt(w)
        S = np.vstack([(sw[:, None] * M), (sw[:, None] * (D @ M)), mu * (sw[:, None] * M)])
        _, _, vh = np.linalg.svd(S * (1.0 / sw)[None, :], full_matrices=False)
        v1 = vh[0].conj() / sw
        probes.append((f"mode{j}_H1", SpectralField(sub, v1[:, None])))
    # concentrated Gaussian centred in the cylinder
    s = probe_scale / abs(tau)
    xm = 0.5 * (cyl.interval[0] + cyl.interval[1])
    L = base.side_lengths
    g1 = np.exp(-((cyl.x1 - xm) ** 2) / (2 * s * s))
    X = base.grid_points()
    r2 = sum((Xi - 0.5 * Li) ** 2 for Xi, Li in zip(X, L))
    gb = np.exp(-r2 / (2 * s * s))
    coeff = g1[:, None] * base.analyze(gb)[None, :]
    probes.append(("gaussian", SpectralField(cyl, coeff)))
    return probes


def verify_carleman_sweep(cyl: Union[ProductCylinder, Callable], taus: Sequence[float],
                          inputs: Optional[dict] = None, delta_spec: Optional[float] = None,
                          n: Optional[int] = None) -> EstimateReport:
    """Empirical resolvent-estimate ratios over a tau sweep, plus a direct L^{p'} -> L^p Carleman check.

    ``cyl`` is a ProductCylinder or a factory tau -> ProductCylinder.
    ``inputs`` maps tau -> list of (input_id, SpectralField); by default the
    tau-adapted probes of :func:`carleman_probes` are used. Non-admissible tau
    are skipped and recorded in ``meta['skipped']``.
    """
    rep = EstimateReport(taus=[], meta={"skipped": []})
    for tau in taus:
        c = cyl(tau) if callable(cyl) else cyl
        nn = c.n if n is None else n
        p, pd = 2 * nn / (nn - 2), 2 * nn / (nn + 2)
        params = make_params(tau, c.base, delta_spec)
        if not params.admissible:
            rep.meta["skipped"].append(tau)
            continue
        rep.taus.append(tau)
        probes = inputs[tau] if inputs is not None else carleman_probes(c, tau)
        for name, f in probes:
            g = apply_G_tau(f, params)
            l2f = f.l2_norm()
            rep.add(tau, "L2", abs(tau) * g.l2_norm() / l2f, name)
            rep.add(tau, "H1", g.h1_norm() / l2f, name)
            rep.add(tau, "Lp", lp_norm(g, p) / lp_norm(f, pd), name)
            rep.inputs[(tau, name)] = f
        # Carleman inequality: ||e^{tau x1} u||_{L^p} <= C ||e^{tau x1} Delta u||_{L^p'} with v = e^{tau x1} u
        gauss = [f for name, f in probes if name == "gaussian"]
        if gauss:
            v = gauss[0]
            Pv = conjugated_laplacian(v, tau, check_support=False)
            rep.add(tau, "carleman_lp", lp_norm(v, p) / lp_norm(Pv, pd), "gaussian")
    return rep
