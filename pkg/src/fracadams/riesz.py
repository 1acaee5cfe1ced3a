"""Riesz potentials I_alpha f(x) = int_Omega f(y) |x-y|^(alpha-n) dy on grids.

Each source cell contributes f_j times the exact integral of the kernel over
that cell (the self cell included), so the quadrature is exact for piecewise
constant f and second order for smooth f.  Applications are FFT convolutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.signal import fftconvolve

from . import _lattice
from .constants import exterior_kernel_constant, kernel_constant
from .errors import DomainError, UsageError
from .fraclap import fraclap_spectral
from .grid import Domain, GridFunction, l2_norm, whole_grid


@dataclass(frozen=True, eq=False)
class RieszOperator:
    alpha: float
    domain: Domain
    self_weight: float       # int over one cell of |z|^(alpha-n)
    weights: np.ndarray      # cell integrals for offsets in [-R, R]^n

    @property
    def radius(self) -> int:
        return (self.weights.shape[0] - 1) // 2


def riesz_operator(alpha: float, domain: Domain) -> RieszOperator:
    g = domain.grid
    if not 0 < alpha < g.n:
        raise DomainError(f"alpha must lie in (0, n), got alpha={alpha}, n={g.n}")
    R = max(g.shape) - 1
    w = _lattice.riesz_cell_weights(g.n, alpha, R, g.h)
    w.flags.writeable = False
    return RieszOperator(float(alpha), domain, float(w[(R,) * g.n]), w)


def riesz_apply(op: RieszOperator, f: GridFunction) -> GridFunction:
    """I_alpha f on every cell of the grid, f restricted to the operator's domain."""
    g = op.domain.grid
    if f.grid != g:
        raise UsageError("f and operator live on different grids")
    src = np.where(op.domain.mask, f.values, 0.0)
    R = op.radius
    full = fftconvolve(src, op.weights, mode="full")
    return f.with_values(full[tuple(slice(R, R + m) for m in g.shape)])


def kernel_matrix(op: RieszOperator) -> np.ndarray:
    """Dense quadrature matrix W with (I_alpha f)_i = sum_j W_ij f_j over domain cells."""
    g = op.domain.grid
    idx = np.argwhere(op.domain.mask)
    R = op.radius
    diff = idx[:, None, :] - idx[None, :, :] + R
    return op.weights[tuple(diff[..., a] for a in range(g.n))]


def fundamental_potential(f: GridFunction, s: float) -> GridFunction:
    """F_s * f = K_{n,s} I_s f over the whole grid."""
    op = riesz_operator(s, whole_grid(f.grid))
    return riesz_apply(op, f) * kernel_constant(f.grid.n, s)


def riesz_vs_fundamental(f: GridFunction, s: float, tail: bool = True) -> float:
    """Relative L2 residual of (-Delta)^(s/2)(F_s * f) = f on supp f.

    F_s * f is only available on the grid box; the operator's response to the
    part outside the box is added back (``tail``) by quadrature over the exterior.
    """
    norm = l2_norm(f)
    if norm == 0:
        return 0.0
    g = f.grid
    T = fundamental_potential(f, s)
    lap = fraclap_spectral(T, s).values
    supp = f.values != 0
    if tail:
        c = exterior_kernel_constant(g.n, s)
        if c != 0:
            lap = lap.copy()
            lap[supp] += c * _exterior_response(f, s, g.points()[supp])
    res = np.where(supp, lap - f.values, 0.0)
    return float(np.sqrt(np.sum(res ** 2) * g.cell_volume) / norm)


def _exterior_nodes(grid, q_face=24, q_radial=40):
    """Quadrature nodes/weights covering R^n minus the grid box.

    y = c + lam (p - c) with p on a face of the box and lam = 1/t, t in (0, 1).
    """
    n = grid.n
    lo, hi = grid.lower, grid.upper
    c = (lo + hi) / 2
    half = (hi - lo) / 2
    xt, wt = leggauss(q_radial)
    t = 0.5 * (xt + 1)
    wt = 0.5 * wt
    xf, wf = leggauss(q_face)
    nodes, weights = [], []
    for j in range(n):
        others = [i for i in range(n) if i != j]
        if n == 1:
            face_pts = np.zeros((1, 0))
            face_w = np.ones(1)
        elif n == 2:
            face_pts = (c[others[0]] + half[others[0]] * xf)[:, None]
            face_w = half[others[0]] * wf
        else:
            a, b = others
            A, B = np.meshgrid(c[a] + half[a] * xf, c[b] + half[b] * xf, indexing="ij")
            face_pts = np.stack([A.ravel(), B.ravel()], axis=1)
            face_w = np.outer(half[a] * wf, half[b] * wf).ravel()
        for sign in (-1.0, 1.0):
            p = np.empty((len(face_w), n))
            p[:, j] = c[j] + sign * half[j]
            for col, i in enumerate(others):
                p[:, i] = face_pts[:, col]
            lam = 1.0 / t
            y = c + lam[:, None, None] * (p[None, :, :] - c)
            # dy = lam^(n-1) (p - c).nu dlam dS, dlam = dt / t^2
            jac = (lam ** (n - 1) / t ** 2)[:, None] * half[j] * face_w[None, :]
            nodes.append(y.reshape(-1, n))
            weights.append((wt[:, None] * jac).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _exterior_response(f: GridFunction, s: float, x: np.ndarray, budget: int = 4_000_000) -> np.ndarray:
    """int over the exterior of the box of (F_s * f)(y) |x - y|^(-n-s) dy at points x."""
    g = f.grid
    n = g.n
    K = kernel_constant(n, s)
    supp = f.values != 0
    z = g.points()[supp]
    fz = f.values[supp] * g.cell_volume
    y, w = _exterior_nodes(g, q_face=24 if n < 3 else 12, q_radial=40 if n < 3 else 24)
    chunk = max(1, budget // max(len(z), len(y)))
    Ty = np.empty(len(y))
    for i in range(0, len(y), chunk):
        d = np.linalg.norm(y[i:i + chunk, None, :] - z[None, :, :], axis=-1)
        Ty[i:i + chunk] = K * (d ** (s - n)) @ fz
    out = np.empty(len(x))
    for i in range(0, len(x), chunk):
        d = np.linalg.norm(x[i:i + chunk, None, :] - y[None, :, :], axis=-1)
        out[i:i + chunk] = (d ** (-n - s)) @ (w * Ty)
    return out
