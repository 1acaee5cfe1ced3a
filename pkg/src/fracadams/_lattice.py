"""Integrals of |z|^beta over lattice cells and cube exteriors.

Everything here lives on the unit lattice (h = 1); callers rescale by the
homogeneity h^(n + beta).  Cell k is the unit cube centred at the integer
vector k.  Exact cell integrals use the divergence theorem

    (n + beta) int_box |z|^beta dz = sum over faces of int_face |z|^beta (z . nu) dS

with Gauss-Legendre quadrature on the faces, which only ever sees smooth
integrands.  Far cells use tensor Gauss rules directly.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

NEAR = 4       # cells with |k|_inf <= NEAR integrated through their faces
MID = 32       # 4-point tensor Gauss up to here, 2-point beyond


def _gauss(q):
    x, w = leggauss(q)
    return x, w


def box_power_integral(lo, hi, beta, q=24):
    """int over each box [lo, hi] of |z|^beta; lo, hi have shape (m, n). Needs n + beta != 0."""
    lo = np.atleast_2d(np.asarray(lo, float))
    hi = np.atleast_2d(np.asarray(hi, float))
    m, n = lo.shape
    if n == 1:
        def F(x):
            return np.sign(x) * np.abs(x) ** (beta + 1) / (beta + 1)
        return F(hi[:, 0]) - F(lo[:, 0])
    x, w = _gauss(q)
    total = np.zeros(m)
    for j in range(n):
        others = [i for i in range(n) if i != j]
        mids = [(lo[:, i] + hi[:, i]) / 2 for i in others]
        halves = [(hi[:, i] - lo[:, i]) / 2 for i in others]
        if n == 2:
            t = mids[0][:, None] + halves[0][:, None] * x[None, :]
            wt = halves[0][:, None] * w[None, :]
            r2 = t ** 2
        else:
            t1 = mids[0][:, None, None] + halves[0][:, None, None] * x[None, :, None]
            t2 = mids[1][:, None, None] + halves[1][:, None, None] * x[None, None, :]
            wt = (halves[0] * halves[1])[:, None, None] * (w[:, None] * w[None, :])[None]
            r2 = t1 ** 2 + t2 ** 2
        for c, sign in ((hi[:, j], 1.0), (lo[:, j], -1.0)):
            cc = c.reshape((m,) + (1,) * (n - 1))
            vals = (cc ** 2 + r2) ** (beta / 2)
            face = np.sum((vals * wt).reshape(m, -1), axis=1)
            total += sign * c * face
    return total / (n + beta)


def _tensor_gauss_cells(k, beta, q):
    """int over unit cells centred at integer rows of k of |z|^beta, q-point Gauss per axis."""
    n = k.shape[1]
    x, w = _gauss(q)
    x = 0.5 * x
    w = 0.5 * w
    out = np.zeros(len(k))
    for combo in itertools.product(range(q), repeat=n):
        off = x[list(combo)]
        wt = np.prod(w[list(combo)])
        z2 = np.sum((k + off[None, :]) ** 2, axis=1)
        out += wt * z2 ** (beta / 2)
    return out


def _octant_offsets(n, R):
    rng = np.arange(R + 1)
    grids = np.meshgrid(*([rng] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


@lru_cache(maxsize=64)
def _octant_cell_integrals(n, beta, R, exclude_origin):
    k = _octant_offsets(n, R)
    kinf = np.max(k, axis=1)
    out = np.empty(len(k))
    near = kinf <= NEAR
    kn = k[near].astype(float)
    if exclude_origin:
        origin = np.all(kn == 0, axis=1)
        vals = np.zeros(len(kn))
        vals[~origin] = box_power_integral(kn[~origin] - 0.5, kn[~origin] + 0.5, beta)
    else:
        vals = box_power_integral(kn - 0.5, kn + 0.5, beta)
    out[near] = vals
    for sel, q in ((~near & (kinf <= MID), 4), (kinf > MID, 2)):
        if np.any(sel):
            chunks = np.array_split(np.nonzero(sel)[0], max(1, int(sel.sum()) // 200000 + 1))
            for idx in chunks:
                out[idx] = _tensor_gauss_cells(k[idx].astype(float), beta, q)
    return out.reshape((R + 1,) * n)


def _mirror(octant):
    """Extend an array indexed by |k_i| (k_i >= 0) to all signs, centre at index R."""
    arr = octant
    for ax in range(arr.ndim):
        rev = np.flip(np.take(arr, np.arange(1, arr.shape[ax]), axis=ax), axis=ax)
        arr = np.concatenate([rev, arr], axis=ax)
    return arr


def cell_power_integrals(n, beta, R, exclude_origin=False):
    """Array over k in [-R, R]^n of int_{cell k} |z|^beta dz (unit lattice).

    With exclude_origin the centre entry is 0 (used when beta <= -n).
    """
    arr = _mirror(_octant_cell_integrals(int(n), float(beta), int(R), bool(exclude_origin)))
    return arr


def self_cell_integral(n, beta):
    """int over the unit cell centred at 0 of |z|^beta (needs beta > -n)."""
    return float(box_power_integral(np.full((1, n), -0.5), np.full((1, n), 0.5), beta)[0])


@lru_cache(maxsize=64)
def _face_average(n, beta):
    """int over [-1,1]^(n-1) of (1 + |t|^2)^(beta/2) dt."""
    if n == 1:
        return 1.0
    x, w = _gauss(48)
    if n == 2:
        return float(np.sum(w * (1 + x ** 2) ** (beta / 2)))
    return float(np.sum(w[:, None] * w[None, :] * (1 + x[:, None] ** 2 + x[None, :] ** 2) ** (beta / 2)))


def cube_exterior_integral(n, beta, a):
    """int over |z|_inf > a of |z|^beta dz for beta < -n (any a > 0)."""
    a = np.asarray(a, float)
    return 2 * n * a ** (n + beta) * _face_average(n, beta) / (-n - beta)


def _centered_index(R, n):
    return (R,) * n


@lru_cache(maxsize=32)
def _lattice_weights_unit(n, sigma, R):
    beta = 2.0 - n - sigma
    cells = cell_power_integrals(n, beta, R, exclude_origin=True)
    k = np.indices((2 * R + 1,) * n) - R
    k2 = np.sum(k.astype(float) ** 2, axis=0)
    a = np.zeros_like(cells)
    nz = k2 > 0
    a[nz] = cells[nz] / k2[nz]
    bonus = self_cell_integral(n, beta) / (2 * n)
    for j in range(n):
        for sgn in (-1, 1):
            idx = [R] * n
            idx[j] += sgn
            a[tuple(idx)] += bonus
    a.flags.writeable = False
    return a


def lattice_weights(n, sigma, R, h=1.0):
    """Positive weights a_k (k in [-R, R]^n, a_0 = 0) of the discrete operator

        L u(x) = sum_k a_k (u(x) - u(x + k h))  ~  pv-int (u(x) - u(y)) |x - y|^(-n-sigma) dy,

    exact on quadratics: a_k = int_{cell k} |z|^(2-n-sigma) dz / |k|^2, plus the
    self-cell contribution spread over the nearest neighbours.
    """
    return _lattice_weights_unit(int(n), float(sigma), int(R)) * h ** (-sigma)


def lattice_tail(n, sigma, R, h=1.0):
    """Kernel mass beyond the stencil: int over |z|_inf > (R + 1/2) h of |z|^(-n-sigma)."""
    return float(cube_exterior_integral(n, -n - sigma, (R + 0.5) * h))


def riesz_cell_weights(n, alpha, R, h=1.0):
    """int_{cell k} |z|^(alpha-n) dz for k in [-R, R]^n on spacing h."""
    return cell_power_integrals(int(n), float(alpha - n), int(R)) * h ** alpha
