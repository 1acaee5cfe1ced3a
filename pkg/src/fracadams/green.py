"""Green functions of (-Delta)^(s/2) on bounded domains.

For 0 < sigma < 2 the Dirichlet energy is discretized on the span of the
interior cell indicators with the positive lattice stencil of ``fraclap``:

    A = D I - [a_{i-j}]   (interior cells only),   D = total kernel mass.

A is a symmetric M-matrix.  Writing G(x, .) = F(x - .) - H(x, .) where H is the
discrete harmonic lift of the exterior datum F(x - .), the system A H = b with
b_i = sum over exterior lattice points of a_{i-z} F(x - z) is rewritten as

    A G(x, .) = psi(. - x),   psi(d) = D F(d) - sum_k a_k F(d + k) - tail(d),

with the placeholder F(0) = 0 at the singular cell.  psi is translation
invariant, so all right-hand sides come from one FFT convolution, and the
M-matrix property gives H >= 0, i.e. G <= F, for every source.

For sigma = 2 the lift is computed with the classical Laplacian; cells next to
the boundary use a ghost value extrapolated through the boundary crossing,
which keeps the matrix symmetric and an M-matrix.

Kernel rows store G(x_p, y_j) at cell centres with the cell average of
G(x_p, .) on the diagonal, so sum_j h^n G_pj g_j is a product rule for the
singular integral.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.signal import fftconvolve

from . import _lattice
from .constants import kernel_constant
from .errors import ConfigurationError, DomainError, SolverError, UsageError
from .fraclap import fraclap_spectral
from .grid import Domain, GridFunction

DENSE_LIMIT = 16000


@dataclass(frozen=True, eq=False)
class GreenOperator:
    s: float
    sigma: float
    k: int
    domain: Domain
    kernel: np.ndarray          # rows: sources, columns: all interior cells
    sources: np.ndarray         # row -> interior cell number
    weight: float               # quadrature weight h^n
    system: Optional["NonlocalSystem"] = field(default=None, repr=False)
    _correction: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def points(self) -> np.ndarray:
        return self.domain.interior_points()

    @property
    def complete(self) -> bool:
        return self.kernel.shape[0] == self.domain.count

    def apply(self, g: GridFunction) -> GridFunction:
        """int_Omega G(x, y) g(y) dy at every interior cell (zero outside Omega)."""
        dom = self.domain
        if g.grid != dom.grid:
            raise UsageError("g and operator live on different grids")
        gin = g.values[dom.mask]
        if self.system is not None and (self.sigma == 2 and self.k == 0 or not self.complete):
            vals = self.system.apply_green(gin)
        elif self.complete:
            vals = np.empty(dom.count)
            vals[self.sources] = self.weight * (self.kernel @ gin)
            if self._correction is not None:
                vals += _masked_conv(self._correction, gin, dom)
        else:
            raise ConfigurationError("operator holds only some kernel rows; cannot apply")
        out = np.zeros(dom.grid.shape)
        out[dom.mask] = vals
        return GridFunction(dom.grid, out)

    def apply_rows(self, g: GridFunction) -> np.ndarray:
        """int_Omega G(x_p, y) g(y) dy for the stored source rows only."""
        gin = g.values[self.domain.mask]
        vals = self.weight * (self.kernel @ gin)
        if self._correction is not None:
            full = _masked_conv(self._correction, gin, self.domain)
            vals = vals + full[self.sources]
        return vals


def _masked_conv(ker, vin, dom):
    full = np.zeros(dom.grid.shape)
    full[dom.mask] = vin
    R = (ker.shape[0] - 1) // 2
    out = fftconvolve(full, ker, mode="full")[tuple(slice(R, R + m) for m in dom.grid.shape)]
    return out[dom.mask]


def _bbox(dom):
    idx = np.argwhere(dom.mask)
    lo = idx.min(axis=0)
    hi = idx.max(axis=0)
    return idx, lo, hi


# ----------------------------------------------------------------------------
# nonlocal Dirichlet system, 0 < sigma < 2

class NonlocalSystem:
    """Galerkin matrix and source terms for the nonlocal Dirichlet problem on one domain.

    Everything is assembled on the unit lattice and rescaled: A_h = h^-sigma A,
    F_h = K h^(sigma-n) F, psi_h = K h^-n psi.
    """

    def __init__(self, domain: Domain, sigma: float, stencil_factor: int = 4):
        g = domain.grid
        n = g.n
        if not (0 < sigma < 2):
            raise DomainError(f"sigma must lie in (0, 2), got {sigma}")
        if not sigma < n:
            raise DomainError(f"need sigma < n, got sigma={sigma}, n={n}")
        self.domain, self.sigma, self.n, self.h = domain, float(sigma), n, g.h
        self.K = kernel_constant(n, sigma)
        idx, lo, hi = _bbox(domain)
        self.idx = idx
        self.extent = hi - lo + 1
        E = int(self.extent.max())
        self.E = E
        R = stencil_factor * E
        self.R = R
        a = _lattice.lattice_weights(n, sigma, R)
        self.D = float(a.sum() + _lattice.lattice_tail(n, sigma, R))
        self.a_inner = a[tuple(slice(R - (E - 1), R + E) for _ in range(n))]
        self.psi = self._psi(a)
        self._chol = None

    def _psi(self, a):
        n, R, E, s = self.n, self.R, self.E, self.sigma
        span = E - 1 + R
        d = np.indices((2 * span + 1,) * n) - span
        r2 = np.sum(d.astype(float) ** 2, axis=0)
        F = np.zeros(r2.shape)
        nz = r2 > 0
        F[nz] = r2[nz] ** ((s - n) / 2)
        conv = fftconvolve(F, a, mode="valid")
        core = tuple(slice(R, R + 2 * E - 1) for _ in range(n))
        Fd = F[core]
        dd = r2[core]
        rr = R + 0.5
        tail = (_lattice.cube_exterior_integral(n, -2 * n, rr)
                + dd / (2 * n) * (s - n) * (s - 2) * _lattice.cube_exterior_integral(n, -2 * n - 2, rr))
        return self.D * Fd - conv - tail

    # scaled quantities -------------------------------------------------------
    @property
    def f_scale(self):
        return self.K * self.h ** (self.sigma - self.n)

    def kernel_unit(self, d):
        r2 = np.sum(np.asarray(d, float) ** 2, axis=-1)
        out = np.zeros(r2.shape)
        nz = r2 > 0
        out[nz] = r2[nz] ** ((self.sigma - self.n) / 2)
        return out

    def matrix(self) -> np.ndarray:
        diff = self.idx[:, None, :] - self.idx[None, :, :] + (self.E - 1)
        A = -self.a_inner[tuple(diff[..., j] for j in range(self.n))]
        np.fill_diagonal(A, self.D)
        return A

    def psi_columns(self, sources) -> np.ndarray:
        """Psi[i, p] = psi(y_i - x_p) on the unit lattice."""
        diff = self.idx[:, None, :] - self.idx[None, sources, :] + (self.E - 1)
        return self.psi[tuple(diff[..., j] for j in range(self.n))]

    def matvec(self, V):
        """A V on the unit lattice for V of shape (count,) or (count, m)."""
        V = np.asarray(V)
        cols = V[:, None] if V.ndim == 1 else V
        out = np.empty_like(cols)
        for c in range(cols.shape[1]):
            out[:, c] = self.D * cols[:, c] - _masked_conv(self.a_inner, cols[:, c], self.domain)
        return out[:, 0] if V.ndim == 1 else out

    def solve(self, B, rtol=1e-10):
        """A^-1 B on the unit lattice: Cholesky at desk sizes, conjugate gradients beyond."""
        count = self.domain.count
        if count <= DENSE_LIMIT:
            if self._chol is None:
                A = self.matrix()
                try:
                    self._chol = sla.cho_factor(A, lower=False, overwrite_a=True, check_finite=False)
                except np.linalg.LinAlgError as exc:
                    raise SolverError("Galerkin matrix is not positive definite",
                                      condition=float(np.linalg.cond(self.matrix()))) from exc
            return sla.cho_solve(self._chol, B, check_finite=False)
        return conjugate_gradient(self.matvec, B, diag=self.D, rtol=rtol)

    def green_raw(self, sources) -> np.ndarray:
        """G(x_p, y_i) at cell centres, with placeholder F(0) = 0 on the diagonal; shape (p, i)."""
        sol = self.solve(self.psi_columns(sources))
        return (self.f_scale * sol).T

    def apply_green(self, gin):
        """Product-rule application int G(x, y) g(y) dy at all interior cells without assembling G."""
        n, h = self.n, self.h
        w = h ** n
        E = self.E
        ker = _lattice.riesz_cell_weights(n, self.sigma, E - 1, h) * self.K
        d = np.indices((2 * E - 1,) * n) - (E - 1)
        F0 = self.f_scale * self.kernel_unit(np.moveaxis(d, 0, -1))
        psi = self.K * h ** (-n) * self.psi
        v = self.solve(gin[:, None] * h ** self.sigma)[:, 0]
        # sum_j G_raw[p, j] g_j = (Psi^T A^-1 g)_p and psi is even
        return (_masked_conv(ker, gin, self.domain) - w * _masked_conv(F0, gin, self.domain)
                + w * _masked_conv(psi, v, self.domain))


def conjugate_gradient(matvec, B, diag=None, rtol=1e-10, maxiter=20000):
    """Jacobi-preconditioned CG, run column-wise in lock step; B has shape (m,) or (m, k)."""
    B = np.asarray(B, float)
    one = B.ndim == 1
    Bm = B[:, None] if one else B
    Minv = 1.0 if diag is None else 1.0 / np.asarray(diag, float)
    if np.ndim(Minv) == 1:
        Minv = Minv[:, None]
    X = np.zeros_like(Bm)
    Rr = Bm.copy()
    Z = Minv * Rr
    P = Z.copy()
    rz = np.sum(Rr * Z, axis=0)
    bnorm = np.linalg.norm(Bm, axis=0)
    bnorm[bnorm == 0] = 1.0
    for it in range(maxiter):
        res = np.linalg.norm(Rr, axis=0) / bnorm
        if np.all(res <= rtol):
            break
        AP = matvec(P)
        pAp = np.sum(P * AP, axis=0)
        alpha = np.where(pAp > 0, rz / np.where(pAp > 0, pAp, 1), 0.0)
        X += alpha * P
        Rr -= alpha * AP
        Z = Minv * Rr
        rz_new = np.sum(Rr * Z, axis=0)
        P = Z + np.where(rz > 0, rz_new / np.where(rz > 0, rz, 1), 0.0) * P
        rz = rz_new
    else:
        raise SolverError("conjugate gradients did not converge", residual=float(res.max()),
                          iterations=maxiter)
    return X[:, 0] if one else X


# ----------------------------------------------------------------------------
# sigma = 2

class LaplaceSystem:
    """Dirichlet Laplacian on the interior cells with ghost-point boundary rows."""

    def __init__(self, domain: Domain):
        g = domain.grid
        self.domain, self.n, self.h = domain, g.n, g.h
        if self.n <= 2:
            raise DomainError(f"sigma = 2 needs n > 2 (the kernel |x|^(2-n) must decay), got n={self.n}")
        self.K = kernel_constant(self.n, 2.0)
        mask = domain.mask
        count = domain.count
        number = -np.ones(g.shape, dtype=np.int64)
        number[mask] = np.arange(count)
        idx = np.argwhere(mask)
        pts = g.points()[mask]
        rows, cols, vals = [], [], []
        diag = np.zeros(count)
        bnd_cell, bnd_point, bnd_coef = [], [], []
        for j in range(self.n):
            for sgn in (-1, 1):
                nb = idx.copy()
                nb[:, j] += sgn
                inside_box = (nb[:, j] >= 0) & (nb[:, j] < g.shape[j])
                nbc = np.clip(nb, 0, np.array(g.shape) - 1)
                nb_num = np.where(inside_box, number[tuple(nbc.T)], -1)
                interior = nb_num >= 0
                rows.append(np.nonzero(interior)[0])
                cols.append(nb_num[interior])
                diag[interior] += 1.0
                ext = np.nonzero(~interior)[0]
                step = np.zeros(self.n)
                step[j] = sgn * g.h
                theta = self._crossing(pts[ext], step)
                diag[ext] += 1.0 / theta
                bnd_cell.append(ext)
                bnd_point.append(pts[ext] + theta[:, None] * step)
                bnd_coef.append(1.0 / theta)
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        self.L = (sp.csr_matrix((-np.ones(len(r)), (r, c)), shape=(count, count))
                  + sp.diags(diag)) / g.h ** 2
        self.diag = diag / g.h ** 2
        self.bnd_cell = np.concatenate(bnd_cell)
        self.bnd_point = np.concatenate(bnd_point)
        self.bnd_coef = np.concatenate(bnd_coef) / g.h ** 2
        self._lu = None

    def _crossing(self, p, step, floor=1e-2):
        """Fraction theta in (0, 1] of the way to the neighbour where the boundary is crossed."""
        dist = self.domain.distance
        if dist is None or len(p) == 0:
            return np.ones(len(p))
        lo = np.zeros(len(p))
        hi = np.ones(len(p))
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            inside = dist(p + mid[:, None] * step) > 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return np.maximum(0.5 * (lo + hi), floor)

    def boundary_rhs(self, sources_pts) -> np.ndarray:
        """b[:, p] = sum over boundary crossings of F(x_p - b) / (theta h^2)."""
        count = self.domain.count
        out = np.zeros((count, len(sources_pts)))
        for p, x in enumerate(sources_pts):
            F = self.K / np.linalg.norm(self.bnd_point - x, axis=1) ** (self.n - 2)
            out[:, p] = np.bincount(self.bnd_cell, weights=self.bnd_coef * F, minlength=count)
        return out

    def apply_green(self, gin):
        return self.solve(gin)

    def solve(self, B, rtol=1e-10):
        if self.domain.count <= 60000:
            if self._lu is None:
                from scipy.sparse.linalg import splu
                self._lu = splu(self.L.tocsc())
            return self._lu.solve(np.asarray(B, float))
        return conjugate_gradient(lambda V: self.L @ V, B, diag=self.diag, rtol=rtol)


# ----------------------------------------------------------------------------
# public construction

def _sources_index(domain, sources):
    if sources is None:
        return np.arange(domain.count)
    src = np.asarray(sources, dtype=np.int64).ravel()
    if np.any(src < 0) or np.any(src >= domain.count):
        raise UsageError("source index out of range")
    return src


def _cell_average_diag(n, s, h, K):
    w0 = _lattice.riesz_cell_weights(n, s, 0, h).ravel()[0]
    return K * w0 / h ** n


def _correction_kernel(domain, s, K):
    """K (w_k - h^n |kh|^(s-n)) for k != 0: exact-cell minus midpoint weights."""
    g = domain.grid
    _, lo, hi = _bbox(domain)
    E = int((hi - lo + 1).max())
    w = _lattice.riesz_cell_weights(g.n, s, E - 1, g.h)
    d = np.indices(w.shape) - (E - 1)
    r = np.sqrt(np.sum(d.astype(float) ** 2, axis=0)) * g.h
    mid = np.zeros_like(w)
    nz = r > 0
    mid[nz] = g.h ** g.n * r[nz] ** (s - g.n)
    corr = K * (w - mid)
    corr[(E - 1,) * g.n] = 0.0
    return corr


def green_sigma(domain: Domain, sigma: float, sources=None,
                dense_limit: int = DENSE_LIMIT) -> GreenOperator:
    """Green operator of (-Delta)^(sigma/2), 0 < sigma <= 2, sigma < n.

    ``sources`` selects interior cells (by running number) whose kernel rows are
    assembled; by default all of them when the domain is small enough.
    """
    n = domain.grid.n
    h = domain.grid.h
    if not (0 < sigma <= 2):
        raise DomainError(f"sigma must lie in (0, 2], got {sigma}")
    if not sigma < n:
        raise DomainError(f"need sigma < n, got sigma={sigma}, n={n}")
    K = kernel_constant(n, sigma)
    if sources is None and domain.count > dense_limit:
        src = np.zeros(0, dtype=np.int64)
    else:
        src = _sources_index(domain, sources)
    diag = _cell_average_diag(n, sigma, h, K)
    if sigma < 2:
        system = NonlocalSystem(domain, sigma)
        G = system.green_raw(src) if len(src) else np.zeros((0, domain.count))
        # cell average on the diagonal: K w_0 / h^n - H(x, x) and G_raw(x, x) = -H(x, x)
        G[np.arange(len(src)), src] += diag
        return GreenOperator(float(sigma), float(sigma), 0, domain, G, src, h ** n, system,
                             _correction_kernel(domain, sigma, K))
    lap = LaplaceSystem(domain)
    pts = domain.interior_points()
    if sources is None:
        # the lift is resolved only for sources at least 4h inside
        deep = domain.boundary_distance()[domain.mask] >= 4 * h - 1e-12
        src = np.nonzero(deep)[0]
    H = lap.solve(lap.boundary_rhs(pts[src])).T if len(src) else np.zeros((0, domain.count))
    F = np.zeros_like(H)
    for p, i in enumerate(src):
        r = np.linalg.norm(pts - pts[i], axis=1)
        r[i] = 1.0
        F[p] = K / r ** (n - 2)
        F[p, i] = diag
    G = F - H
    return GreenOperator(2.0, 2.0, 0, domain, G, src, h ** n, lap,
                         _correction_kernel(domain, 2.0, K))


def green_compose(domain: Domain, s: float, **kw) -> GreenOperator:
    """Green operator of order s = 2k + sigma as G_2 o ... o G_2 o G_sigma."""
    n = domain.grid.n
    if not (0 < s < n):
        raise DomainError(f"need 0 < s < n, got s={s}, n={n}")
    k = int(math.ceil(s / 2.0) - 1)
    sigma = s - 2 * k
    base = green_sigma(domain, sigma, **kw)
    if k == 0:
        return base
    if not base.complete:
        raise ConfigurationError("composition needs every kernel row; domain too large")
    # G_2 acts through the discrete Dirichlet solve: sum_z h^n G_2(x, z) v(z) = (L^-1 v)(x)
    lap = LaplaceSystem(domain)
    kern = np.empty_like(base.kernel)
    kern[base.sources] = base.kernel
    for _ in range(k):
        kern = lap.solve(kern)
    return GreenOperator(float(s), float(sigma), k, domain, kern, np.arange(domain.count), base.weight)


def harmonic_lift(domain: Domain, sigma: float, x) -> GridFunction:
    """H(x, .): the discrete energy minimizer equal to F(x - .) outside Omega."""
    g = domain.grid
    if not (0 < sigma < 2):
        raise DomainError(f"sigma must lie in (0, 2), got {sigma}")
    as_index = isinstance(x, tuple) and all(isinstance(i, (int, np.integer)) for i in x)
    idx = tuple(int(i) for i in x) if as_index else g.index_of(x)
    if not domain.mask[idx]:
        raise ConfigurationError("source point is not an interior cell")
    if domain.boundary_distance()[idx] < 4 * g.h - 1e-12:
        raise ConfigurationError("source point closer than 4h to the boundary")
    number = np.cumsum(domain.mask.ravel()).reshape(g.shape) - 1
    p = int(number[idx])
    system = NonlocalSystem(domain, sigma)
    Graw = system.green_raw(np.array([p]))[0]
    xc = g.points()[idx]
    r = np.linalg.norm(g.points() - xc, axis=-1)
    F = np.zeros(g.shape)
    nz = r > 0
    F[nz] = system.K * r[nz] ** (sigma - g.n)
    H = F.copy()
    H[domain.mask] = F[domain.mask] - Graw
    return GridFunction(g, H)


def green_represent(op: GreenOperator, u: GridFunction) -> GridFunction:
    """r = u - int_Omega G(., y) (-Delta)^(s/2) u(y) dy on Omega (zero elsewhere).

    When only some kernel rows are stored the residual is reported on those rows.
    """
    dom = op.domain
    if u.grid != dom.grid:
        raise UsageError("u and operator live on different grids")
    lap = fraclap_spectral(u, op.s)
    g = lap.with_values(np.where(dom.mask, lap.values, 0.0))
    out = np.zeros(dom.grid.shape)
    if op.complete or op.system is not None and op.kernel.shape[0] == 0:
        Gg = op.apply(g).values
        out[dom.mask] = u.values[dom.mask] - Gg[dom.mask]
    else:
        vals = op.apply_rows(g)
        cells = np.argwhere(dom.mask)[op.sources]
        out[tuple(cells.T)] = u.values[tuple(cells.T)] - vals
    return GridFunction(dom.grid, out)


def relative_residual(op: GreenOperator, u: GridFunction, margin: float = 4.0) -> float:
    """Relative L2 size of green_represent over cells at distance >= margin*h from the boundary."""
    r = green_represent(op, u)
    dom = op.domain
    keep = dom.mask & (dom.boundary_distance() >= margin * dom.grid.h - 1e-12)
    if not op.complete and op.kernel.shape[0] > 0:
        rows = np.zeros(dom.grid.shape, bool)
        rows[tuple(np.argwhere(dom.mask)[op.sources].T)] = True
        keep &= rows
    den = math.sqrt(np.sum(u.values[keep] ** 2))
    return 0.0 if den == 0 else float(math.sqrt(np.sum(r.values[keep] ** 2)) / den)


def kernel_bound_violations(op: GreenOperator, tol: float = 1e-8, chunk: int = 512) -> dict:
    """Largest violations of 0 <= G(x, y) <= K |x - y|^(s-n) over off-diagonal stored pairs."""
    pts = op.points
    n = op.domain.grid.n
    K = kernel_constant(n, op.s)
    worst_low = math.inf
    worst_high = -math.inf
    count = 0
    for start in range(0, len(op.sources), chunk):
        rows = op.sources[start:start + chunk]
        r = np.linalg.norm(pts[rows][:, None, :] - pts[None, :, :], axis=-1)
        off = r > 0
        F = np.where(off, K * np.where(off, r, 1.0) ** (op.s - n), np.inf)
        G = op.kernel[start:start + chunk]
        worst_low = min(worst_low, float(np.min(np.where(off, G, np.inf))))
        worst_high = max(worst_high, float(np.max(np.where(off, G - F, -np.inf))))
        count += int(np.sum((off & ((G < -tol) | (G - F > tol)))))
    return {"pairs": int(len(op.sources) * (len(pts) - 1)), "violations": count,
            "min_G": worst_low, "max_G_minus_F": worst_high}


def symmetry_defect(op: GreenOperator) -> float:
    """||G - G^T|| / ||G|| over the stored square block (off-diagonal)."""
    sub = op.kernel[:, op.sources]
    off = sub - np.diag(np.diag(sub))
    return float(np.linalg.norm(off - off.T) / np.linalg.norm(off))


def save_green_operator(op: GreenOperator, path) -> list:
    """Dense kernel as ``<path>.bin`` (float64, rows = sources) plus a JSON header.

    The header carries the grid, the interior cell indices and the source rows.
    """
    path = Path(path)
    data = path.with_suffix(".bin")
    data.write_bytes(np.ascontiguousarray(op.kernel, dtype="<f8").tobytes())
    header = {"grid": op.domain.grid.metadata(), "s": op.s, "sigma": op.sigma, "k": op.k,
              "weight": op.weight, "rows": int(op.kernel.shape[0]), "cols": int(op.kernel.shape[1]),
              "sources": op.sources.tolist(),
              "cells": np.argwhere(op.domain.mask).tolist(), "data": data.name}
    hdr = path.with_suffix(".json")
    hdr.write_text(json.dumps(header, sort_keys=True) + "\n")
    return [hdr, data]


def load_green_kernel(path):
    """(header, kernel) written by save_green_operator."""
    path = Path(path)
    hdr = path.with_suffix(".json")
    meta = json.loads(hdr.read_text())
    K = np.frombuffer((hdr.parent / meta["data"]).read_bytes(), dtype="<f8")
    return meta, K.reshape(meta["rows"], meta["cols"])
