"""Variational solver for (-Delta)^(n/2) u = K e^(n u) on a bounded domain.

Minimizes F(u) = Lambda ||(-Delta)^(n/4) u||^2 - log int_Omega K (e^(n u) - 1)
over the span of smooth bumps supported in Omega.  Writing u = sum a_i phi_i,

    ||(-Delta)^(n/4) u||^2 = a^T M a,   M_ij = <(-Delta)^(n/2) phi_i, phi_j>,

and the gradient is 2 Lambda M a - (n / S) P(a) with S = int K (e^(nu) - 1) and
P_i = int K e^(nu) phi_i.  Descent uses the M^-1 preconditioned gradient with
Armijo backtracking.  At a critical point (-Delta)^(n/2) u = mu K e^(nu) in the
Galerkin sense with mu = n / (2 Lambda S), so v = u + log(mu)/n solves the
equation itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .constants import sharp_constants
from .errors import ConfigurationError, DomainError, SolverError, UsageError
from .fraclap import fraclap_spectral
from .grid import Domain, GridFunction, make_ball_domain, smooth_bump


@dataclass(frozen=True, eq=False)
class QCurvProblem:
    domain: Domain
    K: GridFunction
    p: float
    Lambda: float
    basis: tuple                                   # GridFunctions vanishing off Omega
    stiffness: np.ndarray = field(repr=False)      # M
    mass: np.ndarray = field(repr=False)           # <phi_i, phi_j>

    @property
    def n(self) -> int:
        return self.domain.grid.n

    @property
    def coercivity_threshold(self) -> float:
        """n^2 p' / (4 alpha_{n,2})."""
        c = sharp_constants(self.n, 2.0)
        pc = self.p / (self.p - 1.0)
        return self.n ** 2 * pc / (4.0 * c.alpha_np)

    def field(self, coeffs) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, float), self._stack, axes=1)

    @property
    def _stack(self):
        return np.stack([b.values for b in self.basis])


@dataclass(frozen=True, eq=False)
class QCurvSolution:
    coeffs: np.ndarray
    u0: GridFunction
    multiplier: float
    shift: float
    energies: tuple
    gradient_norms: tuple
    iterations: int
    converged: bool
    path: tuple = field(default=(), repr=False)   # accepted coefficient vectors


def bump_basis(domain: Domain, count: int) -> tuple:
    """Smooth bumps on a lattice of ``count`` points per axis inside the domain's bounding box.

    Each bump has radius twice the lattice spacing; bumps not contained in Omega are dropped.
    """
    g = domain.grid
    idx = np.argwhere(domain.mask)
    lo = g.points()[tuple(idx.min(axis=0))]
    hi = g.points()[tuple(idx.max(axis=0))]
    sp = (hi - lo) / (count + 1)
    radius = 2.0 * float(np.min(sp))
    centers = np.stack(np.meshgrid(*[lo[a] + sp[a] * np.arange(1, count + 1) for a in range(g.n)],
                                   indexing="ij"), axis=-1).reshape(-1, g.n)
    out = []
    for c in centers:
        if not g.contains_ball(c, radius):
            continue
        b = smooth_bump(g, center=c, radius=radius)
        if np.any(b.values[~domain.mask] != 0) or not np.any(b.values):
            continue
        out.append(b / float(np.max(b.values)))
    if not out:
        raise ConfigurationError("no basis function fits inside the domain")
    return tuple(out)


def make_problem(domain: Domain, K: GridFunction, p: float = 2.0, Lambda: float = 1.0,
                 basis=None, basis_count: int = 31) -> QCurvProblem:
    n = domain.grid.n
    if K.grid != domain.grid:
        raise UsageError("K and domain live on different grids")
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")
    if not np.any(K.values[domain.mask] != 0):
        raise DomainError("curvature K vanishes on the domain")
    basis = bump_basis(domain, basis_count) if basis is None else tuple(basis)
    if len(basis) > 256:
        raise ConfigurationError("basis dimension above 256")
    for b in basis:
        if np.any(b.values[~domain.mask] != 0):
            raise ConfigurationError("basis functions must vanish outside the domain")
    w = domain.grid.cell_volume
    stack = np.stack([b.values.ravel() for b in basis])
    lap = np.stack([fraclap_spectral(b, float(n)).values.ravel() for b in basis])
    M = w * lap @ stack.T
    M = 0.5 * (M + M.T)
    G = w * stack @ stack.T
    prob = QCurvProblem(domain, K, float(p), float(Lambda), basis, M, G)
    if not Lambda > prob.coercivity_threshold:
        raise DomainError(f"Lambda = {Lambda} does not exceed the coercivity threshold "
                          f"{prob.coercivity_threshold:.6g}")
    return prob


def _log_argument(prob, u):
    d = prob.domain
    n = prob.n
    return float(np.sum((prob.K.values * np.expm1(n * u))[d.mask]) * d.grid.cell_volume)


def qcurv_energy(prob: QCurvProblem, coeffs) -> float:
    """F(u); returns +inf when u lies outside the admissible set (log argument <= 0)."""
    a = np.asarray(coeffs, float)
    S = _log_argument(prob, prob.field(a))
    if not S > 0:
        return math.inf
    return float(prob.Lambda * a @ prob.stiffness @ a - math.log(S))


def _gradient(prob, a):
    u = prob.field(a)
    d = prob.domain
    w = d.grid.cell_volume
    S = _log_argument(prob, u)
    weight = np.where(d.mask, prob.K.values * np.exp(prob.n * u), 0.0).ravel()
    P = w * np.stack([b.values.ravel() for b in prob.basis]) @ weight
    return 2 * prob.Lambda * prob.stiffness @ a - prob.n / S * P, S, P


def feasible_start(prob: QCurvProblem) -> np.ndarray:
    """Small multiple of a basis function (or their sum) with positive log argument."""
    m = len(prob.basis)
    candidates = [np.ones(m)] + [np.eye(m)[i] for i in np.argsort(
        [-float(np.sum((prob.K.values * b.values)[prob.domain.mask])) for b in prob.basis])]
    for c in candidates:
        for t in (0.1, 0.01, 1.0, 1e-3, 3.0):
            if _log_argument(prob, prob.field(t * c)) > 0:
                return t * c
    raise ConfigurationError("no admissible starting point: int K (e^(nu) - 1) <= 0 for every trial")


def qcurv_minimize(prob: QCurvProblem, init=None, tol: float = 1e-8,
                   maxiter: int = 2000) -> QCurvSolution:
    """Preconditioned gradient descent with Armijo backtracking; tol bounds the gradient max-norm."""
    a = feasible_start(prob) if init is None else np.asarray(init, float)
    F = qcurv_energy(prob, a)
    if not math.isfinite(F):
        raise ConfigurationError("initial point lies outside the admissible set")
    chol = sla.cho_factor(prob.stiffness)
    energies, gnorms, path = [F], [], [a.copy()]
    converged = False
    it = 0
    for it in range(1, maxiter + 1):
        g, S, P = _gradient(prob, a)
        gnorms.append(float(np.max(np.abs(g))))
        if gnorms[-1] <= tol:
            converged = True
            break
        d = -sla.cho_solve(chol, g) / (2 * prob.Lambda)
        slope = float(g @ d)
        step = 1.0
        while True:
            trial = a + step * d
            Ft = qcurv_energy(prob, trial)
            if Ft <= F + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-14:
                raise SolverError("line search failed", energy=F, gradient=gnorms[-1])
        if Ft > F:
            raise SolverError("energy increased on an accepted step", before=F, after=Ft)
        a, F = trial, Ft
        energies.append(F)
        path.append(a.copy())
    u = prob.field(a)
    S = _log_argument(prob, u)
    mu = prob.n / (2 * prob.Lambda * S)
    u0 = GridFunction(prob.domain.grid, np.where(prob.domain.mask, u, 0.0))
    return QCurvSolution(a, u0, mu, math.log(mu) / prob.n, tuple(energies), tuple(gnorms), it,
                         converged, tuple(path))


def qcurv_residual(sol: QCurvSolution, prob: QCurvProblem, coeffs=None) -> float:
    """Relative L2(Omega) norm of the Galerkin projection of (-Delta)^(n/2) v - K e^(n v).

    v = u + shift; constants are annihilated by the operator, so the projected
    components are M a - mu P(a).  ``coeffs`` overrides the solution's coefficients.
    """
    a = sol.coeffs if coeffs is None else np.asarray(coeffs, float)
    _, S, P = _gradient(prob, a)
    rhs = sol.multiplier * P
    b = prob.stiffness @ a - rhs
    G = sla.cho_factor(prob.mass)
    num = float(b @ sla.cho_solve(G, b))
    den = float(rhs @ sla.cho_solve(G, rhs))
    return math.sqrt(max(num, 0.0) / den) if den > 0 else math.inf


def coercivity_fit(prob: QCurvProblem, directions=5, seed: int = 0,
                   scales=np.geomspace(0.01, 30.0, 40)) -> dict:
    """Energy along random rays and the constant C with F(u) >= (Lambda - threshold)||u||^2 - C.

    Returns the ray energies (which must grow without bound) and the fitted C.
    """
    rng = np.random.default_rng(seed)
    m = len(prob.basis)
    gap = prob.Lambda - prob.coercivity_threshold
    C = -math.inf
    rays = []
    for _ in range(directions):
        v = np.abs(rng.standard_normal(m))
        v /= math.sqrt(v @ prob.stiffness @ v)
        E = []
        for t in scales:
            Ft = qcurv_energy(prob, t * v)
            E.append(Ft)
            if math.isfinite(Ft):
                C = max(C, gap * t * t - Ft)
        rays.append(E)
    return {"gap": gap, "C": C, "scales": list(map(float, scales)), "energies": rays}


def coercivity_violations(prob: QCurvProblem, coeff_path, C: float, rel: float = 0.01) -> int:
    """Iterates with F(u) < (Lambda - threshold)||u||^2 - C by more than rel |C|."""
    gap = prob.Lambda - prob.coercivity_threshold
    bad = 0
    for a in coeff_path:
        a = np.asarray(a, float)
        F = qcurv_energy(prob, a)
        if F < gap * float(a @ prob.stiffness @ a) - C - rel * abs(C):
            bad += 1
    return bad


def interval_problem(h: float = 2.0 ** -8, K=1.0, p: float = 2.0, Lambda: float = 1.0,
                     basis_count: int = 31) -> QCurvProblem:
    """Omega = (-1, 1) in one dimension; K a constant or a grid function."""
    dom = make_ball_domain(1, 1.0, h)
    Kf = K if isinstance(K, GridFunction) else GridFunction(dom.grid, np.full(dom.grid.shape, float(K)))
    return make_problem(dom, Kf, p, Lambda, basis_count=basis_count)
