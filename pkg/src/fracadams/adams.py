"""Exponential functionals, concentrating families and the disjoint-support probe.

Extremal families follow the classical truncated-power construction: on the
annulus delta <= |y| <= rho the source is c |y|^(-n/p), normalized to unit
Lorentz norm, and the candidate is u = theta K_{n,n/p} I_{n/p} f with theta the
radial cutoff of ``grid.cutoff_theta``.

Two discretizations are available.  On a uniform grid the annulus edges are
smoothed over one cell and the potential is ``riesz_apply``.  In one dimension
a graded mesh (geometric cells around the origin) reaches concentration scales
far below any uniform spacing; f is the cell average of the profile and the
potential is integrated exactly cell by cell.  The graded mesh is what makes
the above-threshold growth visible at desk scale, because the growth rate is
only a small power of 1/delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import exterior_kernel_constant, kernel_constant, sharp_constants
from .errors import ConfigurationError, DomainError
from .fraclap import fraclap_spectral
from .grid import (Domain, Grid, GridFunction, cutoff_profile, cutoff_theta, make_ball_domain,
                   smooth_bump, smoothstep, whole_grid)
from .lorentz import LorentzParams, lorentz_norm, lorentz_steps
from .riesz import riesz_apply, riesz_operator

EXP_CAP = 700.0
GROWTH_RATIO = 1.5
PLATEAU_RATIO = 1.05
DIVERGENCE_FACTOR = 1e3


# ----------------------------------------------------------------------------
# the functional

def mt_values(values, weights, beta: float, expo: float):
    """(sum_i w_i exp(beta |u_i|^expo), saturated) with exponents capped at EXP_CAP."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if not expo >= 1:
        raise DomainError(f"exponent must be >= 1, got {expo}")
    arg = beta * np.abs(np.asarray(values, float)) ** expo
    saturated = bool(np.any(arg > EXP_CAP))
    total = float(np.sum(np.asarray(weights, float) * np.exp(np.minimum(arg, EXP_CAP))))
    return total, saturated


def mt_functional(u: GridFunction, dom: Domain, beta: float, expo: float,
                  report: bool = False):
    """Midpoint rule for int_Omega exp(beta |u|^expo)."""
    val, sat = mt_values(u.values[dom.mask], u.grid.cell_volume, beta, expo)
    if report:
        return {"value": val, "saturated": sat, "measure": dom.measure}
    return val


# ----------------------------------------------------------------------------
# extremal families

@dataclass(frozen=True, eq=False)
class ExtremalMember:
    delta: float
    scale: float            # c in f = c |y|^(-n/p)
    f: np.ndarray           # source on the family's cells
    u: np.ndarray           # candidate on the family's cells

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.u)))


@dataclass(frozen=True, eq=False)
class ExtremalFamily:
    n: int
    params: LorentzParams
    rho: float
    mesh: str                     # "graded" or "uniform"
    points: np.ndarray            # cell centres (graded: |x| on the half line)
    weights: np.ndarray           # cell measures (graded: both mirror cells)
    measure: float                # |Omega| with Omega the unit ball
    members: tuple
    grid: Optional[Grid] = field(default=None, repr=False)
    domain: Optional[Domain] = field(default=None, repr=False)

    def __len__(self):
        return len(self.members)

    def source(self, j: int) -> GridFunction:
        return self._on_grid(self.members[j].f)

    def candidate(self, j: int) -> GridFunction:
        return self._on_grid(self.members[j].u)

    def _on_grid(self, vals):
        if self.grid is None:
            raise ConfigurationError("graded families have no uniform grid representation")
        return GridFunction(self.grid, vals.reshape(self.grid.shape))

    def functional(self, j: int, beta: float, expo: Optional[float] = None):
        """(E_beta(u_j), saturated) over the unit ball."""
        e = self.params.q_conj if expo is None else expo
        u = self.members[j].u
        if self.domain is not None:
            m = self.domain.mask.ravel()
            return mt_values(u.ravel()[m], self.weights.ravel()[m], beta, e)
        return mt_values(u, self.weights, beta, e)


def graded_half_line(rho: float, smallest: float, cells_per_efold: int = 16,
                     outer_cells: int = 128, breaks=()) -> np.ndarray:
    """Nodes 0 < x_1 < ... < 1: geometric from ``smallest`` up to rho, uniform on [rho, 1].

    Every value in ``breaks`` is a node.
    """
    if not 0 < smallest < rho < 1:
        raise ConfigurationError("need 0 < smallest < rho < 1")
    pieces = [[0.0]]
    anchors = sorted({smallest, rho, *[b for b in breaks if smallest < b < rho]})
    for a, b in zip(anchors[:-1], anchors[1:]):
        m = max(1, int(math.ceil(cells_per_efold * math.log(b / a))))
        pieces.append(np.exp(np.linspace(math.log(a), math.log(b), m + 1))[:-1])
    pieces.append(np.linspace(rho, 1.0, outer_cells + 1))
    return np.concatenate(pieces)


def _one_sided_integral(A, B, s):
    """int_A^B t^(s-1) dt for 0 <= A <= B, without cancellation when B - A << A."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    out = np.empty(np.broadcast(A, B).shape)
    small = A > 0
    AA, BB = np.broadcast_to(A, out.shape), np.broadcast_to(B, out.shape)
    sm = np.broadcast_to(small, out.shape)
    a, b = AA[sm], BB[sm]
    out[sm] = a ** s * np.expm1(s * np.log1p((b - a) / a)) / s
    out[~sm] = BB[~sm] ** s / s
    return out


def _cell_kernel_matrix(nodes: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    """W[i, k] = int over [a_k, b_k] and its mirror of |x_i - y|^(s-1) dy (x_i >= 0)."""
    a, b = nodes[:-1][None, :], nodes[1:][None, :]
    xi = x[:, None]
    inside = (a <= xi) & (xi <= b)
    right = xi < a
    left = xi > b
    # mirror cell [-b, -a]: distances x + a .. x + b
    W = _one_sided_integral(xi + a, xi + b, s)
    A = np.where(right, a - xi, np.where(left, xi - b, 0.0))
    B = np.where(right, b - xi, np.where(left, xi - a, 0.0))
    W += _one_sided_integral(A, B, s)
    W += _one_sided_integral(0.0, np.where(inside, xi - a, 0.0), s)
    W += _one_sided_integral(0.0, np.where(inside, b - xi, 0.0), s)
    return W


def _profile_average(a, b, n, p):
    """Cell average of y^(-n/p) over [a, b] (one dimension)."""
    e = 1.0 - 1.0 / p
    return (b ** e - a ** e) / (e * (b - a))


def build_extremal_family(n: int, p: float, q: float, rho: float = 0.125, count: int = 6,
                          deltas=None, h: Optional[float] = None,
                          log_spacing: float = 7.5, cells_per_efold: int = 16) -> ExtremalFamily:
    """Concentrating family with unit L^(p,q) sources supported in B_rho.

    n = 1 without ``h``: graded mesh, delta_j = rho exp(-log_spacing j).
    Otherwise a uniform grid of spacing h covering B_1, delta_j = rho 2^-j.
    """
    if not 0 < rho <= 0.125:
        raise DomainError(f"rho must lie in (0, 1/8], got {rho}")
    if count < 1:
        raise DomainError("count must be positive")
    params = LorentzParams(p, q)
    s = n / params.p
    if deltas is None:
        if n == 1 and h is None:
            deltas = [rho * math.exp(-log_spacing * j) for j in range(1, count + 1)]
        else:
            deltas = [rho * 2.0 ** -j for j in range(1, count + 1)]
    deltas = [float(d) for d in deltas]
    if any(not 0 < d < rho for d in deltas):
        raise DomainError("concentration parameters must lie in (0, rho)")
    if n == 1 and h is None:
        return _graded_family(params, rho, deltas, cells_per_efold)
    if h is None:
        raise ConfigurationError("uniform families need a spacing h")
    return _uniform_family(n, params, rho, deltas, h, s)


def _graded_family(params, rho, deltas, cells_per_efold):
    s = 1.0 / params.p
    nodes = graded_half_line(rho, min(deltas) * math.exp(-10.0), cells_per_efold, breaks=deltas)
    a, b = nodes[:-1], nodes[1:]
    x = 0.5 * (a + b)
    widths = 2 * (b - a)
    W = _cell_kernel_matrix(nodes, x, s) * (kernel_constant(1, s) * cutoff_profile(x))[:, None]
    prof = _profile_average(np.maximum(a, 1e-300), b, 1, params.p)
    members = []
    for d in deltas:
        f = np.where((a >= d * (1 - 1e-12)) & (b <= rho * (1 + 1e-12)), prof, 0.0)
        c = 1.0 / lorentz_steps(f, widths, params)
        f = c * f
        members.append(ExtremalMember(d, c, f, W @ f))
    return ExtremalFamily(1, params, rho, "graded", x, widths, 2.0, tuple(members))


def _uniform_family(n, params, rho, deltas, h, s):
    if min(deltas) < 2 * h:
        raise ConfigurationError(f"spacing {h} cannot resolve delta = {min(deltas)} (need delta >= 2h)")
    dom = make_ball_domain(n, 1.0, h, halfwidth=1.0 + 2 * h)
    grid = dom.grid
    r = grid.radius()
    theta = cutoff_theta(grid).values
    op = riesz_operator(s, whole_grid(grid))
    K = kernel_constant(n, s)
    members = []
    with np.errstate(divide="ignore"):
        prof = np.where(r > 0, r, 1.0) ** (-n / params.p)
    for d in deltas:
        edge = smoothstep((r - d) / h + 0.5) * smoothstep((rho - r) / h + 0.5)
        f = GridFunction(grid, prof * edge)
        c = 1.0 / lorentz_norm(f, dom, params)
        f = f * c
        u = riesz_apply(op, f) * (K * theta)
        members.append(ExtremalMember(d, c, f.values.ravel(), u.values.ravel()))
    w = np.full(grid.size, grid.cell_volume)
    return ExtremalFamily(n, params, rho, "uniform", grid.points().reshape(-1, n), w,
                          dom.measure, tuple(members), grid, dom)


# ----------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class MTReport:
    betas: tuple
    values: tuple            # values[b][j] = E_beta(u_j)
    saturated: tuple
    ratios: tuple            # consecutive ratios over the last three members
    classification: tuple
    measure: float

    def as_dict(self) -> dict:
        return {"betas": list(self.betas), "values": [list(v) for v in self.values],
                "saturated": list(self.saturated), "ratios": [list(r) for r in self.ratios],
                "classification": list(self.classification), "measure": self.measure,
                "thresholds": {"divergence_factor": DIVERGENCE_FACTOR,
                               "growth_ratio": GROWTH_RATIO, "plateau_ratio": PLATEAU_RATIO}}


def classify(values, measure: float, saturated: bool = False):
    """Finite-size signature of the bounded/diverging dichotomy."""
    tail = list(values[-3:])
    ratios = [b / a for a, b in zip(tail[:-1], tail[1:])]
    if not ratios:
        return ratios, "bounded so far"
    if (not saturated and all(r >= GROWTH_RATIO for r in ratios)
            and values[-1] > DIVERGENCE_FACTOR * measure):
        return ratios, "diverging"
    if all(r <= PLATEAU_RATIO for r in ratios):
        return ratios, "bounded"
    return ratios, "bounded so far"


def sharpness_sweep(family: ExtremalFamily, betas, expo: Optional[float] = None) -> MTReport:
    vals, sats, rats, cls = [], [], [], []
    for beta in betas:
        row = [family.functional(j, beta, expo) for j in range(len(family))]
        v = [r[0] for r in row]
        sat = any(r[1] for r in row)
        ratios, label = classify(v, family.measure, sat)
        vals.append(tuple(v))
        sats.append(sat)
        rats.append(tuple(ratios))
        cls.append(label)
    return MTReport(tuple(float(b) for b in betas), tuple(vals), tuple(sats), tuple(rats),
                    tuple(cls), family.measure)


def linear_exponential_products(family: ExtremalFamily, fractions) -> dict:
    """max_j E_beta(u_j) (beta_inf - beta) for beta = fraction beta_inf, exponent 1.

    beta_inf is the threshold of the weak (q = inf) variant.
    """
    b_inf = sharp_constants(family.n, family.params.p, math.inf).beta_npq
    out = []
    for fr in fractions:
        beta = fr * b_inf
        best = max(family.functional(j, beta, 1.0)[0] for j in range(len(family)))
        out.append({"fraction": float(fr), "beta": beta, "max_value": best,
                    "product": best * (b_inf - beta)})
    return {"beta_inf": b_inf, "sweep": out}


# ----------------------------------------------------------------------------
# disjoint-support probe

def disjoint_support_probe(n: int, p: float, q: float, t: float, s: float, rhos,
                           h: Optional[float] = None, halfwidth: float = 2.0,
                           tail_shells: int = 400, tail_reach: float = 1e8,
                           source=None) -> dict:
    """R(rho) = ||(-Delta)^(t/2)((1 - theta) I_s f)||_(p,q) / ||f||_(p,q) for unit bumps f in B_rho.

    Uses (-Delta)^(t/2) I_s f = (-Delta)^((t-s)/2) f / K_{n,s} (so t >= s) and
    evaluates the compactly supported part theta I_s f spectrally.  Outside the
    grid box the result is continued by its leading far-field term and enters
    the Lorentz norm through radial shells up to ``tail_reach`` times the box.
    ``source(grid, rho)`` replaces the default bump; zero sources are skipped.
    """
    if not 0 < s < n:
        raise DomainError(f"need 0 < s < n, got s={s}")
    if not s <= t:
        raise DomainError(f"need t >= s, got t={t}, s={s}")
    rhos = [float(r) for r in rhos]
    if any(not 0 < r <= 0.125 for r in rhos):
        raise DomainError("rho values must lie in (0, 1/8]")
    params = LorentzParams(p, q)
    if h is None:
        h = min(rhos) / (64 if n == 1 else 8)
    grid = Grid.centered(n, h, halfwidth)
    box = whole_grid(grid)
    theta = cutoff_theta(grid)
    op = riesz_operator(s, box)
    Ks = kernel_constant(n, s)
    rows, skipped = [], []
    for rho in rhos:
        f = smooth_bump(grid, radius=rho) if source is None else source(grid, rho)
        fn = lorentz_norm(f, box, params)
        if fn == 0:
            skipped.append(rho)
            continue
        f = f / fn
        If = riesz_apply(op, f)
        inner = theta * If
        main = f / Ks if t == s else fraclap_spectral(f, t - s) / Ks
        g = main - fraclap_spectral(inner, t)
        # far field: -c_t M_inner |x|^(-n-t) + c_(t-s) M_f |x|^(-n-t+s) / K_s
        c_t = exterior_kernel_constant(n, t)
        M_in = float(np.sum(inner.values) * grid.cell_volume)
        terms = [(-c_t * M_in, n + t)]
        if t > s:
            terms.append((exterior_kernel_constant(n, t - s) * float(np.sum(f.values)) * grid.cell_volume / Ks,
                          n + t - s))
        box_norm = lorentz_norm(g, box, params)
        vals, meas = _far_shells(n, grid, terms, tail_shells, tail_reach)
        allv = np.concatenate([g.values.ravel(), vals])
        allm = np.concatenate([np.full(grid.size, grid.cell_volume), meas])
        full = lorentz_steps(allv, allm, params)
        cut = len(vals) - len(vals) // 8   # drop the outermost decade-ish of shells
        trunc = lorentz_steps(np.concatenate([g.values.ravel(), vals[:cut]]),
                              np.concatenate([np.full(grid.size, grid.cell_volume), meas[:cut]]), params)
        rows.append({"rho": rho, "R": full, "R_box_only": box_norm,
                     "tail_share": (full - box_norm) / full if full else 0.0,
                     "truncation_change": abs(full - trunc) / full if full else 0.0})
    slope = math.nan
    if len(rows) >= 2:
        x = np.log([r["rho"] for r in rows])
        y = np.log([r["R"] for r in rows])
        slope = float(np.polyfit(x, y, 1)[0])
    bound = n / params.p_conj
    return {"n": n, "p": p, "q": q, "t": t, "s": s, "h": h, "rows": rows, "skipped": skipped,
            "slope": slope, "expected_slope": bound, "slope_ok": bool(slope >= bound - 0.3)}


def _far_shells(n, grid, terms, count, reach):
    """Values and measures of radial shells from the box edge out to reach * edge."""
    X0 = float(np.max(np.abs(grid.upper)))
    start = X0 * math.sqrt(n)
    r = start * np.exp(np.linspace(0.0, math.log(reach), count + 1))
    mid = np.sqrt(r[:-1] * r[1:])
    vol = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    meas = vol * (r[1:] ** n - r[:-1] ** n)
    vals = sum(c * mid ** (-e) for c, e in terms)
    return vals, meas


# ----------------------------------------------------------------------------
# L-infinity bound

def linfty_bound_check(u: GridFunction, dom: Domain, n: int, p: float, slack: float = 0.1) -> dict:
    """max|u| against alpha^(-1/p') ||(-Delta)^(n/2p) u||_(p,1) on Omega, with relative slack."""
    const = sharp_constants(n, p)
    lhs = float(np.max(np.abs(u.values[dom.mask]))) if dom.count else 0.0
    frac = fraclap_spectral(u, n / p)
    norm = lorentz_norm(frac, dom, LorentzParams(p, 1.0))
    rhs = const.alpha_np ** (-1.0 / const.p_conj) * norm
    return {"max_abs_u": lhs, "lorentz_norm": norm, "bound": rhs, "slack": slack,
            "ratio": lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf),
            "holds": bool(lhs <= rhs * (1 + slack))}
