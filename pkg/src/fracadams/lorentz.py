"""Decreasing rearrangements and Lorentz L^(p,q) quasi-norms of step functions.

A grid function restricted to a domain is a step function whose pieces all
have measure h^n, so its rearrangement f* is a step function as well and

    ||f||_(p,q)^q = int_0^inf (t^(1/p) f*(t))^q dt/t
                  = sum_k f_k^q (p/q) (t_k^(q/p) - t_(k-1)^(q/p))

holds exactly.  For q = inf the weak norm is max_k f_k t_k^(1/p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import INF, conjugate
from .errors import DomainError, UsageError
from .grid import Domain, GridFunction


@dataclass(frozen=True)
class LorentzParams:
    p: float
    q: float = INF

    def __post_init__(self):
        p, q = float(self.p), float(self.q)
        if not (1 < p < INF):
            raise DomainError(f"p must lie in (1, inf), got {p}")
        if not q >= 1:
            raise DomainError(f"q must lie in [1, inf], got {q}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def p_conj(self) -> float:
        return conjugate(self.p)

    @property
    def q_conj(self) -> float:
        return conjugate(self.q)

    def dual(self) -> "LorentzParams":
        return LorentzParams(self.p_conj, self.q_conj)


@dataclass(frozen=True, eq=False)
class Rearrangement:
    levels: np.ndarray       # non-increasing, > 0
    breakpoints: np.ndarray  # cumulative measure t_k, same length as levels

    @property
    def support_measure(self) -> float:
        return float(self.breakpoints[-1]) if len(self.breakpoints) else 0.0

    def __call__(self, t):
        """f*(t) for t >= 0."""
        t = np.asarray(t, float)
        k = np.searchsorted(self.breakpoints, t, side="right")
        lv = np.append(self.levels, 0.0)
        return lv[np.minimum(k, len(self.levels))]


def rearrange_steps(values, measures) -> Rearrangement:
    """Rearrangement of the step function taking |values[i]| on a set of measure measures[i]."""
    v = np.abs(np.asarray(values, float)).ravel()
    m = np.asarray(measures, float).ravel()
    if m.shape != v.shape:
        m = np.broadcast_to(m, v.shape)
    keep = v > 0
    v, m = v[keep], m[keep]
    order = np.argsort(-v, kind="stable")
    return Rearrangement(v[order], np.cumsum(m[order]))


def rearrange(f: GridFunction, dom: Domain) -> Rearrangement:
    if f.grid != dom.grid:
        raise UsageError("f and domain live on different grids")
    return rearrange_steps(f.values[dom.mask], f.grid.cell_volume)


def rearrangement_norm(r: Rearrangement, params: LorentzParams) -> float:
    if len(r.levels) == 0:
        return 0.0
    p, q = params.p, params.q
    t = r.breakpoints
    if q == INF:
        return float(np.max(r.levels * t ** (1 / p)))
    # t_k^(q/p) - t_(k-1)^(q/p) without cancellation: t_k^(q/p) (1 - (t_(k-1)/t_k)^(q/p))
    prev = np.concatenate([[0.0], t[:-1]])
    incr = -(t ** (q / p)) * np.expm1((q / p) * np.log(prev / t, where=prev > 0,
                                                          out=np.full(len(t), -np.inf)))
    # scale by the largest level first to keep f_k^q in range for large q
    top = r.levels[0]
    total = np.sum((r.levels / top) ** q * incr) * (p / q)
    return float(top * total ** (1 / q))


def lorentz_steps(values, measures, params: LorentzParams) -> float:
    """Lorentz norm of the step function |values[i]| on pieces of measure measures[i]."""
    return rearrangement_norm(rearrange_steps(values, measures), params)


def lorentz_norm(f: GridFunction, dom: Domain, params: LorentzParams) -> float:
    return rearrangement_norm(rearrange(f, dom), params)


def holder_constant(params: LorentzParams) -> float:
    """Pairing constant C_H used by lorentz_holder_check."""
    return params.p_conj


def lorentz_holder_check(f: GridFunction, g: GridFunction, dom: Domain,
                         params: LorentzParams) -> dict:
    """Compare |int f g| with C_H ||f||_(p,q) ||g||_(p',q') on dom."""
    if f.grid != g.grid:
        raise UsageError("f and g live on different grids")
    pairing = abs(float(np.sum((f.values * g.values)[dom.mask]) * f.grid.cell_volume))
    nf = lorentz_norm(f, dom, params)
    ng = lorentz_norm(g, dom, params.dual())
    C = holder_constant(params)
    bound = C * nf * ng
    ratio = 0.0 if pairing == 0 else (math.inf if bound == 0 else pairing / (nf * ng))
    return {"pairing": pairing, "norm_f": nf, "norm_g": ng, "C_H": C, "bound": bound,
            "ratio": ratio, "holds": bool(pairing <= bound * (1 + 1e-12))}
