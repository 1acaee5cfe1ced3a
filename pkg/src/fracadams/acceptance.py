"""The acceptance suite: thirteen numbered checks with fixed tolerances.

Each check returns a CriterionResult; ``run`` executes a selection in order.
The test suite and the ``verify-all`` subcommand both call into this module.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import adams, constants, fraclap, green, lorentz, qcurv
from .grid import Domain, Grid, GridFunction, make_ball_domain, smooth_bump
from .riesz import riesz_vs_fundamental


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d}: {self.title} ({self.seconds:.1f} s)"

    def as_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "seconds": self.seconds, "detail": self.detail}


def _rel(a, b):
    return abs(a - b) / abs(b)


# ----------------------------------------------------------------------------

def sharp_constants_closed_forms(seed=0):
    a1 = constants.sharp_constants(1, 2, 2).alpha_np
    a2 = constants.sharp_constants(2, 2, 2).alpha_np
    moser = 2 * constants.sphere_measure(2) ** (1 / (2 - 1))
    errs = {"alpha_1_2": _rel(a1, math.pi), "alpha_2_2": _rel(a2, 4 * math.pi),
            "moser_consistency": _rel(a2, moser)}
    return all(e <= 1e-10 for e in errs.values()), errs, 1.0


def riesz_semigroup(seed=0):
    rng = np.random.default_rng(seed)
    c = constants.riesz_convolution_coefficient(3, 1, 1)
    worst = 0.0
    triples = []
    while len(triples) < 10:
        n = int(rng.integers(1, 4))
        a, b = rng.uniform(0.05, n, size=2)
        if a + b < n - 1e-3:
            triples.append((n, float(a), float(b)))
    for n, a, b in triples:
        K = constants.kernel_constant
        lhs = K(n, a) * K(n, b) * constants.riesz_convolution_coefficient(n, a, b)
        worst = max(worst, _rel(lhs, K(n, a + b)))
    d = {"coefficient_3_1_1_error": _rel(c, math.pi ** 3), "worst_semigroup_error": worst,
         "triples": triples}
    return d["coefficient_3_1_1_error"] <= 1e-10 and worst <= 1e-10, d, 1.0


def fundamental_solution_residual(seed=0):
    res = []
    for h in (2.0 ** -8, 2.0 ** -9):
        g = Grid.centered(1, h, 1.0)
        res.append(riesz_vs_fundamental(smooth_bump(g, None, 0.5), 0.5))
    d = {"residual_h8": res[0], "residual_h9": res[1], "reduction": res[0] / res[1]}
    return res[0] <= 5e-2 and d["reduction"] >= 1.5, d, 30.0


def green_kernel_bound(seed=0):
    runs = []
    dom1 = make_ball_domain(1, 1.0, 2.0 ** -9)
    runs.append(("interval", 0.5, green.green_sigma(dom1, 0.5)))
    dom2 = make_ball_domain(2, 1.0, 1 / 48)
    for sig in (0.5, 1.0, 1.5):
        runs.append(("disk", sig, green.green_sigma(dom2, sig)))
    # sigma = 2 needs n >= 3; all sources at least 4h inside
    dom3 = make_ball_domain(3, 1.0, 1 / 12)
    runs.append(("ball3", 2.0, green.green_sigma(dom3, 2.0)))
    rows = []
    for label, sig, op in runs:
        b = green.kernel_bound_violations(op, tol=1e-8)
        rows.append(dict(domain=label, sigma=sig, cells=op.domain.count, sources=len(op.sources), **b))
    return all(r["violations"] == 0 for r in rows), {"runs": rows}, 300.0


def ball_green_laplace(x, y):
    """Dirichlet Green function of -Delta on the unit ball in R^3 (image charge)."""
    r = np.linalg.norm(x - y, axis=-1)
    nx = np.linalg.norm(x)
    if nx < 1e-12:
        return (1 / r - 1) / (4 * math.pi)
    xs = x / nx ** 2
    return (1 / r - 1 / (nx * np.linalg.norm(y - xs, axis=-1))) / (4 * math.pi)


def classical_ball_oracle(seed=0, h=1 / 24, sources=16):
    dom = make_ball_domain(3, 1.0, h)
    pts = dom.interior_points()
    depth = dom.boundary_distance()[dom.mask]
    rng = np.random.default_rng(seed)
    src = np.sort(rng.choice(np.nonzero(depth >= 4 * h)[0], sources, replace=False))
    op = green.green_sigma(dom, 2.0, sources=src)
    worst_interior = worst_all = 0.0
    for p, i in enumerate(src):
        sep = np.linalg.norm(pts - pts[i], axis=1)
        far = sep >= 8 * h
        exact = ball_green_laplace(pts[i], pts[far])
        rel = np.abs(op.kernel[p][far] - exact) / np.abs(exact)
        worst_all = max(worst_all, float(rel.max()))
        worst_interior = max(worst_interior, float(rel[depth[far] >= 4 * h].max()))
    d = {"cells": dom.count, "sources": sources, "max_rel_error_interior": worst_interior,
         "max_rel_error_all_targets": worst_all}
    return worst_interior <= 0.05, d, 300.0


def representation_formula(seed=0):
    out = {}
    for key, n, s, hs in (("n1_s0.5", 1, 0.5, (2.0 ** -8, 2.0 ** -9)),
                          ("n2_s1", 2, 1.0, (1 / 64, 1 / 128))):
        vals = []
        for h in hs:
            dom = make_ball_domain(n, 1.0, h)
            op = green.green_sigma(dom, s, dense_limit=0)
            vals.append(green.relative_residual(op, smooth_bump(dom.grid, None, 0.5)))
        out[key] = {"residuals": vals, "reduction": vals[0] / vals[1]}
    ok = (out["n1_s0.5"]["residuals"][0] <= 5e-2 and out["n2_s1"]["residuals"][0] <= 8e-2
          and all(v["reduction"] >= 2.0 for v in out.values()))
    return ok, out, 600.0


def maximum_principle(seed=0):
    rng = np.random.default_rng(seed)
    ops = [green.green_sigma(make_ball_domain(1, 1.0, 2.0 ** -8), 0.5),
           green.green_sigma(make_ball_domain(2, 1.0, 1 / 32), 1.0, dense_limit=0)]
    mins = []
    for k in range(10):
        op = ops[k % 2]
        g = op.domain.grid
        data = rng.random(g.shape) * (rng.random(g.shape) < 0.3) * op.domain.mask
        mins.append(float(op.apply(GridFunction(g, data)).values[op.domain.mask].min()))
    return min(mins) >= -1e-8, {"minima": mins}, math.inf


def norm_equivalence(seed=0):
    bumps = [(0.0, 1.0), (0.2, 0.5), (-0.3, 0.7), (0.1, 0.3), (0.0, 0.9)]
    out = {}
    for n, sig, h in ((1, 1.0, 1 / 128), (2, 1.0, 1 / 32), (1, 0.5, 1 / 128)):
        g = Grid.centered(n, h, 1.5)
        r = np.array([fraclap.norm_equivalence_ratio(smooth_bump(g, [c] * n, rad), sig)
                      for c, rad in bumps])
        out[f"n{n}_sigma{sig}"] = {"ratios": r.tolist(), "cv": float(r.std() / r.mean()),
                                   "two_over_C": 2 / fraclap.calibrated_constant(n, sig)}
    return all(v["cv"] <= 0.02 for v in out.values()), out, math.inf


def sharpness_dichotomy(seed=0):
    fam = adams.build_extremal_family(1, 2, 2, count=6)
    alpha = constants.sharp_constants(1, 2, 2).alpha_np
    rep = adams.sharpness_sweep(fam, [0.8 * alpha, 1.2 * alpha])
    lo, hi = rep.ratios
    d = rep.as_dict()
    ok = (max(lo) <= 1.05 and rep.classification[0] == "bounded"
          and min(hi) >= 1.5 and rep.classification[1] == "diverging")
    return ok, d, 600.0


def disjoint_support_scaling(seed=0):
    rep = adams.disjoint_support_probe(1, 2, 2, 0.5, 0.5, [1 / 8, 1 / 16, 1 / 32, 1 / 64])
    return rep["slope"] >= rep["expected_slope"] - 0.3, rep, math.inf


def linfty_bound(seed=0):
    fam = adams.build_extremal_family(1, 2, 1, count=5, h=2.0 ** -12)
    rows = [adams.linfty_bound_check(fam.candidate(j), fam.domain, 1, 2) for j in range(5)]
    return all(r["holds"] for r in rows), {"members": rows}, math.inf


def qcurvature_solve(seed=0):
    prob = qcurv.interval_problem(h=2.0 ** -8, K=1.0, p=2.0, Lambda=1.0)
    sol = qcurv.qcurv_minimize(prob, tol=1e-8)
    res = qcurv.qcurv_residual(sol, prob)
    mono = all(b <= a for a, b in zip(sol.energies, sol.energies[1:]))
    d = {"residual": res, "monotone": mono, "iterations": sol.iterations,
         "converged": sol.converged, "multiplier": sol.multiplier, "shift": sol.shift,
         "final_energy": sol.energies[-1]}
    return res <= 1e-3 and mono and sol.converged, d, 300.0


def lorentz_closed_forms(seed=0):
    rng = np.random.default_rng(seed)
    g = Grid.centered(1, 1 / 64, 1.0)
    dom = Domain(g, np.ones(g.shape, bool))
    worst = 0.0
    cases = []
    for k in range(10):
        p = float(rng.uniform(1.1, 6.0))
        q = math.inf if k % 3 == 2 else float(rng.uniform(1.0, 8.0))
        cells = int(rng.integers(1, g.size + 1))
        v = np.zeros(g.size)
        v[rng.choice(g.size, cells, replace=False)] = 1.0
        E = cells * g.h
        got = lorentz.lorentz_norm(GridFunction(g, v), dom, lorentz.LorentzParams(p, q))
        want = E ** (1 / p) if q == math.inf else (p / q) ** (1 / q) * E ** (1 / p)
        worst = max(worst, _rel(got, want))
        cases.append({"p": p, "q": q, "measure": E})
    return worst <= 1e-10, {"worst_relative_error": worst, "cases": cases}, math.inf


CRITERIA = {
    1: ("sharp-constant closed forms", sharp_constants_closed_forms),
    2: ("Riesz semigroup coefficient", riesz_semigroup),
    3: ("fundamental-solution residual", fundamental_solution_residual),
    4: ("Green kernel bound 0 <= G <= F", green_kernel_bound),
    5: ("classical ball oracle, sigma = 2", classical_ball_oracle),
    6: ("representation formula", representation_formula),
    7: ("maximum principle", maximum_principle),
    8: ("norm equivalence", norm_equivalence),
    9: ("sharpness dichotomy", sharpness_dichotomy),
    10: ("disjoint-support scaling", disjoint_support_scaling),
    11: ("L-infinity bound", linfty_bound),
    12: ("Q-curvature solve", qcurvature_solve),
    13: ("Lorentz closed forms", lorentz_closed_forms),
}


def run_criterion(number: int, seed: int = 0) -> CriterionResult:
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    ok, detail, limit = fn(seed=seed)
    dt = time.perf_counter() - t0
    detail = dict(detail, runtime_limit=limit)
    return CriterionResult(number, title, bool(ok and dt < limit), detail, dt)


def run(numbers=None, seed: int = 0, echo=None) -> list:
    out = []
    for k in sorted(CRITERIA) if numbers is None else numbers:
        r = run_criterion(k, seed)
        if echo is not None:
            echo(r.line())
        out.append(r)
    return out
