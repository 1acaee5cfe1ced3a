import math

import numpy as np
import pytest

from fracadams import qcurv
from fracadams.errors import ConfigurationError, DomainError
from fracadams.grid import GridFunction, make_ball_domain

H = 2.0 ** -7


@pytest.fixture(scope="module")
def problem():
    return qcurv.interval_problem(h=H)


@pytest.fixture(scope="module")
def solution(problem):
    return qcurv.qcurv_minimize(problem, tol=1e-8)


def test_threshold_value(problem):
    # n = 1, p = 2: n^2 p' / (4 alpha_{1,2}) = 2 / (4 pi)
    assert problem.coercivity_threshold == pytest.approx(1 / (2 * math.pi))


def test_basis_vanishes_outside(problem):
    assert 0 < len(problem.basis) <= 256
    for b in problem.basis:
        assert np.all(b.values[~problem.domain.mask] == 0)
    np.linalg.cholesky(problem.stiffness)


def test_energy_outside_admissible_set(problem):
    assert qcurv.qcurv_energy(problem, np.zeros(len(problem.basis))) == math.inf
    assert math.isfinite(qcurv.qcurv_energy(problem, 0.1 * np.ones(len(problem.basis))))


def test_converges(problem, solution):
    assert solution.converged
    assert qcurv.qcurv_residual(solution, problem) <= 1e-3
    assert all(b <= a for a, b in zip(solution.energies, solution.energies[1:]))
    assert math.exp(problem.n * solution.shift) == pytest.approx(solution.multiplier)


def test_perturbation_raises_residual(problem, solution):
    base = qcurv.qcurv_residual(solution, problem)
    worse = qcurv.qcurv_residual(solution, problem, coeffs=1.1 * solution.coeffs)
    assert worse > 10 * base


def test_solution_is_positive_and_vanishes_outside(problem, solution):
    u = solution.u0.values
    assert np.all(u[~problem.domain.mask] == 0)
    assert u[problem.domain.mask].max() > 0


def test_rays_grow(problem):
    fit = qcurv.coercivity_fit(problem, directions=3)
    for ray in fit["energies"]:
        tail = [e for e in ray if math.isfinite(e)][-5:]
        assert all(b > a for a, b in zip(tail, tail[1:]))
    assert math.isfinite(fit["C"])


def test_no_coercivity_violations(problem, solution):
    fit = qcurv.coercivity_fit(problem)
    assert qcurv.coercivity_violations(problem, solution.path, fit["C"]) == 0


def test_larger_lambda_gives_smaller_solution(problem, solution):
    prob2 = qcurv.make_problem(problem.domain, problem.K, 2.0, 2.0, basis=problem.basis)
    sol2 = qcurv.qcurv_minimize(prob2, tol=1e-8)
    norm = lambda s, p: math.sqrt(s.coeffs @ p.stiffness @ s.coeffs)
    assert norm(sol2, prob2) < norm(solution, problem)


def test_negative_curvature_has_no_start():
    with pytest.raises(ConfigurationError):
        qcurv.qcurv_minimize(qcurv.interval_problem(h=H, K=-1.0))


def test_problem_checks(problem):
    with pytest.raises(DomainError):
        qcurv.interval_problem(h=H, Lambda=0.1)
    with pytest.raises(DomainError):
        qcurv.interval_problem(h=H, K=0.0)
    with pytest.raises(DomainError):
        qcurv.interval_problem(h=H, p=1.0)
    with pytest.raises(ConfigurationError):
        qcurv.qcurv_minimize(problem, init=np.zeros(len(problem.basis)))


def test_variable_curvature():
    dom = make_ball_domain(1, 1.0, H)
    x = dom.grid.points()[..., 0]
    K = GridFunction(dom.grid, 1.0 + 0.5 * np.cos(np.pi * x))
    prob = qcurv.make_problem(dom, K)
    sol = qcurv.qcurv_minimize(prob)
    assert sol.converged and qcurv.qcurv_residual(sol, prob) <= 1e-3
