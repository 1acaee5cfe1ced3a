import math

import numpy as np
import pytest

from fracadams import riesz as R
from fracadams.constants import kernel_constant
from fracadams.errors import DomainError, UsageError
from fracadams.grid import Domain, Grid, GridFunction, make_ball_domain, smooth_bump, whole_grid


def test_zero_source():
    dom = make_ball_domain(2, 1.0, 1 / 16)
    out = R.riesz_apply(R.riesz_operator(1.0, dom), GridFunction.zeros(dom.grid))
    assert np.all(out.values == 0)
    assert R.riesz_vs_fundamental(GridFunction.zeros(dom.grid), 1.0) == 0.0


def test_positive_source_gives_positive_potential(rng):
    dom = make_ball_domain(2, 1.0, 1 / 16)
    f = GridFunction(dom.grid, rng.random(dom.grid.shape))
    assert np.all(R.riesz_apply(R.riesz_operator(0.7, dom), f).values > 0)


def test_indicator_of_interval_is_exact():
    N = 101
    g = Grid(1, 2.0 / N, (-1.0,), (N,))
    dom = whole_grid(g)
    out = R.riesz_apply(R.riesz_operator(0.5, dom), GridFunction(g, np.ones(g.shape)))
    # int_(-1,1) |y|^(-1/2) dy = 4
    assert out.values[N // 2] == pytest.approx(4.0, rel=1e-9)  # cell integrals by Gauss rule


def test_self_cell_weight():
    h = 0.01
    op = R.riesz_operator(0.5, whole_grid(Grid.centered(1, h, 0.5)))
    assert op.self_weight == pytest.approx(2 * (h / 2) ** 0.5 / 0.5, rel=1e-12)


def test_kernel_matrix_symmetric():
    dom = make_ball_domain(2, 1.0, 1 / 8)
    W = R.kernel_matrix(R.riesz_operator(1.3, dom))
    assert W.shape == (dom.count, dom.count)
    np.testing.assert_array_equal(W, W.T)


def test_kernel_matrix_matches_apply(rng):
    dom = make_ball_domain(2, 1.0, 1 / 8)
    op = R.riesz_operator(0.8, dom)
    f = GridFunction(dom.grid, rng.random(dom.grid.shape))
    dense = R.kernel_matrix(op) @ f.values[dom.mask]
    np.testing.assert_allclose(R.riesz_apply(op, f).values[dom.mask], dense, rtol=1e-10)


@pytest.mark.parametrize("alpha", [0.0, 2.0, -0.5])
def test_alpha_range(alpha):
    with pytest.raises(DomainError):
        R.riesz_operator(alpha, make_ball_domain(2, 1.0, 1 / 8))


def test_grid_mismatch():
    op = R.riesz_operator(0.5, make_ball_domain(1, 1.0, 1 / 8))
    with pytest.raises(UsageError):
        R.riesz_apply(op, GridFunction.zeros(Grid.centered(1, 1 / 16, 1.0)))


@pytest.mark.parametrize("n, a, b, h, half", [(1, 0.25, 0.25, 1 / 32, 32.0), (2, 0.5, 0.5, 1 / 8, 16.0)])
def test_semigroup_on_grid(n, a, b, h, half):
    g = Grid.centered(n, h, half)
    W = whole_grid(g)
    f = smooth_bump(g, None, 0.5)
    K = kernel_constant
    lhs = R.riesz_apply(R.riesz_operator(a, W), R.riesz_apply(R.riesz_operator(b, W), f)) * (K(n, a) * K(n, b))
    rhs = R.riesz_apply(R.riesz_operator(a + b, W), f) * K(n, a + b)
    sel = g.radius() <= 1
    assert np.linalg.norm((lhs - rhs).values[sel]) / np.linalg.norm(rhs.values[sel]) <= 0.02


def test_fundamental_residual_decreases():
    res = [R.riesz_vs_fundamental(smooth_bump(Grid.centered(1, h, 1.0), None, 0.5), 0.5)
           for h in (2.0 ** -6, 2.0 ** -7, 2.0 ** -8)]
    assert res[0] > res[1] > res[2]
    assert res[2] <= 5e-2


def test_exterior_tail_helps():
    f = smooth_bump(Grid.centered(1, 2.0 ** -7, 1.0), None, 0.5)
    assert R.riesz_vs_fundamental(f, 0.5) < R.riesz_vs_fundamental(f, 0.5, tail=False)
