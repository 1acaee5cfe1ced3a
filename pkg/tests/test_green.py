import numpy as np
import pytest

from fracadams import green
from fracadams.constants import kernel_constant
from fracadams.errors import ConfigurationError, DomainError
from fracadams.grid import GridFunction, make_ball_domain, smooth_bump

H1 = 2.0 ** -7


@pytest.fixture(scope="module")
def interval_op():
    return green.green_sigma(make_ball_domain(1, 1.0, H1), 0.5)


@pytest.fixture(scope="module")
def disk_op():
    return green.green_sigma(make_ball_domain(2, 1.0, 1 / 16), 1.0)


@pytest.fixture(scope="module")
def ball_compose():
    return green.green_compose(make_ball_domain(3, 1.0, 1 / 8), 2.5)


def test_interval_bounds_and_symmetry(interval_op):
    b = green.kernel_bound_violations(interval_op)
    assert b["violations"] == 0 and b["min_G"] > 0
    assert green.symmetry_defect(interval_op) <= 0.05


def test_disk_bounds_and_symmetry(disk_op):
    assert green.kernel_bound_violations(disk_op)["violations"] == 0
    assert green.symmetry_defect(disk_op) <= 0.05


def test_laplace_ball_bounds():
    op = green.green_sigma(make_ball_domain(3, 1.0, 1 / 8), 2.0)
    assert len(op.sources) > 0
    assert green.kernel_bound_violations(op)["violations"] == 0


def test_composed_kernel_bounds(ball_compose):
    assert ball_compose.k == 1 and ball_compose.sigma == pytest.approx(0.5)
    b = green.kernel_bound_violations(ball_compose)
    assert b["violations"] == 0 and b["min_G"] > 0


def test_composition_is_two_stage_solve(ball_compose, rng):
    dom = ball_compose.domain
    base = green.green_sigma(dom, 0.5)
    g = GridFunction(dom.grid, rng.random(dom.grid.shape))
    gin = g.values[dom.mask]
    two_stage = green.LaplaceSystem(dom).solve(base.weight * (base.kernel @ gin))
    one_shot = ball_compose.apply(g).values[dom.mask]
    assert np.max(np.abs(one_shot - two_stage)) <= 1e-10 * np.max(np.abs(two_stage))


def test_compose_order_zero_is_green_sigma():
    dom = make_ball_domain(1, 1.0, 2.0 ** -6)
    a = green.green_compose(dom, 0.7)
    b = green.green_sigma(dom, 0.7)
    np.testing.assert_array_equal(a.kernel, b.kernel)


def test_order_checks():
    with pytest.raises(DomainError):
        green.green_sigma(make_ball_domain(1, 1.0, 1 / 16), 1.0)
    with pytest.raises(DomainError):
        green.green_sigma(make_ball_domain(2, 1.0, 1 / 16), 2.0)
    with pytest.raises(DomainError):
        green.green_sigma(make_ball_domain(2, 1.0, 1 / 16), 2.5)
    with pytest.raises(DomainError):
        green.green_compose(make_ball_domain(2, 1.0, 1 / 16), 2.0)


def test_maximum_principle(interval_op, rng):
    dom = interval_op.domain
    for _ in range(5):
        data = rng.random(dom.grid.shape) * (rng.random(dom.grid.shape) < 0.3)
        out = interval_op.apply(GridFunction(dom.grid, data * dom.mask))
        assert out.values[dom.mask].min() >= -1e-8


def test_matrix_free_matches_dense(disk_op, rng):
    dom = disk_op.domain
    free = green.green_sigma(dom, 1.0, dense_limit=0)
    assert len(free.sources) == 0
    g = GridFunction(dom.grid, rng.random(dom.grid.shape) * dom.mask)
    a = disk_op.apply(g).values
    b = free.apply(g).values
    assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(a))


def test_conjugate_gradient_matches_cholesky(rng):
    system = green.NonlocalSystem(make_ball_domain(2, 1.0, 1 / 16), 0.8)
    B = rng.standard_normal((system.domain.count, 3))
    x = green.conjugate_gradient(system.matvec, B, diag=system.D, rtol=1e-12)
    np.testing.assert_allclose(x, system.solve(B), rtol=1e-8, atol=1e-10)


def test_representation_residual_refines():
    res = []
    for h in (2.0 ** -6, 2.0 ** -7):
        dom = make_ball_domain(1, 1.0, h)
        res.append(green.relative_residual(green.green_sigma(dom, 0.5), smooth_bump(dom.grid, None, 0.5)))
    assert res[1] < res[0] <= 0.1


def test_domain_monotonicity():
    h = 2.0 ** -6
    small = make_ball_domain(1, 1.0, h, halfwidth=1.25)
    large = make_ball_domain(1, 1.25, h)
    assert small.grid == large.grid
    Gs = green.green_sigma(small, 0.5).kernel
    Gl = green.green_sigma(large, 0.5).kernel
    number = np.cumsum(large.mask.ravel()) - 1
    sub = number[small.mask.ravel()]
    assert np.all(Gs <= Gl[np.ix_(sub, sub)] + 1e-8)


def test_harmonic_lift():
    dom = make_ball_domain(1, 1.0, H1)
    H = green.harmonic_lift(dom, 0.5, (0.0,))
    v = H.values
    assert np.max(np.abs(v - v[::-1])) <= 1e-8 * np.max(np.abs(v))
    assert v.min() >= -1e-8
    # bounded by the largest exterior value of F(x - .), attained at |z| = 1
    assert v[dom.mask].max() <= kernel_constant(1, 0.5) * (1 + 1e-8)
    r = np.abs(dom.grid.points()[..., 0])
    out = ~dom.mask
    np.testing.assert_allclose(v[out], kernel_constant(1, 0.5) * r[out] ** -0.5, rtol=1e-12)


def test_harmonic_lift_rejects_boundary_source():
    dom = make_ball_domain(1, 1.0, H1)
    with pytest.raises(ConfigurationError):
        green.harmonic_lift(dom, 0.5, (1.0 - 2 * H1,))
    with pytest.raises(DomainError):
        green.harmonic_lift(dom, 2.0, (0.0,))


def test_kernel_roundtrip(tmp_path):
    op = green.green_sigma(make_ball_domain(1, 1.0, 2.0 ** -5), 0.5)
    green.save_green_operator(op, tmp_path / "kernel")
    meta, K = green.load_green_kernel(tmp_path / "kernel")
    np.testing.assert_array_equal(K, op.kernel)
    assert meta["sigma"] == 0.5 and meta["rows"] == op.domain.count
