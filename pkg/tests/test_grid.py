import math

import numpy as np
import pytest

from fracadams.errors import ConfigurationError, DomainError, UsageError
from fracadams.grid import (Domain, Grid, GridFunction, cutoff_theta, integrate, l2_norm,
                            load_gridfunction, make_ball_domain, save_gridfunction,
                            smooth_bump, whole_grid)


def test_centered_grid_is_symmetric():
    g = Grid.centered(2, 0.1, 1.0)
    assert all(s % 2 == 1 for s in g.shape)
    pts = g.points()
    np.testing.assert_allclose(pts[::-1, ::-1], -pts, atol=1e-14)
    assert g.cell_volume == pytest.approx(0.01)


def test_ball_measure_close():
    for n, vol in ((1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)):
        dom = make_ball_domain(n, 1.0, 1 / 32)
        assert abs(dom.measure - vol) <= 0.05


def test_ball_errors():
    with pytest.raises(DomainError):
        make_ball_domain(2, 0.0, 0.01)
    with pytest.raises(ConfigurationError):
        make_ball_domain(2, 1.0, 0.3)


def _mean_measure_error(n, h, radii):
    exact = (lambda r: 2 * r) if n == 1 else (lambda r: math.pi * r * r)
    return np.mean([abs(make_ball_domain(n, r, h).measure - exact(r)) for r in radii])


@pytest.mark.parametrize("n", [1, 2])
def test_measure_refinement_rate(n):
    radii = np.linspace(0.8, 1.2, 17)
    ratios = [_mean_measure_error(n, h, radii) / _mean_measure_error(n, h / 2, radii)
              for h in (1 / 16, 1 / 32)]
    assert 1.5 <= np.mean(ratios) <= 3.0


def test_unit_radius_interval_rate_is_exact():
    e = [abs(make_ball_domain(1, 1.0, h).measure - 2.0) for h in (1 / 16, 1 / 32)]
    assert e[0] / e[1] == pytest.approx(2.0)


def test_bump_values():
    g = Grid.centered(1, 1e-3, 1.0)
    b = smooth_bump(g)
    assert b.values[g.index_of((0.0,))] == pytest.approx(math.exp(-1))
    assert np.all(b.values[np.abs(g.points()[..., 0]) >= 1] == 0)
    assert integrate(b) == pytest.approx(0.443994, abs=1e-6)


def test_bump_outside_box():
    g = Grid.centered(1, 0.01, 1.0)
    with pytest.raises(ConfigurationError):
        smooth_bump(g, center=(0.5,), radius=0.7)


def test_cutoff_theta():
    g = Grid.centered(2, 1 / 64, 1.2)
    th = cutoff_theta(g)
    r = g.radius()
    assert th.values[g.index_of((0.0, 0.0))] == 1.0
    assert np.all(th.values[r <= 0.5] == 1.0)
    assert np.all(th.values[r >= 1.0] == 0.0)
    order = np.argsort(r.ravel())
    assert np.all(np.diff(th.values.ravel()[order]) <= 1e-15)


def test_integrate_rules():
    dom = make_ball_domain(2, 1.0, 1 / 32)
    g = dom.grid
    one = GridFunction(g, np.ones(g.shape))
    assert integrate(one, dom) == pytest.approx(dom.measure)
    odd = GridFunction(g, g.points()[..., 0] ** 3)
    assert abs(integrate(odd, dom)) < 1e-12
    assert l2_norm(one, dom) == pytest.approx(math.sqrt(dom.measure))
    other = make_ball_domain(2, 1.0, 1 / 16)
    with pytest.raises(UsageError):
        integrate(one, other)


def test_gridfunction_checks():
    g = Grid.centered(1, 0.1, 1.0)
    f = GridFunction(g, np.ones(g.shape))
    with pytest.raises(ValueError):
        f.values[0] = 2.0
    with pytest.raises(DomainError):
        GridFunction(g, np.full(g.shape, np.nan))


def test_domain_rejects_empty():
    g = Grid.centered(1, 0.1, 1.0)
    with pytest.raises(DomainError):
        Domain(g, np.zeros(g.shape, bool))


@pytest.mark.parametrize("fmt", ["bin", "csv"])
def test_save_load_roundtrip(tmp_path, fmt):
    g = Grid.centered(2, 0.125, 1.0)
    f = smooth_bump(g, radius=0.9)
    save_gridfunction(tmp_path / "f", f, fmt)
    back = load_gridfunction(tmp_path / "f.json")
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)


def test_boundary_distance_fallback_matches_ball():
    dom = make_ball_domain(2, 1.0, 1 / 32)
    plain = Domain(dom.grid, dom.mask)
    exact = dom.boundary_distance()[dom.mask]
    approx = plain.boundary_distance()[dom.mask]
    assert np.max(np.abs(exact - approx)) <= 1.5 * dom.grid.h
    assert np.all(approx > 0)
    assert np.all(whole_grid(dom.grid).mask)
