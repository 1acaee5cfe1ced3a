import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracadams import lorentz as L
from fracadams.errors import DomainError
from fracadams.grid import Domain, Grid, GridFunction, smooth_bump, whole_grid

GRID = Grid.centered(1, 1 / 32, 1.0)
BOX = whole_grid(GRID)

exponents = st.tuples(st.floats(1.1, 6.0), st.one_of(st.floats(1.0, 8.0), st.just(math.inf)))
vectors = st.lists(st.floats(-5, 5, allow_nan=False), min_size=GRID.size, max_size=GRID.size)


def gf(v):
    return GridFunction(GRID, np.asarray(v, float))


def test_indicator_closed_form():
    v = np.zeros(GRID.size)
    v[10:30] = 1.0
    E = 20 * GRID.h
    for p, q in ((2.0, 2.0), (3.0, 1.5), (1.5, 4.0)):
        got = L.lorentz_norm(gf(v), BOX, L.LorentzParams(p, q))
        assert got == pytest.approx((p / q) ** (1 / q) * E ** (1 / p), rel=1e-12)
    assert L.lorentz_norm(gf(v), BOX, L.LorentzParams(2.5)) == pytest.approx(E ** 0.4, rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_q_equal_p_is_lebesgue(p):
    f = smooth_bump(GRID, radius=0.8)
    lp = (np.sum(np.abs(f.values) ** p) * GRID.h) ** (1 / p)
    assert L.lorentz_norm(f, BOX, L.LorentzParams(p, p)) == pytest.approx(lp, rel=1e-12)


def test_rearrangement():
    r = L.rearrange_steps([1.0, -3.0, 0.0, 2.0], [0.5, 0.25, 1.0, 0.25])
    np.testing.assert_array_equal(r.levels, [3.0, 2.0, 1.0])
    np.testing.assert_allclose(r.breakpoints, [0.25, 0.5, 1.0])
    np.testing.assert_array_equal(r([0.0, 0.3, 0.75, 2.0]), [3.0, 2.0, 1.0, 0.0])
    assert r.support_measure == 1.0


def test_rearrangement_preserves_lp(rng):
    v = rng.standard_normal(GRID.size)
    r = L.rearrange(gf(v), BOX)
    widths = np.diff(np.concatenate([[0.0], r.breakpoints]))
    assert np.sum(r.levels ** 3 * widths) == pytest.approx(np.sum(np.abs(v) ** 3) * GRID.h, rel=1e-12)


def test_zero_function():
    assert L.lorentz_norm(GridFunction.zeros(GRID), BOX, L.LorentzParams(2, 3)) == 0.0


def test_large_q_no_overflow():
    v = np.full(GRID.size, 1e200)
    assert math.isfinite(L.lorentz_norm(gf(v), BOX, L.LorentzParams(2.0, 8.0)))


@pytest.mark.parametrize("p, q", [(1.0, 2.0), (math.inf, 2.0), (2.0, 0.5)])
def test_invalid_exponents(p, q):
    with pytest.raises(DomainError):
        L.LorentzParams(p, q)


def test_domain_restriction():
    mask = np.zeros(GRID.shape, bool)
    mask[:10] = True
    f = gf(np.ones(GRID.size))
    got = L.lorentz_norm(f, Domain(GRID, mask), L.LorentzParams(2, 2))
    assert got == pytest.approx(math.sqrt(10 * GRID.h))


@settings(max_examples=60, deadline=None)
@given(vectors, exponents, st.floats(-100, 100))
def test_homogeneity(v, pq, lam):
    P = L.LorentzParams(*pq)
    a = L.lorentz_norm(gf(v) * lam, BOX, P)
    b = abs(lam) * L.lorentz_norm(gf(v), BOX, P)
    assert a == pytest.approx(b, rel=1e-10, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(vectors, exponents)
def test_monotone_under_domination(v, pq):
    P = L.LorentzParams(*pq)
    f = gf(v)
    g = gf(np.abs(v) + 0.5)
    assert L.lorentz_norm(f, BOX, P) <= L.lorentz_norm(g, BOX, P) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(vectors, vectors, exponents)
def test_quasi_triangle(u, v, pq):
    P = L.LorentzParams(*pq)
    lhs = L.lorentz_norm(gf(u) + gf(v), BOX, P)
    rhs = 2 ** (1 / P.p) * (L.lorentz_norm(gf(u), BOX, P) + L.lorentz_norm(gf(v), BOX, P))
    assert lhs <= rhs * (1 + 1e-12) + 1e-300


@settings(max_examples=100, deadline=None)
@given(vectors, vectors, exponents)
def test_holder(u, v, pq):
    P = L.LorentzParams(*pq)
    rep = L.lorentz_holder_check(gf(u), gf(v), BOX, P)
    assert rep["holds"]


def test_holder_zero_and_indicator():
    P = L.LorentzParams(2, 2)
    v = np.zeros(GRID.size)
    v[5:20] = 1.0
    assert L.lorentz_holder_check(gf(v), GridFunction.zeros(GRID), BOX, P)["pairing"] == 0.0
    rep = L.lorentz_holder_check(gf(v), gf(v), BOX, P)
    assert rep["holds"] and rep["ratio"] == pytest.approx(1.0)


def test_holder_signed_bumps(rng):
    for _ in range(100):
        p = rng.uniform(1.2, 5.0)
        q = rng.choice([1.0, rng.uniform(1.0, 6.0), math.inf])
        P = L.LorentzParams(p, q)
        f = smooth_bump(GRID, (rng.uniform(-0.3, 0.3),), rng.uniform(0.2, 0.6)) * rng.choice([-1, 1])
        g = smooth_bump(GRID, (rng.uniform(-0.3, 0.3),), rng.uniform(0.2, 0.6)) * rng.choice([-1, 1])
        assert L.lorentz_holder_check(f, g, BOX, P)["holds"]


def test_dual_params():
    d = L.LorentzParams(3.0, 1.0).dual()
    assert d.p == pytest.approx(1.5) and d.q == math.inf
