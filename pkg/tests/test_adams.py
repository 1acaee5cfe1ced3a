import math

import numpy as np
import pytest

from fracadams import adams
from fracadams.constants import kernel_constant, sharp_constants
from fracadams.errors import ConfigurationError, DomainError
from fracadams.grid import Grid, GridFunction, make_ball_domain

ALPHA_1_2 = math.pi


@pytest.fixture(scope="module")
def family():
    return adams.build_extremal_family(1, 2, 2, count=6)


def test_functional_of_zero_is_measure():
    dom = make_ball_domain(2, 1.0, 1 / 16)
    assert adams.mt_functional(GridFunction.zeros(dom.grid), dom, 3.0, 2.0) == pytest.approx(dom.measure)


def test_functional_two_level_oracle():
    dom = make_ball_domain(1, 1.0, 2.0 ** -8)
    x = dom.grid.points()[..., 0]
    u = GridFunction(dom.grid, np.where(np.abs(x) < 0.5, 1.5, 0.0))
    inner = np.sum(dom.mask & (np.abs(x) < 0.5)) * dom.grid.h
    want = inner * math.exp(2.0 * 1.5 ** 2) + (dom.measure - inner)
    assert adams.mt_functional(u, dom, 2.0, 2.0) == pytest.approx(want, rel=1e-12)


def test_functional_monotone(rng):
    dom = make_ball_domain(1, 1.0, 2.0 ** -6)
    u = GridFunction(dom.grid, rng.standard_normal(dom.grid.shape))
    vals = [adams.mt_functional(u, dom, b, 2.0) for b in (0.1, 0.5, 1.0)]
    assert vals[0] < vals[1] < vals[2]
    bigger = u.with_values(np.abs(u.values) + 0.1)
    assert adams.mt_functional(bigger, dom, 1.0, 2.0) > adams.mt_functional(u, dom, 1.0, 2.0)


def test_functional_saturation_flag():
    dom = make_ball_domain(1, 1.0, 2.0 ** -6)
    u = GridFunction(dom.grid, np.full(dom.grid.shape, 100.0))
    rep = adams.mt_functional(u, dom, 1.0, 2.0, report=True)
    assert rep["saturated"] and math.isfinite(rep["value"])


def test_functional_parameter_checks():
    dom = make_ball_domain(1, 1.0, 2.0 ** -6)
    with pytest.raises(DomainError):
        adams.mt_functional(GridFunction.zeros(dom.grid), dom, 0.0, 2.0)
    with pytest.raises(DomainError):
        adams.mt_functional(GridFunction.zeros(dom.grid), dom, 1.0, 0.5)


def test_family_unit_norm_and_growing_peaks(family):
    from fracadams.lorentz import lorentz_steps
    peaks = [m.peak for m in family.members]
    assert all(b > a for a, b in zip(peaks, peaks[1:]))
    for m in family.members:
        assert lorentz_steps(m.f, family.weights, family.params) == pytest.approx(1.0, rel=1e-12)


def test_family_value_at_origin(family):
    # u(0) = 2 K c log(rho/delta) with c = (2 log(rho/delta))^(-1/2) for p = q = 2
    K = kernel_constant(1, 0.5)
    i = int(np.argmin(np.abs(family.points)))
    for m in family.members:
        Lg = math.log(family.rho / m.delta)
        assert m.u[i] == pytest.approx(K * math.sqrt(2 * Lg), rel=1e-3)


def test_family_support():
    fam = adams.build_extremal_family(2, 2, 2, count=2, h=1 / 64)
    for j in range(2):
        f = fam.source(j)
        r = f.grid.radius()
        assert np.all(f.values[r > fam.rho + 2 * fam.grid.h] == 0)
        u = fam.candidate(j)
        assert np.all(u.values[r >= 1] == 0)


def test_single_member_family():
    fam = adams.build_extremal_family(1, 2, 2, count=1, deltas=[0.0625])
    assert len(fam) == 1


def test_family_checks():
    with pytest.raises(DomainError):
        adams.build_extremal_family(1, 2, 2, rho=0.5)
    with pytest.raises(ConfigurationError):
        adams.build_extremal_family(1, 2, 2, count=6, h=2.0 ** -6)
    with pytest.raises(DomainError):
        adams.build_extremal_family(1, 2, 2, deltas=[0.2])


def test_empty_sweep(family):
    rep = adams.sharpness_sweep(family, [])
    assert rep.betas == () and rep.values == ()


def test_dichotomy_far_from_threshold(family):
    rep = adams.sharpness_sweep(family, [0.5 * ALPHA_1_2, 1.5 * ALPHA_1_2])
    assert rep.classification == ("bounded", "diverging")
    for v in rep.values:
        assert min(v) >= family.measure


def test_classify_labels():
    assert adams.classify([3.0, 3.0, 3.0], 2.0)[1] == "bounded"
    assert adams.classify([1e3, 1e4, 1e5], 2.0)[1] == "diverging"
    assert adams.classify([1e3, 1e4, 1e5], 2.0, saturated=True)[1] == "bounded so far"
    assert adams.classify([3.0], 2.0)[1] == "bounded so far"


def test_weak_variant_product_bounded():
    fam = adams.build_extremal_family(1, 2, math.inf, count=6)
    rep = adams.linear_exponential_products(fam, [0.5, 0.7, 0.9, 0.95])
    prods = [r["product"] for r in rep["sweep"]]
    assert all(math.isfinite(p) and p > 0 for p in prods)
    assert max(prods) <= 10 * prods[0]
    assert rep["beta_inf"] == pytest.approx(sharp_constants(1, 2, math.inf).beta_npq)


@pytest.fixture(scope="module")
def probe():
    return adams.disjoint_support_probe(1, 2, 2, 0.5, 0.5, [1 / 8, 1 / 16, 1 / 32])


def test_disjoint_probe_rows(probe):
    assert len(probe["rows"]) == 3 and not probe["skipped"]
    for r in probe["rows"]:
        assert r["truncation_change"] <= 1e-6
        assert 0 <= r["tail_share"] < 0.5
    assert probe["slope_ok"]


def test_disjoint_probe_skips_zero_source():
    rep = adams.disjoint_support_probe(1, 2, 2, 0.5, 0.5, [1 / 8, 1 / 16], h=1 / 256,
                                       source=lambda g, rho: GridFunction.zeros(g))
    assert rep["rows"] == [] and rep["skipped"] == [1 / 8, 1 / 16]
    assert math.isnan(rep["slope"])


def test_disjoint_probe_checks():
    with pytest.raises(DomainError):
        adams.disjoint_support_probe(1, 2, 2, 0.25, 0.5, [1 / 8])
    with pytest.raises(DomainError):
        adams.disjoint_support_probe(1, 2, 2, 0.5, 0.5, [0.5])


def test_linfty_bound():
    fam = adams.build_extremal_family(1, 2, 1, count=2, h=2.0 ** -10)
    dom = fam.domain
    zero = adams.linfty_bound_check(GridFunction.zeros(dom.grid), dom, 1, 2)
    assert zero["holds"] and zero["max_abs_u"] == 0
    rep = adams.linfty_bound_check(fam.candidate(1), dom, 1, 2)
    assert rep["holds"] and 0 < rep["ratio"] <= 1.1
    forced = adams.linfty_bound_check(fam.candidate(1), dom, 1, 2, slack=-0.9)
    assert not forced["holds"] and forced["bound"] > 0
