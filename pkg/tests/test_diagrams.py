import random
from fractions import Fraction
from math import factorial, pi

import numpy as np
import pytest

import oracles
from singclt import diagrams as dg
from singclt import limitcov, spectral
from singclt import weights as wm
from singclt.errors import BudgetError, DomainError


# enumeration

@pytest.mark.parametrize("order,count", [((1, 1, 1, 1), 3), ((1, 1, 1), 0), ((2, 2), 2),
                                         ((2, 2, 2, 2), 60), ((3, 3), 6), ((1, 2, 3), 6), ((1, 1, 4), 0)])
def test_small_counts(order, count):
    assert len(dg.enumerate_diagrams(order)) == count


@pytest.mark.parametrize("order", [(1, 1), (2, 2, 2), (1, 1, 2, 2), (3, 3, 2), (2, 2, 2, 2),
                                   (3, 3, 3, 3), (4, 4, 4), (2, 2, 2, 2, 2, 2), (1, 3, 2, 4)])
def test_counts_match_brute_force(order):
    ds = dg.enumerate_diagrams(order)
    assert len(ds) == oracles.count_diagrams_brute(order)
    assert len(set(ds)) == len(ds)


def test_budget():
    with pytest.raises(BudgetError):
        dg.enumerate_diagrams((3, 3, 3, 3, 3, 3))
    with pytest.raises(DomainError):
        dg.enumerate_diagrams((2, 0))


def test_diagram_validation():
    with pytest.raises(DomainError):
        dg.Diagram((2, 2), ((((0, 0)), (0, 1)), ((1, 0), (1, 1))))
    with pytest.raises(DomainError):
        dg.Diagram((1, 1, 1), (((0, 0), (1, 0)),))


def test_json_round_trip():
    for d in dg.enumerate_diagrams((2, 1, 1, 2)):
        assert dg.Diagram.from_json(d.to_json()) == d


# classification

@pytest.mark.parametrize("j", [1, 2, 3])
def test_regular_count(j):
    ds = dg.enumerate_diagrams((j,) * 4)
    assert sum(dg.classify_regular(d) for d in ds) == 3 * factorial(j) ** 2 == dg.regular_count(j)


def test_odd_levels_never_regular():
    for order in ((2, 2, 2), (1, 1, 2), (2, 2, 2, 2, 2)):
        assert not any(dg.classify_regular(d) for d in dg.enumerate_diagrams(order))


def test_singletons_all_regular():
    assert all(d.is_regular for d in dg.enumerate_diagrams((1, 1, 1, 1)))


@pytest.mark.parametrize("j", [1, 2, 3])
def test_level_structure(j):
    for d in dg.enumerate_diagrams((j,) * 4):
        cls = dg.classify_levels(d)
        assert cls[0] == dg.STRONG_DONOR and cls[3] == dg.RECIPIENT


def test_paired_regular_indegrees():
    j = 2
    d = dg.Diagram((j,) * 4, (((0, 0), (1, 0)), ((0, 1), (1, 1)), ((2, 0), (3, 0)), ((2, 1), (3, 1))))
    assert d.level_indegrees == (j, 0, j, 0)
    assert d.is_regular


def test_two_strong_donors_two_recipients():
    for d in dg.enumerate_diagrams((2, 2, 2, 2)):
        sd, r = dg.level_counts(d)
        if sd == 2:
            assert r == 2


def test_permutation_invariance(ref_model, const_weights):
    random.seed(3)
    ds = [d for d in dg.enumerate_diagrams((2, 2, 2, 2)) if not d.is_regular]
    for d in random.sample(ds, 6):
        perm = random.sample(range(4), 4)
        a = dg.diagram_value(d, ref_model, const_weights, [1.0], 64, 1.0)
        b = dg.diagram_value(dg.permute_levels(d, perm), ref_model, const_weights, [1.0], 64, 1.0)
        assert abs(a) == pytest.approx(abs(b), rel=1e-12)


# diagram formula

@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_pair_moment(k):
    for rho in (Fraction(1, 3), Fraction(-2, 5)):
        corr = [[1, rho], [rho, 1]]
        assert dg.hermite_moment((k, k), corr) == factorial(k) * rho ** k


def test_four_singletons():
    rho = Fraction(1, 4)
    corr = [[1 if i == j else rho for j in range(4)] for i in range(4)]
    assert dg.hermite_moment((1, 1, 1, 1), corr) == 3 * rho ** 2


def test_identity_correlation():
    assert dg.hermite_moment((2, 2, 2, 2), np.eye(4)) == 0


def test_against_isserlis_random():
    rng = random.Random(7)
    for orders in ((1, 2, 3), (2, 2, 2, 2), (1, 1, 3, 3), (4, 2), (2, 3, 1, 2), (1, 1, 1, 1, 2)):
        p = len(orders)
        corr = [[Fraction(1) if i == k else None for k in range(p)] for i in range(p)]
        for i in range(p):
            for k in range(i + 1, p):
                corr[i][k] = corr[k][i] = Fraction(rng.randint(-3, 3), 10)
        assert dg.hermite_moment(orders, corr) == oracles.isserlis_moment(orders, corr)


def test_diagram_sum_equals_grouped():
    corr = np.array([[1, .2, -.1, .3], [.2, 1, .25, 0], [-.1, .25, 1, .1], [.3, 0, .1, 1]])
    for orders in ((2, 2, 2, 2), (1, 3, 2, 2), (3, 3, 1, 1)):
        assert dg.diagram_sum(orders, corr) == pytest.approx(dg.hermite_moment(orders, corr),
                                                             rel=1e-12, abs=1e-14)


def test_invalid_correlation():
    with pytest.raises(DomainError):
        dg.hermite_moment((1, 1), [[1, 2], [2, 1]])
    with pytest.raises(DomainError):
        dg.hermite_moment((1, 1), [[2, 0], [0, 1]])
    with pytest.raises(DomainError):
        dg.hermite_moment((1, 1), [[1, 0.2], [0.3, 1]])


# fourth moment

def brute_fourth(model, weights, j, z, T, sigma2):
    t, a = limitcov._r_weights(weights, z, T)
    comps = [(c.A, c.alpha, c.kappa) for c in model.components]
    total = 0.0
    idx = range(t.size)
    for i1 in idx:
        for i2 in idx:
            for i3 in idx:
                for i4 in idx:
                    s = [t[i1], t[i2], t[i3], t[i4]]
                    corr = [[float(oracles.B(comps, s[u] - s[v])) for v in range(4)] for u in range(4)]
                    total += a[i1] * a[i2] * a[i3] * a[i4] * oracles.isserlis_moment((j,) * 4, corr)
    return total / sigma2 ** 2


@pytest.mark.parametrize("j,T", [(1, 5), (2, 4), (3, 3)])
def test_fourth_moment_against_brute(j, T):
    m = spectral.SpectralModel((spectral.SpectralComponent(0.5, 0.8, 0.4),
                                spectral.SpectralComponent(0.5, 0.7, 2.0)))
    w = wm.weights_from_components([wm.constant(), wm.cosine(1.3)])
    z = [0.6, 0.8]
    res = dg.fourth_moment_statistic(m, w, j, z, T, sigma2=1.0)
    assert res.value == pytest.approx(brute_fourth(m, w, j, z, T, 1.0), rel=1e-10)


def test_fourth_moment_j1_exact(ref_model, const_weights):
    res = dg.fourth_moment_statistic(ref_model, const_weights, 1, [1.0], 512)
    assert res.nonregular == 0.0
    assert res.value == pytest.approx(3 * res.sigma_T2 ** 2 / res.sigma2 ** 2, rel=1e-14)
    s2T = limitcov.sigma_T_squared(ref_model, const_weights, 1, [1.0], 512)
    assert res.sigma_T2 == pytest.approx(s2T, rel=1e-12)


@pytest.mark.parametrize("j", [2, 3])
def test_regular_part(ref_model, cos_weights, j):
    res = dg.fourth_moment_statistic(ref_model, cos_weights, j, [1.0], 64)
    assert res.regular == pytest.approx(3 * res.sigma_T2 ** 2 / res.sigma2 ** 2, rel=1e-12)
    assert res.value == pytest.approx(res.regular + res.nonregular, rel=1e-12)
    assert sum(n for n, _ in res.pattern_values.values()) == len(dg.enumerate_diagrams((j,) * 4))


def test_nonregular_sum_decreasing(ref_model, const_weights):
    vals = [dg.fourth_moment_statistic(ref_model, const_weights, 2, [1.0], 2 ** k).nonregular
            for k in range(7, 10)]
    assert vals[0] > vals[1] > vals[2] > 0


def test_fourth_moment_budget(ref_model, const_weights):
    with pytest.raises(BudgetError):
        dg.fourth_moment_statistic(ref_model, const_weights, 3, [1.0], 512)
    res = dg.fourth_moment_statistic(ref_model, const_weights, 3, [1.0], 512, fallback=True,
                                     replicates=200)
    assert res.route == dg.MONTECARLO and res.notes


def test_monte_carlo_route_agrees(ref_model, const_weights):
    exact = dg.fourth_moment_statistic(ref_model, const_weights, 2, [1.0], 64)
    mc = dg.fourth_moment_statistic(ref_model, const_weights, 2, [1.0], 64,
                                    route=dg.MONTECARLO, replicates=20000, seed=4)
    assert abs(mc.value - exact.value) <= 3 * mc.stderr


def test_jackknife_kurtosis_normal():
    x = np.random.default_rng(0).standard_normal(20000)
    k, se = dg.jackknife_kurtosis(x)
    assert abs(k - 3) < 4 * se and 0.02 < se < 0.06


# contractions

def test_contraction_white_noise():
    r = np.array([0.7, -1.3])
    c = np.array([1.0, 0.0])
    for j, p in ((2, 1), (3, 1), (3, 2)):
        assert dg.contraction_from_lags(r, c, j, p) == pytest.approx(0.7 ** 4 + 1.3 ** 4, rel=1e-14)


def test_contraction_symmetry_constant_weight(ref_model, const_weights):
    a = dg.contraction_norm(dg.ContractionSpec(3, 1, 256, ref_model, const_weights))
    b = dg.contraction_norm(dg.ContractionSpec(3, 2, 256, ref_model, const_weights))
    assert a == pytest.approx(b, rel=1e-12)


def test_contraction_against_dense_sum(ref_model, cos_weights):
    T, j, p = 12, 3, 1
    t, a = limitcov._r_weights(cos_weights, [1.0], T)
    Bm = oracles.B([(1.0, 0.7, pi / 2)], np.subtract.outer(t, t))
    ref = np.einsum("q,k,l,i,qk,li,ql,ki->", a, a, a, a, Bm ** (j - p), Bm ** (j - p), Bm ** p, Bm ** p)
    val = dg.contraction_norm(dg.ContractionSpec(j, p, T, ref_model, cos_weights))
    assert val == pytest.approx(ref, rel=1e-12)


def test_contraction_spec_validation(ref_model, const_weights):
    with pytest.raises(DomainError):
        dg.ContractionSpec(1, 1, 16, ref_model, const_weights)
    with pytest.raises(DomainError):
        dg.ContractionSpec(3, 3, 16, ref_model, const_weights)
    with pytest.raises(BudgetError):
        dg.contraction_norm(dg.ContractionSpec(2, 1, 8192, ref_model, const_weights))


def test_bound_ingredients_dominate(ref_model, const_weights):
    T = 256
    s2 = limitcov.sigma_limit_squared(ref_model, const_weights, 2, [1.0])
    for d in dg.enumerate_diagrams((2, 2, 2, 2)):
        if d.is_regular:
            continue
        ing = dg.nonregular_bound_ingredients(d, ref_model, const_weights, 2, [1.0], T, s2)
        val = dg.diagram_value(d, ref_model, const_weights, [1.0], T, s2)
        assert abs(val) <= ing["bound"]
        assert ing["rho_sd"] >= 1 and ing["rho_r"] >= 1
