from math import factorial, pi, sqrt

import numpy as np
import pytest

import oracles
from singclt import hermite, limitcov, spectral
from singclt import weights as wm
from singclt.errors import AssumptionViolation, ConsistencyError, OverlapError


def direct_sigma(model, weights, j, z, T):
    """j! sum_{t,s} B^j(t-s) R(t) R(s) by a dense double sum."""
    t = np.arange(1, T + 1, dtype=float)
    W = np.sqrt([np.sum(c(t) ** 2) for c in weights.components])
    R = sum(zi / Wi * c(t) for zi, Wi, c in zip(z, W, weights.components))
    Bm = oracles.B([(c.A, c.alpha, c.kappa) for c in model.components], np.subtract.outer(t, t))
    return factorial(j) * float(R @ (Bm ** j) @ R)


def test_sigma_T_hand_value(ref_model, const_weights):
    b1, b2 = spectral.covariance(ref_model, 1.0), spectral.covariance(ref_model, 2.0)
    hand = (3 + 4 * b1 + 2 * b2) / 3
    for route, tol in ((limitcov.TIME, 1e-14), (limitcov.FREQUENCY, 1e-8)):
        assert limitcov.sigma_T_squared(ref_model, const_weights, 1, [1.0], 3, route) == \
            pytest.approx(hand, rel=tol)


@pytest.mark.parametrize("j", [1, 2, 3])
def test_sigma_T_time_route_against_dense_sum(j):
    m = spectral.SpectralModel((spectral.SpectralComponent(0.3, 0.8, 0.5),
                                spectral.SpectralComponent(0.7, 0.7, 2.0)))
    w = wm.weights_from_components([wm.constant(), wm.cosine(1.3, 0.2)])
    z = [0.6, -0.8]
    for T in (17, 256, 1024):
        ref = direct_sigma(m, w, j, z, T)
        assert limitcov.sigma_T_squared(m, w, j, z, T) == pytest.approx(ref, rel=1e-10)
        assert limitcov.sigma_T_brute(m, w, j, z, T) == pytest.approx(ref, rel=1e-10)


def test_routes_agree_j2(ref_model, cos_weights):
    a = limitcov.sigma_T_squared(ref_model, cos_weights, 2, [1.0], 1024, limitcov.TIME)
    b = limitcov.sigma_T_squared(ref_model, cos_weights, 2, [1.0], 1024, limitcov.FREQUENCY)
    assert abs(a - b) <= 1e-2 * a


def test_route_both_and_consistency(ref_model, const_weights, monkeypatch):
    v = limitcov.sigma_T_squared(ref_model, const_weights, 1, [1.0], 128, "both")
    assert v > 0
    monkeypatch.setattr(limitcov, "_sigma_frequency", lambda *a, **k: 2 * v)
    with pytest.raises(ConsistencyError):
        limitcov.sigma_T_squared(ref_model, const_weights, 1, [1.0], 128, "both")


def test_zero_direction(ref_model, const_weights):
    assert limitcov.sigma_T_squared(ref_model, const_weights, 2, [0.0], 64) == 0.0


def test_sigma_limit_lag_sum(ref_model, const_weights):
    s2 = limitcov.sigma_limit_squared(ref_model, const_weights, 1, [1.0])
    assert s2 == pytest.approx(oracles.lag_power_sum(0.7, pi / 2, 1), rel=1e-3)


@pytest.mark.parametrize("j", [1, 2])
def test_sigma_T_converges(ref_model, const_weights, j):
    lim = limitcov.sigma_limit_squared(ref_model, const_weights, j, [1.0])
    gaps = [abs(limitcov.sigma_T_squared(ref_model, const_weights, j, [1.0], 2 ** k) / lim - 1)
            for k in range(8, 15, 2)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] <= 5e-2


def test_sigma_limit_homogeneous(ref_model):
    w = wm.weights_from_components([wm.constant(), wm.cosine(1.0)])
    z = np.array([0.3, 0.9])
    for c in (-2.0, 0.5, 7.0):
        for j in (1, 2):
            assert limitcov.sigma_limit_squared(ref_model, w, j, c * z) == pytest.approx(
                c * c * limitcov.sigma_limit_squared(ref_model, w, j, z), rel=1e-12)


def test_xi_h1(ref_model, const_weights):
    e = hermite.hermite_coefficients({"kind": "hermite", "k": 1}, 4)
    res = limitcov.limit_covariance(ref_model, const_weights, e)
    assert res.Xi[0, 0] == pytest.approx(2 * pi * spectral.spectral_density(ref_model, 0.0), rel=1e-12)
    assert res.Xi[0, 0] == pytest.approx(oracles.lag_power_sum(0.7, pi / 2, 1), rel=1e-6)
    assert res.tail_estimate == 0.0


def test_xi_h2_single_term(ref_model, const_weights):
    e = hermite.hermite_coefficients({"kind": "hermite", "k": 2}, 8)
    res = limitcov.limit_covariance(ref_model, const_weights, e)
    assert [j for j, _ in res.per_order_terms] == [2]
    assert res.tail_estimate == 0.0
    expect = 2 * pi * (2.0 ** 2 / 2) * spectral.convolution_value(ref_model, 2, 0.0)
    assert res.Xi[0, 0] == pytest.approx(expect, rel=1e-12)
    assert res.Xi[0, 0] == pytest.approx(2 * oracles.lag_power_sum(0.7, pi / 2, 2), rel=1e-4)


def test_xi_sign_against_lag_oracle(ref_model, const_weights):
    # Cov(sign X, sign Y) = (2/pi) arcsin(rho) summed over lags
    e = hermite.hermite_coefficients("sign", 60)
    res = limitcov.limit_covariance(ref_model, const_weights, e)
    t = np.arange(1, 1 << 20, dtype=float)
    g = 2 / pi * np.arcsin(oracles.B([(1.0, 0.7, pi / 2)], t))
    # the non-oscillating part of arcsin(B) is O(t^-2.1) after cos^3, so plain summation suffices
    ref = 1.0 + 2 * float(np.sum(g))
    assert res.Xi[0, 0] == pytest.approx(ref, rel=1e-3)


def test_quadratic_form_consistency(ref_model):
    w = wm.weights_from_components([wm.cosine(1.0), wm.sine(1.0), wm.constant()])
    e = hermite.hermite_coefficients("abs_centered", 30)
    res = limitcov.limit_covariance(ref_model, w, e, d=30, include_remainder=False)
    rng = np.random.default_rng(0)
    for _ in range(5):
        z = rng.normal(size=3)
        rhs = sum((e.coefficients[j] / factorial(j)) ** 2 *
                  limitcov.sigma_limit_squared(ref_model, w, j, z, conjecture_mode=True)
                  for j in range(1, 31) if e.coefficients[j] != 0)
        assert z @ res.Xi @ z == pytest.approx(rhs, rel=1e-8)


def test_xi_symmetric_psd(ref_model):
    w = wm.trig_regression_gradient([(1.0, 0.5, 1.0), (0.3, -0.7, 2.5)])
    e = hermite.hermite_coefficients("sign", 60)
    res = limitcov.limit_covariance(ref_model, w, e)
    assert np.array_equal(res.Xi, res.Xi.T)
    assert np.min(np.linalg.eigvalsh(res.Xi)) >= -1e-10


def test_trig_blocks_pattern(ref_model):
    theta = [(1.0, 0.5, 1.0), (0.3, -0.7, 2.5)]
    w = wm.trig_regression_gradient(theta)
    e = hermite.hermite_coefficients({"kind": "hermite", "k": 1}, 4)
    res = limitcov.limit_covariance(ref_model, w, e)
    for b, (A, B, phi) in zip(res.trig_blocks, theta):
        i = b["index"]
        block = res.Xi[i:i + 3, i:i + 3]
        scale = 2 * pi * spectral.spectral_density(ref_model, phi)
        assert np.allclose(block, scale * wm.example_block(A, B), rtol=1e-10, atol=1e-12)
        assert b["scale"] == pytest.approx(scale, rel=1e-12)
    # blocks for different frequencies do not interact
    assert np.allclose(res.Xi[0:3, 3:6], 0.0, atol=1e-12)


def test_overlap_and_assumptions(const_weights):
    e = hermite.hermite_coefficients({"kind": "hermite", "k": 1}, 4)
    with pytest.raises(OverlapError):
        limitcov.limit_covariance(spectral.single_component(0.7, 0.0), const_weights, e)
    with pytest.raises(AssumptionViolation):
        limitcov.limit_covariance(spectral.single_component(0.4, 1.0), const_weights, e)
    res = limitcov.limit_covariance(spectral.single_component(0.4, 1.0), const_weights, e,
                                    conjecture_mode=True)
    assert res.conjecture_regime


def test_condition_C_single_atom(ref_model, cos_weights):
    r = limitcov.check_condition_C(ref_model, cos_weights, [1, 2, 3])
    assert r.passed
    assert r.min_eigenvalues[1] == pytest.approx(spectral.convolution_value(ref_model, 2, 1.3),
                                                 rel=1e-12)


def test_condition_C_trig_block_eigenvalues(ref_model):
    A, B, phi = 1.0, 0.5, 1.0
    w = wm.trig_regression_gradient([(A, B, phi)])
    M = np.real(wm.admissibility_integral(ref_model, wm.limit_measure(w)))
    ev = np.sort(np.linalg.eigvalsh(M)) / spectral.spectral_density(ref_model, phi)
    assert np.allclose(ev, [1 - sqrt(3) / 2, 1, 1 + sqrt(3) / 2], atol=1e-12)
    assert limitcov.check_condition_C(ref_model, w, [1]).passed


def test_condition_C_duplicated(ref_model):
    w = wm.weights_from_components([wm.cosine(1.0), wm.cosine(1.0)])
    assert not limitcov.check_condition_C(ref_model, w, [1, 2]).passed


def test_result_serialization(ref_model):
    w = wm.trig_regression_gradient([(1.0, 0.5, 1.0)])
    e = hermite.hermite_coefficients("sign", 60)
    res = limitcov.limit_covariance(ref_model, w, e)
    back = limitcov.LimitCovarianceResult.from_dict(res.to_dict())
    assert np.array_equal(back.Xi, res.Xi)
    assert np.array_equal(back.remainder, res.remainder)
    rows = res.to_csv().splitlines()
    assert rows[0] == "part,row,col,value"
    assert rows[1].startswith("total,0,0,")
