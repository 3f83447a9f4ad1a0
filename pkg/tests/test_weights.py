from math import pi, sqrt

import numpy as np
import pytest

from singclt import spectral
from singclt import weights as wm
from singclt.errors import DegenerateWeightError, DomainError, OverlapError, UnsupportedLimitError

import oracles


def spec(*comps, td=spectral.DISCRETE, step=1.0):
    return wm.weights_from_components(list(comps), td, step)


ALL_FAMILIES = [
    spec(wm.constant()),
    spec(wm.cosine(1.3, 0.4)),
    spec(wm.sine(0.9)),
    spec(wm.power_cosine(1.0, 0.7, 0.3)),
    spec(wm.tabulated([0, 100, 5000], [1.0, -2.0, 0.5])),
    wm.trig_regression_gradient([(1.0, 0.5, 1.0)]),
]


def test_weight_norm_examples():
    assert wm.weight_norm(spec(wm.constant()), 0, 100) == pytest.approx(10.0, rel=1e-15)
    w = spec(wm.cosine(pi / 2))
    assert wm.weight_norm(w, 0, 4) == pytest.approx(sqrt(2), rel=1e-14)
    norms = [wm.weight_norm(w, 0, T) for T in range(1, 40)]
    assert all(b >= a for a, b in zip(norms, norms[1:]))


def test_degenerate_weight():
    with pytest.raises(DegenerateWeightError):
        wm.weight_norm(spec(wm.sine(0.0)), 0, 10)
    with pytest.raises(DegenerateWeightError):
        wm.trig_gradient_components(0.0, 0.0, 1.0)


def test_transform_fejer():
    w = spec(wm.constant())
    lam = np.array([0.3, 1.1, 2.7, -0.8])
    for T in (7, 64):
        v = wm.weight_transform(w, 0, T, lam)
        fejer = np.sin(T * lam / 2) ** 2 / np.sin(lam / 2) ** 2
        assert np.allclose(np.abs(v) ** 2, fejer, rtol=1e-10)


def test_transform_zero_and_symmetry():
    w = spec(wm.power_cosine(0.5, 0.7, 0.2))
    t = np.arange(1, 51, dtype=float)
    assert wm.weight_transform(w, 0, 50, 0.0) == pytest.approx(np.sum(w.components[0](t)))
    lam = np.linspace(-3, 3, 9)
    assert np.allclose(wm.weight_transform(w, 0, 50, -lam), np.conj(wm.weight_transform(w, 0, 50, lam)))


@pytest.mark.parametrize("T", [2 ** 8, 2 ** 10, 2 ** 12])
@pytest.mark.parametrize("w", ALL_FAMILIES, ids=lambda w: w.components[0].kind)
def test_mass_and_parseval(w, T):
    g = wm.matrix_measure(w, T)
    assert np.allclose(g.diagonal_mass(), 1.0, atol=1e-6)
    for i in range(w.q):
        lhs, rhs = wm.parseval_check(w, i, T)
        assert lhs == pytest.approx(rhs, rel=1e-6)


def test_parseval_against_sampled_transform():
    w = spec(wm.cosine(1.3))
    T = 64
    lam = np.linspace(-pi, pi, 4097)[:-1]
    p = np.abs(wm.weight_transform(w, 0, T, lam)) ** 2
    # trapezoid over a full period is exact for trigonometric polynomials of degree < 4096
    assert np.sum(p) * 2 * pi / lam.size == pytest.approx(2 * pi * wm.weight_norm(w, 0, T) ** 2, rel=1e-10)


def test_cells_hermitian_psd():
    w = wm.trig_regression_gradient([(1.0, 0.5, 1.0)])
    g = wm.matrix_measure(w, 256)
    assert np.allclose(g.entries, np.conj(np.transpose(g.entries, (0, 2, 1))), atol=1e-14)
    assert np.min(np.linalg.eigvalsh(g.entries)) >= -1e-10


def test_fejer_concentration():
    w = spec(wm.constant())
    masses = []
    for T in (64, 128, 256, 512):
        g = wm.matrix_measure(w, T, np.concatenate([[-pi], np.linspace(-0.1, 0.1, 3), [pi]]))
        masses.append(float(np.real(g.mass(-0.1, 0.1)[0, 0])))
    assert all(b >= a - 1e-12 for a, b in zip(masses, masses[1:]))
    assert masses[-1] >= 0.95


def test_cos_sin_off_diagonal_atoms():
    d = 1.0
    w = spec(wm.cosine(d), wm.sine(d))
    g = wm.matrix_measure(w, 4096)
    plus = g.mass(d - 0.05, d + 0.05)
    minus = g.mass(-d - 0.05, -d + 0.05)
    # w_T(lam) = sum exp(i t lam) w(t): near +d, w^1 ~ T/2 and w^2 ~ i T/2
    assert plus[0, 1] == pytest.approx(-0.5j, abs=1e-2)
    assert minus[0, 1] == pytest.approx(0.5j, abs=1e-2)
    assert plus[0, 0] == pytest.approx(0.5, abs=1e-2)
    mu = wm.limit_measure(w)
    atoms = {round(loc, 12): M for loc, M in mu.atoms}
    assert atoms[1.0][0, 1] == pytest.approx(-0.5j, abs=1e-14)
    assert atoms[-1.0][0, 1] == pytest.approx(0.5j, abs=1e-14)


def test_limit_measure_constant():
    mu = wm.limit_measure(spec(wm.constant()))
    assert len(mu.atoms) == 1
    loc, M = mu.atoms[0]
    assert loc == 0.0 and M[0, 0] == pytest.approx(1.0)


def test_limit_measure_sine_empirical():
    d = 0.9
    w = spec(wm.sine(d))
    mu = wm.limit_measure(w)
    assert sorted(round(l, 12) for l, _ in mu.atoms) == [-0.9, 0.9]
    assert all(M[0, 0] == pytest.approx(0.5) for _, M in mu.atoms)
    eps = 0.05
    for T in (2 ** 8, 2 ** 11, 2 ** 14):
        g = wm.matrix_measure(w, T)
        m = float(np.real(g.mass(d - eps, d + eps)[0, 0]))
        assert m == pytest.approx(0.5, abs=8 / (T * eps))


def test_limit_measure_tabulated_rejected():
    with pytest.raises(UnsupportedLimitError):
        wm.limit_measure(spec(wm.tabulated([0, 10], [1, 2])))


def test_trig_block_beta_entries():
    A, B, phi = 1.0, 0.5, 1.0
    w = wm.trig_regression_gradient([(A, B, phi)])
    total = wm.limit_measure(w)
    M = sum(np.real(m) for _, m in total.atoms)
    C = sqrt(A * A + B * B)
    # both atoms together give the displayed block
    assert np.allclose(M, wm.example_block(A, B), atol=1e-12)
    assert M[0, 2] == pytest.approx(sqrt(3) * B / (2 * C))
    assert M[1, 2] == pytest.approx(-sqrt(3) * A / (2 * C))


def test_admissibility_constant(ref_model):
    mu = wm.limit_measure(spec(wm.constant()))
    val = wm.admissibility_integral(ref_model, mu)[0, 0]
    assert val.real == pytest.approx(oracles.lag_power_sum(0.7, pi / 2, 1) / (2 * pi), rel=1e-6)


def test_admissibility_overlap():
    m = spectral.single_component(0.7, 0.0)
    with pytest.raises(OverlapError):
        wm.admissibility_integral(m, wm.limit_measure(spec(wm.constant())))
    m2 = spectral.single_component(0.7, 1.0)
    with pytest.raises(OverlapError):
        wm.admissibility_integral(m2, wm.limit_measure(spec(wm.cosine(1.0))))


def test_admissibility_finite_T_convergence(ref_model):
    w = spec(wm.cosine(1.0))
    limit = np.real(wm.admissibility_integral(ref_model, wm.limit_measure(w)))[0, 0]
    gaps = []
    for T in (2 ** 8, 2 ** 10, 2 ** 12, 2 ** 14):
        val = np.real(wm.finite_T_integral(ref_model, w, T))[0, 0]
        gaps.append(abs(val / limit - 1))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] <= 5e-2


def test_grid_integral_matches_exact(ref_model):
    w = spec(wm.cosine(1.0))
    T = 1024
    edges = wm.default_measure_edges(w, T, 4096, extra=ref_model.singularities())
    g = wm.matrix_measure(w, T, edges)
    grid = np.real(wm.admissibility_integral(ref_model, g))[0, 0]
    exact = np.real(wm.finite_T_integral(ref_model, w, T))[0, 0]
    assert grid == pytest.approx(exact, rel=2e-2)


def test_b3_constant():
    r = wm.check_B2_B3(spec(wm.constant()), spectral.single_component(0.7, pi / 2),
                       [2 ** 8, 2 ** 10, 2 ** 12])
    assert np.allclose(r.b3, 1.0, rtol=1e-14)
    assert all(r.b3_bounded)


def test_b2_cosine_bounded(ref_model):
    r = wm.check_B2_B3(spec(wm.cosine(1.0)), ref_model, [2 ** 8, 2 ** 10, 2 ** 12, 2 ** 14])
    assert all(r.b2_bounded) and all(r.b3_bounded)


def test_b3_linear_trend():
    w = spec(wm.power_cosine(1.0, 0.0), td=spectral.CONTINUOUS, step=0.125)
    for T in (64.0, 512.0):
        k = wm.b3_constants(w, T)[0]
        assert k == pytest.approx(sqrt(3), rel=1e-3)


def test_weight_json_round_trip():
    for w in ALL_FAMILIES:
        back = wm.WeightSpec.from_json(w.to_json())
        assert back == w


def test_measure_csv_round_trip():
    w = spec(wm.cosine(1.0), wm.sine(1.0))
    g = wm.matrix_measure(w, 128, np.linspace(-pi, pi, 33))
    back = wm.MatrixMeasureGrid.from_csv(g.to_csv(), 128)
    assert np.array_equal(back.entries, g.entries)
    assert np.array_equal(back.edges, g.edges)
    assert g.to_csv().splitlines()[0].startswith("lambda_low,lambda_high,re_00,im_00")


def test_measure_coverage_error():
    from singclt.errors import CoverageError
    with pytest.raises(CoverageError):
        wm.matrix_measure(spec(wm.constant()), 512, np.linspace(1.0, 2.0, 5))
    with pytest.raises(DomainError):
        wm.matrix_measure(spec(wm.constant()), 512, np.linspace(-4.0, 4.0, 5))
