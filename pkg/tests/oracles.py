"""Independent reference computations used by the tests.

None of these call the package's own numerical routines for the quantity
they check.
"""

from fractions import Fraction
from itertools import product
from math import comb, factorial, pi

import numpy as np
from numpy.polynomial import hermite_e
from scipy import integrate
from scipy.special import zeta


def B(components, t):
    """Covariance from raw (A, alpha, kappa) tuples."""
    t = np.asarray(t, dtype=float)
    return sum(A * np.cos(k * t) * (1 + t * t) ** (-a / 2) for A, a, k in components)


def fourier_inversion_continuous(components, lam):
    """(1/pi) int_0^inf B(t) cos(lam t) dt by QUADPACK's Fourier integrator."""
    total = 0.0
    for A, a, k in components:
        for w in (lam - k, lam + k):
            val, _ = integrate.quad(lambda t: (1 + t * t) ** (-a / 2), 0, np.inf,
                                    weight="cos", wvar=abs(w), limlst=200)
            total += A * 0.5 * val
    return total / pi


def fourier_inversion_discrete(components, lam, n=1 << 20, window=1 << 18):
    """(1/2 pi) sum_t B(t) exp(-i lam t) with Cesaro-averaged partial sums."""
    t = np.arange(1, n + window + 1, dtype=float)
    terms = 2 * B(components, t) * np.cos(lam * t)
    partial = 1.0 + np.cumsum(terms)
    return float(partial[n - 1:].mean()) / (2 * pi)


def lag_power_sum(alpha, kappa, j, n=1 << 20, window=1 << 18):
    """sum over all integer lags of B^j for one component, B = cos(kappa t)(1+t^2)^(-alpha/2).

    cos^j expands into cosines of (j - 2k) kappa; the zero-frequency part has its
    tail added through the Hurwitz zeta function, the oscillating rest is
    Cesaro-averaged.
    """
    c0 = sum(comb(j, k) for k in range(j + 1)
             if abs(np.sin((j - 2 * k) * kappa / 2)) < 1e-12) / 2 ** j
    t = np.arange(1, n + window + 1, dtype=float)
    partial = 1.0 + np.cumsum(2 * B([(1.0, alpha, kappa)], t) ** j)
    if c0 > 0:
        partial = partial + 2 * c0 * zeta(alpha * j, t + 1)
    return float(partial[n - 1:].mean())


def isserlis_moment(orders, corr):
    """E prod He_{l_i}(xi_i): expand each He_l into monomials, then Wick pairings."""
    coeffs = [[Fraction(int(round(c))) for c in hermite_e.herme2poly([0] * l + [1])]
              for l in orders]
    total = 0
    for powers in product(*[range(len(c)) for c in coeffs]):
        coef = 1
        for c, k in zip(coeffs, powers):
            coef *= c[k]
        if coef:
            total += coef * gaussian_monomial(powers, corr)
    return total


def gaussian_monomial(powers, corr):
    verts = [i for i, k in enumerate(powers) for _ in range(k)]
    if len(verts) % 2:
        return 0

    def rec(vs):
        if not vs:
            return 1
        first, rest = vs[0], vs[1:]
        s = 0
        for m in range(len(rest)):
            c = corr[first][rest[m]]
            if c:
                s += c * rec(rest[:m] + rest[m + 1:])
        return s

    return rec(tuple(verts))


def all_matchings(n):
    """Every perfect matching of range(n) as a list of pairs."""
    if n == 0:
        yield []
        return
    for m in range(1, n):
        rest = [x for x in range(1, n) if x != m]
        for sub in all_matchings(len(rest)):
            yield [(0, m)] + [(rest[a], rest[b]) for a, b in sub]


def count_diagrams_brute(order):
    labels = [i for i, l in enumerate(order) for _ in range(l)]
    if len(labels) % 2:
        return 0
    return sum(all(labels[a] != labels[b] for a, b in m) for m in all_matchings(len(labels)))


def hermite_moment_quadrature(func, k, n=400):
    """E[func(X) He_k(X)] with the Gauss-Hermite rule from numpy (k small)."""
    x, w = hermite_e.hermegauss(n) if n <= 150 else hermite_e.hermegauss(150)
    w = w / np.sqrt(2 * pi)
    return float(np.sum(w * func(x) * hermite_e.hermeval(x, [0] * k + [1])))


def sign_coefficient_closed(k):
    """C_k(sign) = 2 phi(0) He_{k-1}(0) for odd k."""
    if k % 2 == 0:
        return 0.0
    n = (k - 1) // 2
    dfact = 1
    for m in range(1, 2 * n, 2):
        dfact *= m
    return 2 / np.sqrt(2 * pi) * (-1) ** n * dfact


def sign_tail(d):
    """sum_{k>d} C_k(sign)^2/k! = 1 - sum_{k<=d}."""
    s = sum(sign_coefficient_closed(k) ** 2 / factorial(k) for k in range(1, d + 1))
    return 1.0 - s


def torus_convolution(f, lam, singular_points, alpha):
    """int_{-pi}^{pi} f(mu) f(lam - mu) dmu, splitting the integral at every singular point.

    Near a singular point s the integrand is |mu - s|^(alpha - 1) times a bounded
    factor, handled with the algebraic-weight rule of QUADPACK.
    """
    def wrap(x):
        return np.mod(x + pi, 2 * pi) - pi

    def g(mu):
        try:
            return f(np.array([wrap(mu)]))[0] * f(np.array([wrap(lam - mu)]))[0]
        except ValueError:  # rounding put a node on a singular point
            return g(mu + 1e-11)

    own = [float(wrap(s)) for s in singular_points]
    other = [float(wrap(lam - s)) for s in singular_points]
    order = {}
    for p in own + other:
        key = next((q for q in order if abs(q - p) < 1e-12), p)
        order[key] = order.get(key, 0) + 1
    pts = sorted(order)
    cuts = sorted(set([-pi, pi] + [p for p in pts if -pi < p < pi]))
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        a = (alpha - 1) * _mult(order, lo)
        b = (alpha - 1) * _mult(order, hi)

        def reg(x, lo=lo, hi=hi, a=a, b=b):
            x = min(max(x, lo + 1e-12), hi - 1e-12)  # QAWS samples the endpoints
            return g(x) / ((x - lo) ** a * (hi - x) ** b)

        val, _ = integrate.quad(reg, lo, hi, weight="alg", wvar=(a, b), limit=200,
                                epsabs=1e-10, epsrel=1e-8)
        total += val
    return total


def _mult(order, x):
    """Number of singular factors at x on the torus."""
    for p, m in order.items():
        if abs(np.mod(p - x + pi, 2 * pi) - pi) < 1e-12:
            return m
    return 0


def cesaro_lag_sum(g, n=1 << 20, window=1 << 18):
    """g(0) + 2 sum_{t>=1} g(t), Cesaro-averaged; g must oscillate at every frequency."""
    t = np.arange(1, n + window + 1, dtype=float)
    partial = float(g(np.zeros(1))[0]) + np.cumsum(2 * g(t))
    return float(partial[n - 1:].mean())


def xi_trig_oracle(components, cov_of_rho, theta, n=1 << 20):
    """Xi for trig-gradient weights: per (A, B, phi) block, the displayed 3 x 3 pattern
    scaled by sum_tau Cov(psi(X_0), psi(X_tau)) cos(phi tau)."""
    q = 3 * len(theta)
    out = np.zeros((q, q))
    for b, (A, Bk, phi) in enumerate(theta):
        s = cesaro_lag_sum(lambda t: cov_of_rho(B(components, t)) * np.cos(phi * t), n)
        C = np.hypot(A, Bk)
        u, v = np.sqrt(3) * Bk / (2 * C), -np.sqrt(3) * A / (2 * C)
        out[3 * b:3 * b + 3, 3 * b:3 * b + 3] = s * np.array([[1, 0, u], [0, 1, v], [u, v, 1]])
    return out
