"""Quadrature helpers for integrands with algebraic endpoint singularities."""

import warnings

import numpy as np
from scipy import integrate

from .errors import NumericalError


def integrate_power_terms(terms, width):
    """Exact integral of sum(c * x**p) over (0, width] for p > -1."""
    total = 0.0
    for coef, power in terms:
        total += coef * width ** (power + 1.0) / (power + 1.0)
    return total


def _eval_power_terms(terms, x):
    out = np.zeros_like(x, dtype=float)
    for coef, power in terms:
        out += coef * np.abs(x) ** power
    return out


def integrate_with_singularities(func, a, b, singular, delta, epsabs=1e-13,
                                 epsrel=1e-12, limit=400):
    """Integrate ``func`` over [a, b] when it blows up like a power at known points.

    ``singular`` maps a location x0 to a list of ``(coef, power)`` pairs whose
    sum approximates func(x0 + x) for small |x| (the same expansion on both
    sides). Inside |x - x0| <= delta the expansion is integrated exactly and
    only the bounded remainder goes through adaptive quadrature.

    Returns (value, error estimate).
    """
    with warnings.catch_warnings():
        # quad reports roundoff once it is at machine precision; not an error here
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return _integrate_split(func, a, b, singular, delta, epsabs, epsrel, limit)


def _integrate_split(func, a, b, singular, delta, epsabs, epsrel, limit):
    locs = sorted(x0 for x0 in singular if a - delta < x0 < b + delta)
    # pieces: list of (lo, hi, singular location or None, side)
    cuts = [a, b]
    for x0 in locs:
        cuts.extend([x0 - delta, x0, x0 + delta])
    cuts = sorted(c for c in set(cuts) if a <= c <= b)
    total = 0.0
    err = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        near = [x0 for x0 in locs if abs(mid - x0) < delta]
        if near:
            x0 = min(near, key=lambda s: abs(mid - s))
            terms = singular[x0]
            d_lo, d_hi = lo - x0, hi - x0
            # exact part; one of the ends is the singular point itself
            exact = (np.sign(d_hi) * integrate_power_terms(terms, abs(d_hi))
                     - np.sign(d_lo) * integrate_power_terms(terms, abs(d_lo)))

            def rem(x, x0=x0, terms=terms):
                return func(x) - _eval_power_terms(terms, np.asarray(x - x0))

            val, e = integrate.quad(rem, lo, hi, epsabs=epsabs, epsrel=epsrel,
                                    limit=limit)
            total += exact + val
        else:
            val, e = integrate.quad(func, lo, hi, epsabs=epsabs, epsrel=epsrel,
                                    limit=limit)
            total += val
        err += e
    if not np.isfinite(total):
        raise NumericalError("singular integral did not converge", achieved=err)
    return float(total), float(err)


def graded_panels(breaks, width, n_fine, grade=2.0):
    """Panel edges on [breaks[0], breaks[-1]] refined geometrically toward each break.

    Near every interior or end break the edges are spaced like
    ``width * grade**k`` until they reach the coarse spacing ``width``.
    ``n_fine`` caps the number of geometric levels per side.
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    edges = [breaks]
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        span = hi - lo
        n_coarse = max(1, int(np.ceil(span / width)))
        edges.append(np.linspace(lo, hi, n_coarse + 1))
        h = min(width, span / 2.0)
        for _ in range(n_fine):
            h /= grade
            edges.append(np.array([lo + h, hi - h]))
    return np.unique(np.concatenate(edges))


def gauss_legendre_rule(edges, order):
    """Nodes and weights of a composite Gauss-Legendre rule over consecutive edges."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + hi) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()
