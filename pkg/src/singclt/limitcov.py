"""Finite-horizon chaos variances, their limits, and the limit covariance matrix Xi.

With R_T(t) = sum_i z_i w_i(t) / W_iT,

    sigma_T^2(j, z) = j! sum_{t,s} B^j(t - s) R_T(t) R_T(s)
                    = j! int f^(*j)(lam) |R_T^(lam)|^2 dlam,

and Xi = 2 pi sum_{j>=m} C_j^2/j! int f^(*j) dmu.
"""

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from math import factorial, pi

import numpy as np
from scipy.special import gammaln

from . import kernels
from .errors import AssumptionViolation, ConsistencyError, DomainError, NumericalError
from .quadrature import gauss_legendre_rule, graded_panels
from .spectral import (_wrap, convolution_value, covariance, periodized_value,
                       power_terms, spectral_density, validate_assumptions)
from .weights import (admissibility_integral, check_overlap, example_block,
                      limit_measure, weight_norms)

TIME = "time"
FREQUENCY = "frequency"


def _r_weights(weights, z, T):
    """Nodes t, and a(t) = nu(t) R_T(t)."""
    z = np.asarray(z, dtype=float)
    if z.shape != (weights.q,):
        raise DomainError(f"z must have length {weights.q}")
    t, h = weights.nodes(T)
    W = weight_norms(weights, T)
    return t, h * (z / W) @ weights.values(t)


def _autocorr(a):
    n = a.size
    size = 1 << int(np.ceil(np.log2(2 * n)))
    F = np.fft.rfft(a, size)
    return np.fft.irfft(F * np.conj(F), size)[:n]


def _sigma_time(model, weights, j, z, T):
    t, a = _r_weights(weights, z, T)
    ac = _autocorr(a)
    lags = np.arange(t.size) * weights.step
    Bj = covariance(model, lags) ** j
    return factorial(j) * float(Bj[0] * ac[0] + 2.0 * np.dot(Bj[1:], ac[1:]))


def sigma_T_brute(model, weights, j, z, T):
    """O(T^2) double sum; an oracle for the FFT route."""
    t, a = _r_weights(weights, z, T)
    lags = np.arange(t.size) * weights.step
    Bj = np.ascontiguousarray(covariance(model, lags) ** j)
    return factorial(j) * kernels.toeplitz_bilinear(np.ascontiguousarray(a),
                                                    np.ascontiguousarray(a), Bj)


def _frequency_breaks(model, weights, j, half):
    pts = [-half, half, 0.0]
    pts.extend(model.singularities())
    if j >= 2:
        for _, _, om in power_terms(model, j):
            pts.extend([om, -om])
    for c in weights.components:
        if c.kind != "tabulated":
            for _, _, om in c.exp_terms():
                pts.append(-om)
    pts = np.asarray(pts, dtype=float)
    pts = np.mod(pts + half, 2 * half) - half
    pts = np.concatenate([pts, [-half, half]])
    return np.unique(np.round(pts, 13))


def _sigma_frequency(model, weights, j, z, T, order=10, per_ripple=2, finest=1e-10,
                     conjecture_mode=False):
    t, a = _r_weights(weights, z, T)
    half = pi / weights.step
    breaks = _frequency_breaks(model, weights, j, half)
    width = 2 * pi / (t[-1] - t[0] + weights.step) / per_ripple
    # grade toward the breaks down to panels of width ``finest``
    edges = graded_panels(breaks, width, int(np.ceil(np.log2(width / finest))))
    x, w = gauss_legendre_rule(edges, order)
    dens = periodized_value(model, j, x, 2 * half, conjecture_mode)
    # |R^(x)|^2 by chunked direct sums
    power = np.empty_like(x)
    for s in range(0, x.size, 512):
        e = np.exp(1j * np.outer(x[s:s + 512], t)) @ a
        power[s:s + 512] = e.real ** 2 + e.imag ** 2
    return factorial(j) * float(np.sum(w * dens * power))


def sigma_T_squared(model, weights, j, z, T, route=TIME, tol=1e-2, conjecture_mode=False):
    """sigma_T^2(j, z) by the time-domain lag sum or the spectral integral.

    ``route="both"`` computes both and raises ConsistencyError when they differ
    by more than ``tol`` relative.
    """
    if j < 1:
        raise DomainError("chaos order must be at least 1")
    if not np.any(np.asarray(z, dtype=float)):
        return 0.0
    if model.time_domain != weights.time_domain:
        raise DomainError("model and weights use different time domains")
    if route == TIME:
        return _sigma_time(model, weights, j, z, T)
    if route == FREQUENCY:
        return _sigma_frequency(model, weights, j, z, T, conjecture_mode=conjecture_mode)
    if route == "both":
        a = _sigma_time(model, weights, j, z, T)
        b = _sigma_frequency(model, weights, j, z, T, conjecture_mode=conjecture_mode)
        if abs(a - b) > tol * max(abs(a), abs(b)):
            raise ConsistencyError(
                f"time route {a:.8g} and frequency route {b:.8g} disagree",
                achieved=abs(a - b) / max(abs(a), abs(b)))
        return a
    raise DomainError(f"unknown route {route!r}")


def measure_integral(model, weights, j, conjecture_mode=False):
    """Real part of int f^(*j) dmu over the limit measure (q x q)."""
    mu = limit_measure(weights)
    return np.real(admissibility_integral(model, mu, j, conjecture_mode))


def sigma_limit_squared(model, weights, j, z, conjecture_mode=False):
    """2 pi j! z' [int f^(*j) dmu] z."""
    z = np.asarray(z, dtype=float)
    M = measure_integral(model, weights, j, conjecture_mode)
    return 2 * pi * factorial(j) * float(z @ M @ z)


@dataclass
class LimitCovarianceResult:
    Xi: np.ndarray
    per_order_terms: list
    truncation: int
    tail_estimate: float
    remainder: np.ndarray = None
    trig_blocks: list = field(default_factory=list)
    conjecture_regime: bool = False
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "Xi": self.Xi.tolist(),
            "per_order_terms": [{"j": j, "term": m.tolist()} for j, m in self.per_order_terms],
            "truncation": self.truncation,
            "tail_estimate": self.tail_estimate,
            "remainder": None if self.remainder is None else self.remainder.tolist(),
            "trig_blocks": [{"A": b["A"], "B": b["B"], "phi": b["phi"],
                             "scale": b["scale"], "block": b["block"].tolist()}
                            for b in self.trig_blocks],
            "conjecture_regime": self.conjecture_regime,
            "warnings": list(self.warnings),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["Xi"]), [(e["j"], np.array(e["term"])) for e in d["per_order_terms"]],
                   int(d["truncation"]), float(d["tail_estimate"]),
                   None if d.get("remainder") is None else np.array(d["remainder"]),
                   [{"A": b["A"], "B": b["B"], "phi": b["phi"], "scale": b["scale"],
                     "block": np.array(b["block"])} for b in d.get("trig_blocks", [])],
                   bool(d.get("conjecture_regime", False)), list(d.get("warnings", [])))

    def to_csv(self):
        """Rows: component, order (``total``/``remainder``/j), row, col, value."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["part", "row", "col", "value"])
        q = self.Xi.shape[0]
        parts = [("total", self.Xi)] + [(str(j), m) for j, m in self.per_order_terms]
        if self.remainder is not None:
            parts.append(("remainder", self.remainder))
        for name, m in parts:
            for r in range(q):
                for c in range(q):
                    w.writerow([name, r, c, repr(float(m[r, c]))])
        return buf.getvalue()


def _int_b2(model):
    """int B^2 nu(dt) = 2 pi f^(*2)(0)."""
    return 2 * pi * convolution_value(model, 2, 0.0, conjecture_mode=True)


def mehler_remainder_profile(model, psi, d, coeffs, freqs, n_lags=1 << 18):
    """sum over lags of G_d(B(tau)) cos(delta tau) for each delta in ``freqs``.

    G_d(rho) = Cov(psi(X), psi(Y)) - sum_{k<=d} C_k^2/k! rho^k, where (X, Y) are
    standard normals with correlation rho. Summed over integer lags in discrete time and
    integrated by composite Gauss-Legendre in continuous time.
    """
    k = np.arange(1, d + 1)
    wk = np.asarray(coeffs[1:d + 1], dtype=float) ** 2 * np.exp(-gammaln(k + 1.0))

    def G_d(rho):
        return psi.covariance(rho) - np.polynomial.polynomial.polyval(rho, np.concatenate([[0.0], wk]))

    freqs = np.asarray(freqs, dtype=float)
    if model.discrete:
        tau = np.arange(n_lags, dtype=float)
        g = G_d(covariance(model, tau))
        wts = np.full(tau.size, 2.0)
        wts[0] = 1.0
        return np.array([float(np.sum(wts * g * np.cos(f * tau))) for f in freqs])
    # continuous: even integrand over [0, L]
    L = 4096.0
    edges = np.linspace(0.0, L, int(L / 0.25) + 1)
    x, w = gauss_legendre_rule(edges, 8)
    g = G_d(covariance(model, x))
    return np.array([2.0 * float(np.sum(w * g * np.cos(f * x))) for f in freqs])


def limit_covariance(model, weights, expansion, d=None, tail_tol=0.01, d_cap=60,
                     strict=False, include_remainder=True, conjecture_mode=False):
    """Xi truncated at order d plus an exact Mehler remainder for the orders above d.

    d is chosen as the smallest order whose tail bound is within ``tail_tol`` of the
    running trace, capped at ``d_cap`` and at the expansion's own truncation.
    The tail bound is q * int B^2 * sum_{j>d} C_j^2/j!, using |2 pi f^(*j)| <= int B^2
    for j >= 2. A bound above 10% of the trace is reported as a warning, or
    raised in strict mode.
    """
    m = expansion.rank
    rep = validate_assumptions(model, m, conjecture_mode)
    if not rep.passed:
        raise AssumptionViolation("; ".join(rep.messages))
    mu = limit_measure(weights)
    check_overlap(model, mu)
    q = weights.q
    int_b2 = _int_b2(model) if model.alpha > 0.5 else np.inf
    cap = min(d_cap, expansion.truncation) if d is None else min(d, expansion.truncation)
    terms = []
    Xi = np.zeros((q, q))
    chosen = cap
    for j in range(m, cap + 1):
        cj = expansion.weight(j)
        if cj != 0.0:
            M = np.real(admissibility_integral(model, mu, j, conjecture_mode=True))
            term = 2 * pi * cj * M
            terms.append((j, term))
            Xi = Xi + term
        if d is None:
            t_j = expansion.coefficient_tail(j)
            bound = 0.0 if t_j == 0 else q * int_b2 * t_j
            if bound <= tail_tol * abs(np.trace(Xi)):
                chosen = j
                break
    d_used = chosen
    tail = expansion.coefficient_tail(d_used)
    tail_est = 0.0 if tail == 0 else float(q * int_b2 * tail)
    msgs = []
    if rep.conjecture_regime:
        msgs.append("conjecture regime: no normality guarantee")
    if tail_est > 0.1 * abs(np.trace(Xi)):
        text = (f"truncation at d={d_used} leaves a tail bound {tail_est:.3g}, "
                f"above 10% of trace {np.trace(Xi):.3g}")
        if include_remainder and expansion.psi is not None:
            msgs.append(text + "; orders above d enter through the exact remainder")
        elif strict:
            raise NumericalError(text, achieved=tail_est)
        else:
            msgs.append(text)
            warnings.warn(text)
    remainder = np.zeros((q, q))
    atom_rem = {}
    if include_remainder and tail > 0 and expansion.psi is not None:
        locs = [loc for loc, _ in mu.atoms]
        prof = mehler_remainder_profile(model, expansion.psi, d_used,
                                        expansion.coefficients, locs)
        for (loc, M), p in zip(mu.atoms, prof):
            remainder = remainder + np.real(M) * p
            atom_rem[round(abs(loc), 12)] = p
        Xi = Xi + remainder
    Xi = 0.5 * (Xi + Xi.T)
    blocks = []
    for b, (A, B, phi) in enumerate(weights.trig_blocks):
        scale = 0.0
        for j, _ in terms:
            scale += 2 * pi * expansion.weight(j) * float(_density_at(model, j, phi))
        scale += atom_rem.get(round(abs(_wrap(phi) if model.discrete else phi), 12), 0.0)
        blocks.append({"A": A, "B": B, "phi": phi, "scale": scale,
                       "block": scale * example_block(A, B), "index": 3 * b})
    return LimitCovarianceResult(Xi, terms, d_used, tail_est,
                                 remainder if include_remainder else None, blocks,
                                 rep.conjecture_regime, msgs)


def _density_at(model, j, lam):
    if model.discrete:
        lam = _wrap(lam)
    return spectral_density(model, lam) if j == 1 else convolution_value(model, j, lam, True)


@dataclass
class ConditionCReport:
    orders: list
    min_eigenvalues: list
    positive_definite: list
    tolerance: float

    @property
    def passed(self):
        return all(self.positive_definite)

    def to_dict(self):
        return {"orders": self.orders, "min_eigenvalues": self.min_eigenvalues,
                "positive_definite": self.positive_definite, "tolerance": self.tolerance,
                "passed": self.passed}


def check_condition_C(model, weights, orders, tol=1e-10, conjecture_mode=False):
    """Smallest eigenvalue of int f^(*j) dmu for each order j."""
    mu = limit_measure(weights)
    mins, ok = [], []
    for j in orders:
        M = admissibility_integral(model, mu, j, conjecture_mode)
        ev = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
        mins.append(float(ev[0]))
        ok.append(bool(ev[0] > tol * max(1.0, float(ev[-1]))))
    return ConditionCReport(list(orders), mins, ok, tol)
