"""Hermite polynomials, Hermite coefficients of transformations, and truncation tails.

Polynomials are the probabilists' ones, H_k = (-1)^k e^{x^2/2} d^k/dx^k e^{-x^2/2},
so E[H_j(X) H_k(X)] = k! delta_jk for standard normal X and

    psi(x) = sum_k C_k / k! H_k(x),    C_k = E[psi(X) H_k(X)].
"""

import json
from dataclasses import dataclass, field
from math import factorial, fsum, lgamma, pi, sqrt

import numpy as np
from scipy.special import gammaln, roots_hermitenorm

from .errors import (AssumptionViolation, DomainError, IntegrabilityError,
                     InconsistentMomentError, ZeroFunctionError)

_SQRT2PI = sqrt(2.0 * pi)


def hermite_poly(k, x):
    """H_k(x) by the recurrence H_{k+1} = x H_k - k H_{k-1}."""
    if k < 0:
        raise DomainError("Hermite degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    h_prev, h = np.ones_like(x), x.copy()
    if k == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    for n in range(1, k):
        h_prev, h = h, x * h - n * h_prev
    return h if h.ndim else float(h)


def normalized_hermite_table(d, x):
    """Rows h_k(x) = H_k(x)/sqrt(k!) for k = 0..d; stable for large k."""
    x = np.asarray(x, dtype=float)
    out = np.empty((d + 1,) + x.shape)
    out[0] = 1.0
    if d >= 1:
        out[1] = x
    for k in range(1, d):
        out[k + 1] = (x * out[k] - sqrt(k) * out[k - 1]) / sqrt(k + 1)
    return out


@dataclass(frozen=True)
class Psi:
    """A pointwise transformation with optional quadrature breakpoints.

    ``mehler`` is rho -> Cov(psi(X), psi(Y)) for standard normals with
    correlation rho, when a closed form is known.
    """

    name: str
    func: object
    breakpoints: tuple = ()
    mehler: object = None
    spec: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def covariance(self, rho, nodes=64):
        """Cov(psi(X), psi(Y)) at correlation rho (array), closed form if available."""
        rho = np.asarray(rho, dtype=float)
        if self.mehler is not None:
            return self.mehler(rho)
        if self.breakpoints:
            return _series_covariance(self, rho)
        # two-dimensional Gauss-Hermite: Y = rho X + sqrt(1 - rho^2) V
        u, w = _gauss_hermite(nodes)
        fu = self(u)
        mean = float(w @ fu)
        r = rho.ravel()
        y = r[:, None, None] * u[None, :, None] + np.sqrt(np.clip(1 - r * r, 0, None))[:, None, None] * u[None, None, :]
        vals = np.einsum("i,j,rij->r", w * fu, w, self(y)) - mean * mean
        return vals.reshape(rho.shape)


def psi_hermite(k):
    return Psi(f"H{k}", lambda x, k=k: hermite_poly(k, x),
               mehler=lambda r, k=k: factorial(k) * r ** k,
               spec={"kind": "hermite", "k": k})


def psi_polynomial(coeffs):
    """psi(x) = sum_i coeffs[i] x^i (power basis)."""
    coeffs = tuple(float(c) for c in coeffs)
    herm = np.polynomial.hermite_e.poly2herme(coeffs)
    c_k = [herm[k] * factorial(k) for k in range(len(herm))]

    def mehler(r):
        return sum(c * c / factorial(k) * r ** k for k, c in enumerate(c_k) if k >= 1)

    return Psi("polynomial", lambda x: np.polynomial.polynomial.polyval(x, coeffs),
               mehler=mehler, spec={"kind": "polynomial", "coeffs": list(coeffs)})


def psi_sign():
    return Psi("sign", np.sign, breakpoints=(0.0,),
               mehler=lambda r: 2.0 / pi * np.arcsin(np.clip(r, -1, 1)),
               spec={"kind": "sign"})


def psi_abs_centered():
    def mehler(r):
        r = np.clip(r, -1, 1)
        return 2.0 / pi * (np.sqrt(1 - r * r) + r * np.arcsin(r)) - 2.0 / pi

    return Psi("abs_centered", lambda x: np.abs(x) - sqrt(2.0 / pi), breakpoints=(0.0,),
               mehler=mehler, spec={"kind": "abs_centered"})


def psi_exp_centered():
    return Psi("exp_centered", lambda x: np.exp(x) - np.exp(0.5),
               mehler=lambda r: np.e * np.expm1(r), spec={"kind": "exp_centered"})


def psi_tabulated(x, y):
    """Piecewise-linear interpolation of a table, constant beyond its ends."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or np.any(np.diff(x) <= 0):
        raise DomainError("tabulated psi needs increasing x and matching y")
    return Psi("tabulated", lambda t: np.interp(t, x, y), breakpoints=tuple(x),
               spec={"kind": "tabulated", "x": x.tolist(), "y": y.tolist()})


def psi_from_spec(spec):
    """Build a Psi from a JSON-style dict such as {"kind": "hermite", "k": 2}."""
    if isinstance(spec, Psi):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind == "hermite":
        return psi_hermite(int(spec["k"]))
    if kind == "polynomial":
        return psi_polynomial(spec["coeffs"])
    if kind == "sign":
        return psi_sign()
    if kind == "abs_centered":
        return psi_abs_centered()
    if kind == "exp_centered":
        return psi_exp_centered()
    if kind == "tabulated":
        return psi_tabulated(spec["x"], spec["y"])
    raise DomainError(f"unknown psi kind {kind!r}")


@dataclass
class HermiteExpansion:
    coefficients: np.ndarray
    rank: int
    truncation: int
    second_moment: float
    psi: Psi = None
    centered_by: float = 0.0
    quadrature_change: float = 0.0

    def partial_sum(self, d=None):
        """sum_{k=1..d} C_k^2 / k!."""
        d = self.truncation if d is None else min(d, self.truncation)
        c = self.coefficients[1:d + 1]
        k = np.arange(1, d + 1)
        return fsum(c * c * np.exp(-_lgamma_vec(k + 1)))

    def coefficient_tail(self, d=None, tol=1e-8):
        """sum_{k>d} C_k^2/k! estimated as second_moment - partial_sum(d)."""
        tail = self.second_moment - self.partial_sum(d)
        if abs(tail) <= 1e-12 * max(1.0, self.second_moment):
            return 0.0
        if tail < -tol * max(1.0, self.second_moment):
            raise InconsistentMomentError(
                f"Parseval tail is negative ({tail:.3g}); quadrature is inaccurate",
                achieved=tail)
        return max(tail, 0.0)

    def weight(self, j):
        """C_j^2 / j!."""
        if j > self.truncation:
            return 0.0
        c = self.coefficients[j]
        return float(c * c * np.exp(-lgamma(j + 1)))

    def to_dict(self):
        return {"coeffs": [float(c) for c in self.coefficients], "rank": self.rank,
                "second_moment": self.second_moment, "truncation": self.truncation,
                "psi": self.psi.spec if self.psi is not None else None}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        coeffs = np.asarray(d["coeffs"], dtype=float)
        psi = psi_from_spec(d["psi"]) if d.get("psi") else None
        return cls(coeffs, int(d["rank"]), int(d.get("truncation", len(coeffs) - 1)),
                   float(d["second_moment"]), psi)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _lgamma_vec(n):
    return gammaln(np.asarray(n, dtype=float))


def _gauss_hermite(nodes):
    """Nodes and probability weights for E[g(X)], X standard normal."""
    x, w = roots_hermitenorm(nodes)
    return x, w / _SQRT2PI


def _gh_moments(psi, d, nodes):
    x, w = _gauss_hermite(nodes)
    return _moments(psi, d, x, w)


def _series_covariance(psi, rho, order=300):
    """sum_{k>=1} C_k^2/k! rho^k from many coefficients; for psi with kinks or jumps."""
    proj, m2 = _gl_moments(psi, order, 48, normalized=True)
    wk = proj * proj
    wk[0] = 0.0
    out = np.asarray(np.polynomial.polynomial.polyval(rho, wk), dtype=float)
    # the series converges slowly at |rho| = 1; use the exact moments there
    var = m2 - proj[0] ** 2
    anti = 0.0
    if np.any(np.abs(rho) >= 1.0 - 1e-12):
        flip = Psi(psi.name, lambda x: psi(x) * psi(-x), psi.breakpoints)
        anti = _gl_moments(flip, 0, 48, normalized=True)[0][0] - proj[0] ** 2
    out = np.where(rho >= 1.0 - 1e-12, var, out)
    out = np.where(rho <= -1.0 + 1e-12, anti, out)
    return out


def _gl_moments(psi, d, nodes_per_panel=64, normalized=False):
    """Composite Gauss-Legendre against phi on [-L, L], split at psi's breakpoints."""
    L = 2.0 * sqrt(d + 1.0) + 12.0
    inner = [b for b in psi.breakpoints if -L < b < L]
    width = 0.5
    edges = np.unique(np.concatenate([np.linspace(-L, L, int(2 * L / width) + 1), inner]))
    g, gw = np.polynomial.legendre.leggauss(nodes_per_panel)
    lo, hi = edges[:-1, None], edges[1:, None]
    x = (0.5 * (lo + hi) + 0.5 * (hi - lo) * g[None, :]).ravel()
    w = (0.5 * (hi - lo) * gw[None, :]).ravel() * np.exp(-0.5 * x * x) / _SQRT2PI
    return _moments(psi, d, x, w, normalized)


def _moments(psi, d, x, w, normalized=False):
    fx = psi(x)
    if not np.all(np.isfinite(fx)):
        raise IntegrabilityError(f"psi {psi.name} is not finite on the quadrature nodes")
    h = normalized_hermite_table(d, x)
    # C_k = sqrt(k!) E[psi h_k]; overflow here means psi is not square integrable
    with np.errstate(over="ignore", invalid="ignore"):
        proj = h @ (w * fx)
        m2 = float(w @ (fx * fx))
    if normalized:
        return proj, m2
    scale = np.exp(0.5 * _lgamma_vec(np.arange(d + 1) + 1.0))
    return proj * scale, m2


def hermite_coefficients(psi, d, center=False, tol_rank=1e-9, nodes=200):
    """C_0..C_d of psi with rank detection; see the module docstring for the convention.

    Smooth psi uses Gauss-Hermite with ``nodes`` points, checked against twice as
    many. Psi with breakpoints uses composite Gauss-Legendre split at them,
    checked against a finer panel order. ``center`` subtracts C_0 instead of
    rejecting a psi with nonzero mean.
    """
    psi = psi_from_spec(psi)
    if d < 1:
        raise DomainError("truncation order must be at least 1")
    if psi.breakpoints:
        c, m2 = _gl_moments(psi, d, 48)
        c_chk, m2_chk = _gl_moments(psi, d, 96)
    else:
        c, m2 = _gh_moments(psi, d, nodes)
        c_chk, m2_chk = _gh_moments(psi, d, 2 * nodes)
    if not (np.isfinite(m2) and np.isfinite(m2_chk)) or abs(m2 - m2_chk) > 1e-6 * max(1.0, abs(m2_chk)):
        raise IntegrabilityError(
            f"E psi^2 is not stable under refinement ({m2:.6g} vs {m2_chk:.6g}); "
            "psi does not look square integrable")
    scale = np.sqrt(np.exp(_lgamma_vec(np.arange(d + 1) + 1.0)) * max(m2_chk, 1e-300))
    change = float(np.max(np.abs(c - c_chk) / scale))
    c, m2 = c_chk, m2_chk
    shift = 0.0
    if abs(c[0]) > 1e-8 * sqrt(max(m2, 1e-300)):
        if not center:
            raise AssumptionViolation(
                f"C_0 = E psi(X) = {c[0]:.6g} != 0; pass center=True to subtract it")
        shift = float(c[0])
        m2 = m2 - shift * shift
    c = c.copy()
    c[0] = 0.0
    if m2 <= 1e-14:
        raise ZeroFunctionError(f"psi {psi.name} vanishes almost surely")
    # zero out coefficients below the rank tolerance so the rank is exact
    k = np.arange(d + 1)
    thresh = tol_rank * np.sqrt(np.exp(_lgamma_vec(k + 1)) * m2)
    c[np.abs(c) <= thresh] = 0.0
    nz = np.flatnonzero(c[1:]) + 1
    if nz.size == 0:
        raise ZeroFunctionError(
            f"all Hermite coefficients up to order {d} vanish; increase d")
    return HermiteExpansion(c, int(nz[0]), int(d), float(m2), psi, shift, change)


def truncation_tail_bound(expansion, weights, model, z, d=None, T=4096):
    """beta(d) = |z|^2 |k|^2 int B^2 sum_{j>d} C_j^2/j!.

    ``k`` are the (B3) constants sup|w_i| sqrt(T) / W_iT measured at horizon T.
    """
    from .spectral import convolution_value
    from .weights import b3_constants

    z = np.asarray(z, dtype=float)
    k = b3_constants(weights, T)
    tail = expansion.coefficient_tail(d)
    if tail == 0.0:
        return 0.0
    int_b2 = 2.0 * pi * convolution_value(model, 2, 0.0)
    return float(z @ z) * float(k @ k) * int_b2 * tail


def sign_coefficient(k):
    """Closed form C_k(sign): 2 phi(0) (-1)^n (2n-1)!! for k = 2n+1, zero for even k."""
    if k % 2 == 0:
        return 0.0
    n = (k - 1) // 2
    dfact = 1.0
    for i in range(1, 2 * n, 2):
        dfact *= i
    return 2.0 / _SQRT2PI * (-1) ** n * dfact
