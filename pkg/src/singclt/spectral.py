"""Covariance, spectral density and density convolutions for the cosine/power-law family.

The covariance is

    B(t) = sum_j A_j cos(kappa_j t) / (1 + t^2)^(alpha_j / 2)

and the Fourier convention is B(t) = int exp(i lam t) f(lam) dlam, so every
inversion carries a factor 1/(2 pi). The transform of (1 + t^2)^(-g/2) is
c1(g) |x|^nu K_nu(|x|) with nu = (g - 1)/2, which gives the density in closed
form. Discrete time folds the continuous density onto (-pi, pi].
"""

import csv
import io
import json
from dataclasses import dataclass, field
from math import comb, gamma, lgamma, pi, sqrt

import numpy as np

from . import kernels
from .errors import (AssumptionViolation, DomainError, NumericalError,
                     SingularityError)
from .quadrature import integrate_with_singularities

CONTINUOUS = "continuous"
DISCRETE = "discrete"
REAL_LINE = "real_line"
TORUS = "torus"

# beyond this argument |x|^nu K_nu(|x|) is below exp(-80) of its scale
_PRUNE = 80.0
_SING_TOL = 1e-14


@dataclass(frozen=True)
class SpectralComponent:
    """One cosine-modulated power-law term A cos(kappa t) (1+t^2)^(-alpha/2)."""

    A: float
    alpha: float
    kappa: float

    def __post_init__(self):
        if not self.A >= 0:
            raise DomainError(f"amplitude must be nonnegative, got {self.A}")
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.kappa >= 0:
            raise DomainError(f"kappa must be nonnegative, got {self.kappa}")


@dataclass(frozen=True)
class SpectralModel:
    components: tuple
    time_domain: str = DISCRETE
    fold_terms: int = 64

    def __post_init__(self):
        comps = tuple(c if isinstance(c, SpectralComponent) else SpectralComponent(**c)
                      for c in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise DomainError("model needs at least one component")
        if self.time_domain not in (CONTINUOUS, DISCRETE):
            raise DomainError(f"unknown time domain {self.time_domain!r}")
        if int(self.fold_terms) < 1:
            raise DomainError("fold_terms must be a positive integer")
        object.__setattr__(self, "fold_terms", int(self.fold_terms))
        total = sum(c.A for c in comps)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"amplitudes must sum to 1, got {total!r}")
        kap = [c.kappa for c in comps]
        if any(b <= a for a, b in zip(kap[:-1], kap[1:])):
            raise DomainError("frequencies kappa_j must be strictly increasing")
        if self.time_domain == DISCRETE and kap[-1] > pi:
            raise DomainError("discrete-time frequencies must lie in [0, pi]")

    @property
    def alpha(self):
        return min(c.alpha for c in self.components)

    @property
    def discrete(self):
        return self.time_domain == DISCRETE

    @property
    def domain(self):
        return TORUS if self.discrete else REAL_LINE

    def singularities(self):
        """Sorted distinct singular frequencies (both signs) inside the domain."""
        pts = set()
        for c in self.components:
            pts.add(c.kappa)
            pts.add(-c.kappa)
        if self.discrete:
            pts = {_wrap(p) for p in pts}
        return sorted(pts)

    def to_dict(self):
        return {
            "time_domain": self.time_domain,
            "components": [{"A": c.A, "alpha": c.alpha, "kappa": c.kappa}
                           for c in self.components],
            "fold_terms": self.fold_terms,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            components=tuple(SpectralComponent(float(c["A"]), float(c["alpha"]),
                                               float(c["kappa"]))
                             for c in d["components"]),
            time_domain=d.get("time_domain", DISCRETE),
            fold_terms=int(d.get("fold_terms", 64)),
        )

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def single_component(alpha, kappa, time_domain=DISCRETE, fold_terms=64):
    return SpectralModel((SpectralComponent(1.0, alpha, kappa),), time_domain, fold_terms)


@dataclass
class DensityGrid:
    """A sampled density on Lambda; ``domain`` is "real_line" or "torus"."""

    frequencies: np.ndarray
    values: np.ndarray
    domain: str = TORUS

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.frequencies.shape != self.values.shape:
            raise DomainError("frequencies and values differ in length")
        if np.any(np.diff(self.frequencies) <= 0):
            raise DomainError("frequencies must be strictly increasing")

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "value"])
        for x, v in zip(self.frequencies, self.values):
            w.writerow([repr(float(x)), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, domain=TORUS):
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(np.array([float(r["lambda"]) for r in rows]),
                   np.array([float(r["value"]) for r in rows]), domain)


def _wrap(x):
    """Map to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + pi, 2 * pi) - pi
    y = np.where(y == -pi, pi, y)
    return float(y) if np.ndim(y) == 0 else y


def c1(g):
    """Constant of the transform of (1+t^2)^(-g/2): c1(g) |x|^nu K_nu(|x|)."""
    return 2.0 ** ((1.0 - g) / 2.0) / (sqrt(pi) * gamma(g / 2.0))


def c2(alpha):
    """Leading constant of the power law: f ~ c2/2 |x|^(alpha-1) per branch."""
    return 1.0 / (2.0 * gamma(alpha) * np.cos(alpha * pi / 2.0))


def bessel_k(nu, z):
    """Modified Bessel function K_nu(z) from its integral representation.

    Uses int_0^inf cosh(nu u) exp(-z cosh u) du, which is the s = e^u form of
    (1/2) int_0^inf s^(nu-1) exp(-(s + 1/s) z / 2) ds.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(~(z_arr > 0)):
        raise DomainError("bessel_k needs z > 0")
    vals, change = kernels.bessel_k_scaled(float(nu), np.ascontiguousarray(z_arr), 0.0)
    if change > 1e-10:
        raise NumericalError("Bessel quadrature did not converge", achieved=change)
    return float(vals[0]) if np.ndim(z) == 0 else vals


def _g(nu, x):
    """|x|^nu K_nu(|x|), finite at 0 only for nu > 0; zero past the pruning radius."""
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(ax)
    zero = ax == 0
    live = (~zero) & (ax < _PRUNE)
    if live.any():
        v, change = kernels.bessel_k_scaled(float(nu), np.ascontiguousarray(ax[live]), float(nu))
        if change > 1e-10:
            raise NumericalError("Bessel quadrature did not converge", achieved=change)
        out[live] = v
    if zero.any():
        out[zero] = gamma(nu) * 2.0 ** (nu - 1.0) if nu > 0 else np.inf
    return out


def _terms_value(terms, lam, discrete, K, period=2 * pi):
    """sum over terms (coef, gam, omega) of coef c1(gam)/2 [g(lam-omega) + g(lam+omega)], folded."""
    lam = np.asarray(lam, dtype=float)
    flat = lam.ravel()
    out = np.zeros_like(flat)
    shifts = period * np.arange(-K, K + 1) if discrete else np.zeros(1)
    for coef, gam, omega in terms:
        nu = (gam - 1.0) / 2.0
        scale = coef * c1(gam) / 2.0
        for sgn in (-1.0, 1.0):
            x = flat[:, None] + (shifts + sgn * omega)[None, :]
            keep = np.abs(x) < _PRUNE
            if not keep.any():
                continue
            vals = np.zeros_like(x)
            vals[keep] = _g(nu, x[keep])
            out += scale * vals.sum(axis=1)
    return out.reshape(lam.shape)


def _model_terms(model):
    return [(c.A, c.alpha, c.kappa) for c in model.components]


def _check_singular(model, terms, lam):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    for coef, gam, omega in terms:
        if gam > 1.0 or coef == 0:
            continue
        for sgn in (-1.0, 1.0):
            d = lam + sgn * omega
            if model.discrete:
                d = _wrap(d)
            if np.any(np.abs(d) <= _SING_TOL * max(1.0, abs(omega))):
                idx = _component_of(model, omega)
                raise SingularityError(
                    f"density is singular at lambda = {-sgn * omega:g}"
                    + (f" (component {idx})" if idx is not None else ""),
                    component=idx, frequency=-sgn * omega)


def _component_of(model, omega):
    for j, c in enumerate(model.components):
        if abs(c.kappa - abs(omega)) <= 1e-14:
            return j
    return None


def covariance(model, t):
    """B(t) = sum_j A_j cos(kappa_j t) / (1 + t^2)^(alpha_j/2)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for c in model.components:
        out = out + c.A * np.cos(c.kappa * t) * (1.0 + t * t) ** (-c.alpha / 2.0)
    return float(out) if out.ndim == 0 else out


def _check_lambda(model, lam):
    if model.discrete and np.any((lam <= -pi - 1e-12) | (lam > pi + 1e-12)):
        raise DomainError("discrete-time frequencies must lie in (-pi, pi]")


def spectral_density(model, lam):
    """f(lam): Bessel-K closed form, folded over 2 pi shifts in discrete time."""
    arr = np.asarray(lam, dtype=float)
    _check_lambda(model, arr)
    terms = _model_terms(model)
    _check_singular(model, terms, arr)
    out = _terms_value(terms, arr, model.discrete, model.fold_terms)
    return float(out) if out.ndim == 0 else out


def _asymptote_terms(coef, gam):
    """Power expansion (coef_i, power_i) of one branch coef c1(g)/2 g(x) for g < 1."""
    mu = (1.0 - gam) / 2.0
    lead = coef * c1(gam) / 2.0 * gamma(mu) * 2.0 ** (mu - 1.0)
    G = gamma((1.0 + gam) / 2.0) / gamma((3.0 - gam) / 2.0)
    return [(lead, gam - 1.0),
            (-lead * G * 2.0 ** (gam - 1.0), 0.0),
            (lead * 2.0 / (1.0 + gam) / 4.0, gam + 1.0)]


def singular_expansions(model, terms=None):
    """Map singular location -> power expansion valid on both sides of it."""
    terms = _model_terms(model) if terms is None else terms
    out = {}
    for coef, gam, omega in terms:
        if gam >= 1.0 or coef == 0:
            continue
        for sgn in (-1.0, 1.0):
            loc = sgn * omega
            if model.discrete:
                loc = _wrap(loc)
            key = next((k for k in out if abs(k - loc) < 1e-12), loc)
            out.setdefault(key, []).extend(_asymptote_terms(coef, gam))
            if model.discrete and abs(abs(key) - pi) < 1e-12:
                # the same singularity appears at the other end of the torus
                other = -key
                out.setdefault(other, []).extend(_asymptote_terms(coef, gam))
    return out


def singularity_constant(model, j):
    """a_j = lim f(lam) |lam - kappa_j|^(1 - alpha_j)."""
    c = model.components[j]
    both = c.kappa == 0 or (model.discrete and abs(c.kappa - pi) < 1e-12)
    return c.A * c2(c.alpha) / 2.0 * (2.0 if both else 1.0)


def density_asymptote(model, j, lam, radius=None):
    """Three-term power-law approximation of f near the singularity +-kappa_j.

    Returns A_j c2/2 |x|^(alpha-1) (1 - h(|x|)) with
    1 - h(x) = 1 - Gamma((1+a)/2)/Gamma((3-a)/2) (x/2)^(1-a) + 2/(1+a) (x/2)^2,
    doubled when both branches meet (kappa_j = 0, or kappa_j = pi in discrete time).
    """
    c = model.components[j]
    lam = np.asarray(lam, dtype=float)
    x = np.minimum(np.abs(lam - c.kappa), np.abs(lam + c.kappa))
    if model.discrete:
        x = np.minimum(x, np.abs(_wrap(lam - c.kappa)))
        x = np.minimum(x, np.abs(_wrap(lam + c.kappa)))
    if radius is None:
        pts = model.singularities()
        gaps = np.diff(pts) if len(pts) > 1 else np.array([2.0])
        radius = min(1.0, 0.5 * float(np.min(gaps)))
    if np.any(x > radius):
        raise DomainError(f"lambda is farther than {radius:g} from +-kappa_{j}")
    if np.any(x == 0):
        raise SingularityError("asymptote evaluated at the singular point",
                               component=j, frequency=c.kappa)
    both = c.kappa == 0 or (model.discrete and abs(c.kappa - pi) < 1e-12)
    out = np.zeros_like(x)
    for coef, power in _asymptote_terms(c.A, c.alpha):
        out += coef * x ** power
    out = out * (2.0 if both else 1.0)
    return float(out) if out.ndim == 0 else out


def power_terms(model, j):
    """B(t)^j as a list of (coef, gamma, omega): coef cos(omega t) (1+t^2)^(-gamma/2).

    Coefficients are positive; equal (gamma, omega) pairs are merged.
    """
    if j < 1:
        raise DomainError("order must be at least 1")
    comps = model.components
    acc = {}
    exact = {}
    for n in _compositions(j, len(comps)):
        log_mult = lgamma(j + 1) - sum(lgamma(k + 1) for k in n)
        amp = 1.0
        for k, c in zip(n, comps):
            amp *= c.A ** k
        if amp == 0.0:
            continue
        gam = sum(k * c.alpha for k, c in zip(n, comps))
        # cos^k(kappa t) = 2^(1-k) sum over the signed binomial frequencies;
        # rounded keys merge equal frequencies, the unrounded value is kept
        freqs = {0.0: (np.exp(log_mult) * amp, 0.0)}
        for k, c in zip(n, comps):
            if k == 0:
                continue
            new = {}
            for m in range(k + 1):
                w = comb(k, m) / 2.0 ** k
                shift = (k - 2 * m) * c.kappa
                for v, f0 in freqs.values():
                    f1 = f0 + shift
                    key = round(f1, 12)
                    old = new.get(key, (0.0, f1))
                    new[key] = (old[0] + v * w, old[1])
            freqs = new
        for v, f0 in freqs.values():
            key = (round(gam, 12), round(abs(f0), 12))
            # exp(i f0 t) and exp(-i f0 t) combine into cos(|f0| t)
            acc[key] = acc.get(key, 0.0) + v
            exact.setdefault(key, (gam, abs(f0)))
    return [(v,) + exact[key] for key, v in sorted(acc.items()) if v > 0]


def _compositions(j, parts):
    if parts == 1:
        yield (j,)
        return
    for first in range(j + 1):
        for rest in _compositions(j - first, parts - 1):
            yield (first,) + rest


def _require_convolution_ok(model, j, conjecture_mode):
    if j >= 2 and model.alpha * j <= 1 and not conjecture_mode:
        raise AssumptionViolation(
            f"alpha*j = {model.alpha * j:g} <= 1: f^(*{j}) is not bounded; "
            "enable conjecture_mode to proceed anyway")


def convolution_value(model, j, lam, conjecture_mode=False):
    """f^(*j)(lam) from the closed-form transform of B^j."""
    _require_convolution_ok(model, j, conjecture_mode)
    arr = np.asarray(lam, dtype=float)
    _check_lambda(model, arr)
    terms = power_terms(model, j)
    _check_singular(model, terms, arr)
    out = _terms_value(terms, arr, model.discrete, model.fold_terms)
    return float(out) if out.ndim == 0 else out


def periodized_value(model, j, lam, period, conjecture_mode=False):
    """sum_k f^(*j)(lam + k period) for a continuous-time model.

    This is the density seen by a process sampled with step 2 pi / period.
    Discrete-time models already live on the torus and are returned as is.
    """
    if model.discrete:
        if j == 1:
            return spectral_density(model, lam)
        return convolution_value(model, j, lam, conjecture_mode)
    if j > 1:
        _require_convolution_ok(model, j, conjecture_mode)
    terms = _model_terms(model) if j == 1 else power_terms(model, j)
    arr = np.asarray(lam, dtype=float)
    reach = _PRUNE + max(om for _, _, om in terms) + abs(float(np.max(np.abs(arr))))
    K = int(np.ceil(reach / period)) + 1
    return _terms_value(terms, arr, True, K, period)


def convolution_density(model, j, grid, conjecture_mode=False):
    """f^(*j) sampled on ``grid`` as a DensityGrid."""
    grid = np.asarray(grid, dtype=float)
    return DensityGrid(grid, convolution_value(model, j, grid, conjecture_mode), model.domain)


def integrate_density(model, j=1, lo=None, hi=None, delta=None, conjecture_mode=False):
    """int f^(*j) over [lo, hi] (default: all of Lambda), splitting at singularities."""
    if j > 1:
        _require_convolution_ok(model, j, conjecture_mode)
    terms = _model_terms(model) if j == 1 else power_terms(model, j)
    sing = singular_expansions(model, terms)
    if lo is None:
        lo = -pi if model.discrete else -(_PRUNE + max(om for _, _, om in terms))
    if hi is None:
        hi = pi if model.discrete else _PRUNE + max(om for _, _, om in terms)
    if delta is None:
        pts = sorted(sing)
        gaps = np.diff(pts) if len(pts) > 1 else np.array([1.0])
        delta = 1e-2 * float(min(np.min(gaps), 1.0))
        delta = max(delta, 1e-6)

    def f(x):
        return _terms_value(terms, np.asarray(x, dtype=float), model.discrete,
                            model.fold_terms)

    val, _ = integrate_with_singularities(f, lo, hi, sing, delta)
    return val


def lag_sum(model, j=1, n_direct=1 << 16):
    """Sum of B(t)^j over all integer lags, which equals 2 pi f^(*j)(0).

    Lags up to ``n_direct`` are summed directly. B^j is split into terms
    c cos(omega t) (1+t^2)^(-g/2); the tail of a non-oscillating term uses
    Euler-Maclaurin against the exact integral, an oscillating one two steps
    of summation by parts.
    """
    N = int(n_direct)
    t = np.arange(1, N + 1, dtype=float)
    total = 1.0 + 2.0 * float(np.sum(covariance(model, t) ** j))
    for coef, gam, omega in power_terms(model, j):
        total += 2.0 * coef * _power_tail(gam, omega, N)
    return total


def _power_tail(gam, omega, N):
    """sum_{t > N} cos(omega t) (1 + t^2)^(-gam/2)."""
    def h(x):
        return (1.0 + x * x) ** (-gam / 2.0)

    w = np.mod(omega, 2 * pi)
    if min(w, 2 * pi - w) < 1e-12:
        # Euler-Maclaurin: sum_{t>N} h(t) = int_N^inf h - h(N)/2 - h'(N)/12 + ...
        # int_N^inf (1+t^2)^(-g/2) dt as a binomial series in 1/N^2
        integral, k, coef = 0.0, 0, 1.0
        while True:
            term = coef * N ** (1.0 - gam - 2 * k) / (gam + 2 * k - 1.0)
            integral += term
            if abs(term) < 1e-17 * abs(integral):
                break
            coef *= (-gam / 2.0 - k) / (k + 1)
            k += 1
        dh = -gam * N * (1.0 + N * N) ** (-gam / 2.0 - 1.0)
        return integral - 0.5 * h(N) - dh / 12.0
    z = np.exp(1j * omega)
    first = z ** (N + 1) / (1.0 - z) * h(N + 1.0)
    second = z ** (N + 2) / (1.0 - z) ** 2 * (h(N + 2.0) - h(N + 1.0))
    return float(np.real(first + second))


@dataclass
class ValidationReport:
    passed: bool
    alpha: float
    rank: int
    via: str
    conjecture_regime: bool = False
    messages: list = field(default_factory=list)

    def to_dict(self):
        return {"passed": self.passed, "alpha": self.alpha, "rank": self.rank,
                "via": self.via, "conjecture_regime": self.conjecture_regime,
                "messages": list(self.messages)}


def validate_assumptions(model, rank, conjecture_mode=False):
    """Check (i) rank 1 with alpha > 1/2 or (ii) alpha * rank > 1."""
    a = model.alpha
    if rank < 1:
        return ValidationReport(False, a, rank, "none", messages=["rank must be >= 1"])
    if rank == 1 and a > 0.5:
        return ValidationReport(True, a, rank, "(i)", messages=["rank 1 with alpha > 1/2"])
    if rank >= 2 and a * rank > 1:
        return ValidationReport(True, a, rank, "(ii)",
                                messages=[f"alpha*m = {a * rank:g} > 1"])
    if conjecture_mode:
        return ValidationReport(True, a, rank, "conjecture", conjecture_regime=True,
                                messages=["conjecture regime: no normality guarantee"])
    return ValidationReport(False, a, rank, "none",
                            messages=[f"alpha = {a:g}, m = {rank} violates both (i) and (ii)"])
