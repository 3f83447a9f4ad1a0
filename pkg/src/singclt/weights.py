"""Weight functions, their finite Fourier transforms and spectral measures.

Time nodes are t = 1..T in discrete time. In continuous time the integral
over [0, T] is replaced by the midpoint rule with step ``step``, nodes
(i + 1/2) step. With either choice the measure lives on one period of length
2 pi / step, and Parseval holds exactly: int |w_T|^2 dlam = 2 pi W_T^2.

Every built-in family is a finite sum of exponential monomials c t^n e^{i omega t}.
Its limit measure has atoms at lam = -omega. The entry (k, l) is
sum c_a conj(c_b) / (n_k + n_l + 1) / sqrt(S_k S_l), taken over the top-degree
terms sharing omega, with S_k = sum |c_a|^2 / (2 n_k + 1).
"""

import csv
import io
import json
from dataclasses import dataclass, field
from math import atan2, pi, sqrt

import numpy as np

from .errors import (CoverageError, DegenerateWeightError, DomainError,
                     OverlapError, UnsupportedLimitError)
from .spectral import CONTINUOUS, DISCRETE, _wrap, covariance

KINDS = ("constant", "cosine", "sine", "power_cosine", "tabulated")


@dataclass(frozen=True)
class WeightComponent:
    """One weight w(t): constant, cos(delta t + phase), sin(delta t),
    t^beta cos(delta t + phase), or a piecewise-linear table."""

    kind: str
    delta: float = 0.0
    phase: float = 0.0
    beta: float = 0.0
    value: float = 1.0
    table: tuple = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown weight kind {self.kind!r}")
        if self.beta < 0:
            raise DomainError("power exponent beta must be nonnegative")
        if self.kind == "tabulated":
            if self.table is None or len(self.table) != 2:
                raise DomainError("tabulated weight needs (t, y) arrays")
            t, y = (tuple(float(v) for v in a) for a in self.table)
            if len(t) != len(y) or len(t) < 2 or any(b <= a for a, b in zip(t, t[1:])):
                raise DomainError("tabulated weight needs increasing t and matching y")
            object.__setattr__(self, "table", (t, y))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = self.kind
        if k == "constant":
            return np.full_like(t, self.value)
        if k == "cosine":
            return np.cos(self.delta * t + self.phase)
        if k == "sine":
            return np.sin(self.delta * t)
        if k == "power_cosine":
            return t ** self.beta * np.cos(self.delta * t + self.phase)
        return np.interp(t, self.table[0], self.table[1])

    def exp_terms(self):
        """List of (c, n, omega) with w(t) = sum c t^n exp(i omega t)."""
        k = self.kind
        if k == "constant":
            return [(complex(self.value), 0.0, 0.0)]
        if k == "tabulated":
            raise UnsupportedLimitError(
                "tabulated weights have no closed-form limit measure; check (B1) "
                "empirically with matrix_measure at growing T")
        if k == "sine":
            delta, phase, beta = self.delta, -pi / 2, 0.0
        else:
            delta, phase, beta = self.delta, self.phase, (self.beta if k == "power_cosine" else 0.0)
        half = 0.5 * np.exp(1j * phase)
        return [(half, beta, delta), (np.conj(half), beta, -delta)]

    def to_dict(self):
        k = self.kind
        if k == "constant":
            return {"kind": k, "value": self.value}
        if k == "cosine":
            return {"kind": k, "delta": self.delta, "phase": self.phase}
        if k == "sine":
            return {"kind": k, "delta": self.delta}
        if k == "power_cosine":
            return {"kind": k, "beta": self.beta, "delta": self.delta, "phase": self.phase}
        return {"kind": k, "t": list(self.table[0]), "y": list(self.table[1])}

    @classmethod
    def from_dict(cls, d):
        k = d["kind"]
        if k == "tabulated":
            return cls(k, table=(d["t"], d["y"]))
        return cls(k, delta=float(d.get("delta", 0.0)), phase=float(d.get("phase", 0.0)),
                   beta=float(d.get("beta", 0.0)), value=float(d.get("value", 1.0)))


def constant():
    return WeightComponent("constant")


def cosine(delta, phase=0.0):
    return WeightComponent("cosine", delta=delta, phase=phase)


def sine(delta):
    return WeightComponent("sine", delta=delta)


def power_cosine(beta, delta, phase=0.0):
    return WeightComponent("power_cosine", delta=delta, phase=phase, beta=beta)


def tabulated(t, y):
    return WeightComponent("tabulated", table=(tuple(t), tuple(y)))


def trig_gradient_components(A, B, phi):
    """Gradient of A cos(phi t) + B sin(phi t) in (A, B, phi).

    The phi-derivative t (B cos(phi t) - A sin(phi t)) equals C t cos(phi t + psi)
    with C = sqrt(A^2 + B^2), cos psi = B/C, sin psi = A/C; the factor C is
    dropped since every weight is normalized by its own W_T.
    """
    if A == 0 and B == 0:
        raise DegenerateWeightError("trig regression block needs A^2 + B^2 > 0")
    return [cosine(phi), sine(phi), power_cosine(1.0, phi, atan2(A, B))]


@dataclass(frozen=True)
class WeightSpec:
    components: tuple
    time_domain: str = DISCRETE
    step: float = 1.0
    trig_blocks: tuple = ()

    def __post_init__(self):
        comps = tuple(c if isinstance(c, WeightComponent) else WeightComponent.from_dict(c)
                      for c in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise DomainError("need at least one weight component")
        if self.time_domain not in (CONTINUOUS, DISCRETE):
            raise DomainError(f"unknown time domain {self.time_domain!r}")
        if self.time_domain == DISCRETE and self.step != 1.0:
            raise DomainError("discrete time requires step 1")
        if not self.step > 0:
            raise DomainError("step must be positive")

    @property
    def q(self):
        return len(self.components)

    def nodes(self, T):
        """Time nodes and their quadrature weights on (0, T]."""
        if self.time_domain == DISCRETE:
            if T < 1 or int(T) != T:
                raise DomainError("discrete horizon must be a positive integer")
            return np.arange(1, int(T) + 1, dtype=float), 1.0
        n = int(round(T / self.step))
        if n < 1 or abs(n * self.step - T) > 1e-9 * max(1.0, T):
            raise DomainError("continuous horizon must be a multiple of the step")
        return (np.arange(n) + 0.5) * self.step, self.step

    def values(self, t):
        return np.array([c(t) for c in self.components])

    def to_dict(self):
        d = {"time_domain": self.time_domain, "step": self.step}
        if self.trig_blocks:
            d["trig_regression"] = [list(b) for b in self.trig_blocks]
        else:
            d["components"] = [c.to_dict() for c in self.components]
        return d

    @classmethod
    def from_dict(cls, d):
        td = d.get("time_domain", DISCRETE)
        step = float(d.get("step", 1.0 if td == DISCRETE else 0.125))
        if "trig_regression" in d:
            return trig_regression_gradient(d["trig_regression"], td, step)
        return cls(tuple(WeightComponent.from_dict(c) for c in d["components"]), td, step)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def trig_regression_gradient(theta, time_domain=DISCRETE, step=1.0):
    """WeightSpec with 3 components per (A_k, B_k, phi_k) in theta."""
    comps, blocks = [], []
    for A, B, phi in theta:
        comps.extend(trig_gradient_components(float(A), float(B), float(phi)))
        blocks.append((float(A), float(B), float(phi)))
    return WeightSpec(tuple(comps), time_domain, step, tuple(blocks))


def weights_from_components(components, time_domain=DISCRETE, step=1.0):
    return WeightSpec(tuple(components), time_domain, step)


def weight_norm(weights, i, T):
    """W_iT = (int_0^T w_i^2 nu(dt))^(1/2)."""
    t, h = weights.nodes(T)
    w = weights.components[i](t)
    W = sqrt(h * float(w @ w))
    if W == 0.0:
        raise DegenerateWeightError(f"weight component {i} vanishes on (0, {T}]")
    return W


def weight_norms(weights, T):
    return np.array([weight_norm(weights, i, T) for i in range(weights.q)])


def weight_transform(weights, i, T, lam, chunk=256):
    """w_T^i(lam) = int_0^T exp(i t lam) w_i(t) nu(dt), vectorized over lam."""
    t, h = weights.nodes(T)
    a = h * weights.components[i](t)
    lam = np.asarray(lam, dtype=float)
    flat = lam.ravel()
    out = np.empty(flat.shape, dtype=complex)
    for s in range(0, flat.size, chunk):
        out[s:s + chunk] = np.exp(1j * np.outer(flat[s:s + chunk], t)) @ a
    out = out.reshape(lam.shape)
    return complex(out) if out.ndim == 0 else out


def _cross_lags(weights, T):
    """R[k, l, tau] = sum_t a_k(t + tau) a_l(t) for lag index tau in -(n-1)..(n-1)."""
    t, h = weights.nodes(T)
    a = h * weights.values(t)
    n = t.size
    size = 1 << int(np.ceil(np.log2(2 * n)))
    F = np.fft.rfft(a, size, axis=1)
    q = weights.q
    R = np.empty((q, q, 2 * n - 1))
    for k in range(q):
        for l in range(k, q):
            c = np.fft.irfft(F[k] * np.conj(F[l]), size)
            # lags 0..n-1 then -(n-1)..-1
            R[k, l] = np.concatenate([c[size - n + 1:], c[:n]])
            R[l, k] = R[k, l][::-1]
    lags = np.arange(-(n - 1), n) * weights.step
    return lags, R


def _cell_exp_integrals(lags, lo, hi):
    """int_lo^hi exp(i tau lam) dlam for every (cell, lag)."""
    tau = lags[None, :]
    lo = np.asarray(lo)[:, None]
    hi = np.asarray(hi)[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        e = (np.exp(1j * tau * hi) - np.exp(1j * tau * lo)) / (1j * tau)
    zero = np.broadcast_to(tau == 0, e.shape)
    e[zero] = np.broadcast_to(hi - lo, e.shape)[zero]
    return e


@dataclass
class MatrixMeasureGrid:
    """mu_T integrated over consecutive cells [edges[c], edges[c+1])."""

    edges: np.ndarray
    entries: np.ndarray
    T: float
    period: float = 2 * pi

    @property
    def frequencies(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def diagonal_mass(self):
        return np.real(np.einsum("cii->i", self.entries))

    def mass(self, lo, hi):
        """q x q measure of the cells contained in [lo, hi]."""
        inside = (self.edges[:-1] >= lo - 1e-12) & (self.edges[1:] <= hi + 1e-12)
        return self.entries[inside].sum(axis=0)

    def to_csv(self):
        q = self.entries.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["lambda_low", "lambda_high"]
        for j in range(q):
            for l in range(q):
                head += [f"re_{j}{l}", f"im_{j}{l}"]
        w.writerow(head)
        for c in range(self.entries.shape[0]):
            row = [repr(float(self.edges[c])), repr(float(self.edges[c + 1]))]
            for j in range(q):
                for l in range(q):
                    v = self.entries[c, j, l]
                    row += [repr(float(v.real)), repr(float(v.imag))]
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, T, period=2 * pi):
        rows = list(csv.reader(io.StringIO(text)))
        head, body = rows[0], rows[1:]
        q = int(round(sqrt((len(head) - 2) / 2)))
        edges = [float(body[0][0])] + [float(r[1]) for r in body]
        ent = np.empty((len(body), q, q), dtype=complex)
        for c, r in enumerate(body):
            vals = [float(v) for v in r[2:]]
            ent[c] = (np.array(vals[0::2]) + 1j * np.array(vals[1::2])).reshape(q, q)
        return cls(np.array(edges), ent, T, period)


def default_measure_edges(weights, T, n_cells=512, extra=()):
    """Cells over one period, refined geometrically toward the weight frequencies."""
    half = pi / weights.step
    pts = [0.0]
    for c in weights.components:
        if c.kind != "tabulated":
            for _, _, om in c.exp_terms():
                pts.append(_wrap_period(-om, half))
    pts.extend(extra)
    base = np.linspace(-half, half, n_cells + 1)
    fine = []
    for p in pts:
        h = 2 * pi / T
        while h < 2 * half / n_cells:
            fine.extend([p - h, p + h])
            h *= 2.0
        fine.append(p)
    e = np.concatenate([base, fine])
    e = e[(e >= -half) & (e <= half)]
    return np.unique(e)


def _wrap_period(x, half):
    return float(np.mod(x + half, 2 * half) - half)


def matrix_measure(weights, T, edges=None, chunk=128):
    """Cellwise mu_T^{jl}: exact integrals of w_T^j conj(w_T^l) over each cell, normalized.

    Each cell integral is sum over lags of the weights' cross-correlation
    times int exp(i tau lam) dlam, so no frequency sampling error arises.
    Cells must lie in one period (-pi/step, pi/step]; if they cover less,
    the missing diagonal mass must stay below 1e-3.
    """
    half = pi / weights.step
    if edges is None:
        edges = default_measure_edges(weights, T)
    edges = np.asarray(edges, dtype=float)
    if np.any(np.diff(edges) <= 0):
        raise DomainError("cell edges must be increasing")
    if edges[0] < -half - 1e-9 or edges[-1] > half + 1e-9:
        raise DomainError("cells must lie within one period")
    lags, R = _cross_lags(weights, T)
    q = weights.q
    norms = np.array([2 * pi / weights.step * R[i, i, lags.size // 2] for i in range(q)])
    if np.any(norms <= 0):
        raise DegenerateWeightError("a weight component vanishes on the horizon")
    Rf = R.reshape(q * q, -1).T
    out = np.empty((edges.size - 1, q * q), dtype=complex)
    lo_e, hi_e = edges[:-1], edges[1:]
    for s in range(0, lo_e.size, chunk):
        E = _cell_exp_integrals(lags, lo_e[s:s + chunk], hi_e[s:s + chunk])
        # int w^j conj(w^l) = sum_{t,s} a_j(t) a_l(s) int exp(i (t - s) lam)
        out[s:s + chunk] = E @ Rf
    out = out.reshape(-1, q, q) / np.sqrt(np.outer(norms, norms))[None]
    grid = MatrixMeasureGrid(edges, out, T, 2 * half)
    missing = 1.0 - grid.diagonal_mass()
    if np.max(missing) > 1e-3:
        raise CoverageError(f"cells miss {np.max(missing):.3g} of the diagonal mass",
                            achieved=float(np.max(missing)))
    return grid


def parseval_check(weights, i, T):
    """(int |w_T^i|^2 over a period, 2 pi W_iT^2); equal by Parseval."""
    lags, R = _cross_lags(weights, T)
    lhs = 2 * pi / weights.step * R[i, i, lags.size // 2]
    return lhs, 2 * pi * weight_norm(weights, i, T) ** 2


@dataclass
class AtomicMeasure:
    atoms: list
    continuous_part: object = None

    def total(self):
        return sum((m for _, m in self.atoms), np.zeros_like(self.atoms[0][1]))

    def to_dict(self):
        return {"atoms": [{"frequency": f, "re": np.real(m).tolist(), "im": np.imag(m).tolist()}
                          for f, m in self.atoms]}

    @classmethod
    def from_dict(cls, d):
        return cls([(float(a["frequency"]), np.array(a["re"]) + 1j * np.array(a["im"]))
                    for a in d["atoms"]])


def limit_measure(weights):
    """Closed-form weak limit of mu_T for exponential-monomial weights."""
    q = weights.q
    half = pi / weights.step if weights.time_domain == DISCRETE else None
    tops = []
    for i, c in enumerate(weights.components):
        terms = c.exp_terms()
        n_top = max(n for _, n, _ in terms)
        merged = {}
        for coef, n, om in terms:
            if n != n_top:
                continue
            loc = -om if half is None else _wrap_period(-om, half)
            if half is not None and abs(loc + half) < 1e-12:
                loc = half
            key = next((k for k in merged if abs(k - loc) < 1e-12), loc)
            merged[key] = merged.get(key, 0.0) + coef
        merged = {k: v for k, v in merged.items() if abs(v) > 1e-14}
        S = sum(abs(v) ** 2 for v in merged.values()) / (2 * n_top + 1)
        if S == 0:
            raise DegenerateWeightError(f"weight component {i} vanishes asymptotically")
        tops.append((n_top, merged, S))
    locs = []
    for _, merged, _ in tops:
        for k in merged:
            if not any(abs(k - l) < 1e-12 for l in locs):
                locs.append(k)
    atoms = []
    for loc in sorted(locs):
        M = np.zeros((q, q), dtype=complex)
        for k, (nk, mk, Sk) in enumerate(tops):
            ck = next((v for x, v in mk.items() if abs(x - loc) < 1e-12), 0.0)
            if ck == 0:
                continue
            for l, (nl, ml, Sl) in enumerate(tops):
                cl = next((v for x, v in ml.items() if abs(x - loc) < 1e-12), 0.0)
                M[k, l] = ck * np.conj(cl) / (nk + nl + 1) / sqrt(Sk * Sl)
        atoms.append((float(loc), M))
    return AtomicMeasure(atoms)


def check_overlap(model, measure, tol=1e-8):
    """Raise OverlapError when an atom sits on a singular frequency +-kappa_j."""
    sing = model.singularities()
    for loc, M in measure.atoms:
        if np.max(np.abs(M)) == 0:
            continue
        for s in sing:
            d = abs(_wrap(loc - s)) if model.discrete else abs(loc - s)
            if d <= tol:
                raise OverlapError(
                    f"weight atom at {loc:g} coincides with the spectral singularity "
                    f"{s:g}; the overlapping case is not covered by the limit theorem")


def admissibility_integral(model, measure, j=1, conjecture_mode=False):
    """int f^(*j) dmu as a q x q complex matrix.

    For an AtomicMeasure this is the sum of atom matrices weighted by the
    density at the atoms. For a MatrixMeasureGrid the density is sampled at
    cell midpoints; ``finite_T_integral`` gives the exact finite-T value.
    """
    from .spectral import convolution_value, spectral_density

    def dens(x):
        if j == 1:
            return spectral_density(model, x)
        return convolution_value(model, j, x, conjecture_mode)

    if isinstance(measure, AtomicMeasure):
        check_overlap(model, measure)
        out = np.zeros_like(measure.atoms[0][1])
        for loc, M in measure.atoms:
            out = out + dens(loc) * M
        return out
    mid = measure.frequencies
    if model.discrete:
        mid = _wrap(mid)
    return np.einsum("c,cij->ij", dens(mid), measure.entries)


def finite_T_integral(model, weights, T, j=1, lag_power=None):
    """int f^(*j) dmu_T exactly: sum_{t,s} a_k(t) a_l(s) B^j(t - s) / (2 pi W_k W_l).

    Uses int f^(*j)(lam) exp(i tau lam) dlam = B(tau)^j.
    """
    lags, R = _cross_lags(weights, T)
    Bj = covariance(model, lags) ** j
    q = weights.q
    norms = np.array([2 * pi / weights.step * R[i, i, lags.size // 2] for i in range(q)])
    out = np.einsum("klt,t->kl", R, Bj)
    return out / np.sqrt(np.outer(norms, norms))


def neighbourhood_radii(model, radius=None):
    """delta_j around each singular point: min(0.1, quarter of the smallest gap)."""
    if radius is not None:
        return float(radius)
    pts = model.singularities()
    if model.discrete and len(pts) > 1:
        gaps = list(np.diff(pts)) + [2 * pi - (pts[-1] - pts[0])]
    else:
        gaps = list(np.diff(pts))
    gaps = [g for g in gaps if g > 0]
    return min(0.1, 0.25 * min(gaps)) if gaps else 0.1


def b3_constants(weights, T):
    """k_i = sup_t |w_i(t)| sqrt(T) / W_iT."""
    t, _ = weights.nodes(T)
    out = []
    for i, c in enumerate(weights.components):
        out.append(float(np.max(np.abs(c(t)))) * sqrt(T) / weight_norm(weights, i, T))
    return np.array(out)


@dataclass
class ConditionReport:
    horizons: list
    b3: np.ndarray
    b2: np.ndarray
    k3: np.ndarray
    k2: np.ndarray
    b3_bounded: list
    b2_bounded: list
    radius: float
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"horizons": list(self.horizons), "b3_ratio": self.b3.tolist(),
                "b2_ratio": self.b2.tolist(), "k3": self.k3.tolist(), "k2": self.k2.tolist(),
                "b3_bounded": self.b3_bounded, "b2_bounded": self.b2_bounded,
                "radius": self.radius, "notes": self.notes}


def check_B2_B3(weights, model, T_list, radius=None, n_points=201, growth=1.1):
    """Measured (B2)/(B3) ratios per component and horizon, with boundedness verdicts.

    B3: sup|w_i| sqrt(T) / W_iT. B2: max of |w_T^i| over the radius-delta
    neighbourhoods of the singular points, divided by W_iT. A ratio counts as
    bounded when its value at the largest T is at most ``growth`` times its
    value at the smallest T.
    """
    T_list = sorted(T_list)
    delta = neighbourhood_radii(model, radius)
    offsets = np.linspace(-delta, delta, n_points)
    lam = np.concatenate([s + offsets for s in model.singularities()])
    if model.discrete:
        lam = _wrap(lam)
    q = weights.q
    b3 = np.empty((q, len(T_list)))
    b2 = np.empty((q, len(T_list)))
    for n, T in enumerate(T_list):
        b3[:, n] = b3_constants(weights, T)
        for i in range(q):
            W = weight_norm(weights, i, T)
            b2[i, n] = np.max(np.abs(weight_transform(weights, i, T, lam))) / W
    b3_ok = [bool(b3[i, -1] <= growth * b3[i, 0]) for i in range(q)]
    b2_ok = [bool(b2[i, -1] <= growth * b2[i, 0]) for i in range(q)]
    return ConditionReport(T_list, b3, b2, b3.max(axis=1), b2.max(axis=1), b3_ok, b2_ok, delta)


def example_block(A, B):
    """The 3 x 3 pattern of a trig-regression gradient block (before the f(phi) factor)."""
    C = sqrt(A * A + B * B)
    u = sqrt(3.0) * B / (2 * C)
    v = -sqrt(3.0) * A / (2 * C)
    return np.array([[1.0, 0.0, u], [0.0, 1.0, v], [u, v, 1.0]])
