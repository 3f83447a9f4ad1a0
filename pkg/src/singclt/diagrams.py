"""Diagrams, the diagram formula, and the fourth-moment and contraction diagnostics.

A diagram of order (l_1, ..., l_p) is a perfect matching of the vertices
(i, s), s < l_i, in which every edge joins two different levels. Levels are
numbered from 0 here. For an edge e = ((i, s), (k, u)) with i < k,
d1(e) = i and d2(e) = k.

For a chaos order j the statistic pi_{T,j} = int r(t) H_j(xi(t)) nu(dt) with
r = R_T / sigma(j, z) has a fourth moment that is a sum over diagrams of
order (j, j, j, j). Every such diagram has the edge multiplicities
n01 = n23 = a, n02 = n13 = b, n03 = n12 = c with a + b + c = j, so the sum is
taken per pattern (a, b, c):

- one of a, b, c equal to j gives a regular diagram, value S^2 with
  S = sum_{t,s} r r B^j;
- exactly one of them zero gives a 4-cycle, value tr((D M_x D M_y)^2);
- all three positive gives the complete graph K4, an O(T^4) sum.
"""

import json
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import factorial, prod

import numpy as np

from . import kernels
from .errors import BudgetError, DegenerateSampleError, DomainError
from .limitcov import _r_weights, sigma_limit_squared, sigma_T_squared
from .spectral import covariance

MAX_VERTICES = 16
STRONG_DONOR = "StrongDonor"
DONOR = "Donor"
RECIPIENT = "Recipient"
DIAGRAM = "diagram"
MONTECARLO = "montecarlo"


@dataclass(frozen=True)
class Diagram:
    order: tuple
    edges: tuple

    def __post_init__(self):
        order = tuple(int(l) for l in self.order)
        if any(l < 1 for l in order):
            raise DomainError("level sizes must be positive")
        edges = []
        for a, b in self.edges:
            a, b = (int(a[0]), int(a[1])), (int(b[0]), int(b[1]))
            if a[0] == b[0]:
                raise DomainError(f"edge {a}-{b} joins a level to itself")
            edges.append((a, b) if a < b else (b, a))
        edges = tuple(sorted(edges))
        seen = Counter(v for e in edges for v in e)
        expected = {(i, s) for i, l in enumerate(order) for s in range(l)}
        if set(seen) != expected or any(c != 1 for c in seen.values()):
            raise DomainError("edges must cover every vertex exactly once")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "edges", edges)

    @property
    def levels(self):
        return len(self.order)

    @property
    def is_regular(self):
        return classify_regular(self)

    @property
    def level_indegrees(self):
        """q(i): number of edges with d1 = i."""
        q = [0] * self.levels
        for (i, _), _ in self.edges:
            q[i] += 1
        return tuple(q)

    def multiplicities(self):
        """n[i][k]: number of edges between levels i and k."""
        p = self.levels
        n = [[0] * p for _ in range(p)]
        for (i, _), (k, _) in self.edges:
            n[i][k] += 1
            n[k][i] += 1
        return n

    def to_dict(self):
        return {"order": list(self.order), "edges": [[list(a), list(b)] for a, b in self.edges]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["order"]), tuple((tuple(a), tuple(b)) for a, b in d["edges"]))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _check_order(order):
    order = tuple(int(l) for l in order)
    if not order or any(l < 1 for l in order):
        raise DomainError("order must be a nonempty tuple of positive integers")
    return order


def _check_budget(order):
    total = sum(order)
    if total > MAX_VERTICES:
        n = total - 1
        bound = 1
        while n > 1:
            bound *= n
            n -= 2
        raise BudgetError(f"order {order} has {total} vertices (limit {MAX_VERTICES}); "
                          f"up to {bound} matchings")


def enumerate_diagrams(order):
    """All diagrams of the given order, each exactly once.

    The lowest unmatched vertex is paired with every unmatched vertex on a
    higher level. Branches are cut when one level has more free vertices than
    all the others together.
    """
    order = _check_order(order)
    if sum(order) % 2:
        return []
    _check_budget(order)
    free = [list(range(l)) for l in order]
    out = []
    edges = []

    def feasible():
        sizes = [len(f) for f in free]
        return 2 * max(sizes) <= sum(sizes)

    def rec():
        lvl = next((i for i, f in enumerate(free) if f), None)
        if lvl is None:
            out.append(Diagram(order, tuple(edges)))
            return
        s = free[lvl].pop(0)
        for k in range(lvl + 1, len(order)):
            for pos, u in enumerate(list(free[k])):
                free[k].pop(pos)
                if feasible():
                    edges.append(((lvl, s), (k, u)))
                    rec()
                    edges.pop()
                free[k].insert(pos, u)
        free[lvl].insert(0, s)

    if feasible():
        rec()
    return out


def classify_regular(diagram):
    """True iff the levels split into pairs and every edge stays inside a pair."""
    p = diagram.levels
    if p % 2:
        return False
    parent = list(range(p))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for (i, _), (k, _) in diagram.edges:
        parent[find(i)] = find(k)
    sizes = Counter(find(i) for i in range(p))
    return all(c == 2 for c in sizes.values())


def classify_levels(diagram):
    """StrongDonor if q(i) equals the level size, Donor if q(i) >= 1, else Recipient."""
    out = []
    for l, q in zip(diagram.order, diagram.level_indegrees):
        out.append(STRONG_DONOR if q == l else DONOR if q >= 1 else RECIPIENT)
    return out


def level_counts(diagram):
    """(rho_sd, rho_r): numbers of strong-donor and recipient levels."""
    kinds = classify_levels(diagram)
    return kinds.count(STRONG_DONOR), kinds.count(RECIPIENT)


def permute_levels(diagram, perm):
    """Diagram with level i renamed perm[i]; level sizes follow their levels."""
    perm = tuple(perm)
    if sorted(perm) != list(range(diagram.levels)):
        raise DomainError("perm must be a permutation of the levels")
    order = [0] * diagram.levels
    for i, l in enumerate(diagram.order):
        order[perm[i]] = l
    edges = tuple(((perm[a[0]], a[1]), (perm[b[0]], b[1])) for a, b in diagram.edges)
    return Diagram(tuple(order), edges)


# ---------------------------------------------------------------------------
# diagram formula


def multiplicity_patterns(order):
    """Map from edge-multiplicity tuples (n_ik for i < k) to the number of diagrams.

    A pattern with multiplicities n_ik is realised by prod l_i! / prod n_ik! diagrams.
    """
    order = _check_order(order)
    if sum(order) % 2:
        return {}
    return dict(_patterns(order))


@lru_cache(maxsize=256)
def _patterns(order):
    p = len(order)
    pairs = list(combinations(range(p), 2))
    out = []
    rem = list(order)
    n = [0] * len(pairs)

    def rec(idx):
        if idx == len(pairs):
            if not any(rem):
                count = prod(factorial(l) for l in order) // prod(factorial(x) for x in n)
                out.append((tuple(n), count))
            return
        i, k = pairs[idx]
        # the last pair touching level i must absorb its remainder
        last_i = all(pairs[m][0] != i for m in range(idx + 1, len(pairs)))
        top = min(rem[i], rem[k])
        lo = rem[i] if last_i else 0
        if lo > top:
            return
        for x in range(lo, top + 1):
            n[idx] = x
            rem[i] -= x
            rem[k] -= x
            rec(idx + 1)
            rem[i] += x
            rem[k] += x
        n[idx] = 0

    rec(0)
    return tuple(out)


def _check_correlation(corr, p):
    if len(corr) != p or any(len(row) != p for row in corr):
        raise DomainError(f"correlation must be {p} x {p}")
    for i in range(p):
        if corr[i][i] != 1:
            raise DomainError("correlation must have unit diagonal")
        for k in range(i):
            if corr[i][k] != corr[k][i]:
                raise DomainError("correlation must be symmetric")
    vals = np.linalg.eigvalsh(np.array([[float(x) for x in row] for row in corr]))
    if vals.min() < -1e-12:
        raise DomainError(f"correlation is not positive semidefinite (min eigenvalue {vals.min():.3g})")


def hermite_moment(orders, correlation):
    """E prod_i H_{l_i}(xi_i) by the diagram formula.

    Exact when the correlation entries are ints or Fractions. The sum over
    diagrams is grouped by edge multiplicities, which gives the same terms.
    """
    order = _check_order(orders)
    p = len(order)
    corr = [list(row) for row in (correlation.tolist() if isinstance(correlation, np.ndarray)
                                  else correlation)]
    _check_correlation(corr, p)
    if sum(order) % 2:
        return 0
    _check_budget(order)
    pairs = list(combinations(range(p), 2))
    total = 0
    for n, count in _patterns(order):
        term = count
        for (i, k), x in zip(pairs, n):
            if x:
                term = term * corr[i][k] ** x
        total = total + term
    return total


def diagram_sum(orders, correlation):
    """The diagram formula summed diagram by diagram (small orders; an oracle)."""
    corr = np.asarray(correlation, dtype=object)
    total = 0
    for d in enumerate_diagrams(orders):
        term = 1
        for (i, _), (k, _) in d.edges:
            term = term * corr[i][k]
        total = total + term
    return total


# ---------------------------------------------------------------------------
# fourth moment of pi_{T,j}


def _lag_matrix(c):
    n = c.size
    idx = np.arange(n)
    return c[np.abs(idx[:, None] - idx[None, :])]


def _cycle_trace(r, cx, cy):
    """sum r1 r2 r3 r4 cx(t1-t2) cy(t2-t3) cx(t3-t4) cy(t4-t1) = tr((D Mx D My)^2)."""
    X = (r[:, None] * _lag_matrix(cx)) @ (r[:, None] * _lag_matrix(cy))
    return float(np.sum(X * X.T))


@dataclass
class FourthMomentResult:
    value: float
    regular: float
    nonregular: float
    pattern_values: dict
    sigma_T2: float
    sigma2: float
    T: int
    j: int
    route: str = DIAGRAM
    stderr: float = 0.0
    kurtosis: float = None
    kurtosis_stderr: float = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"value": self.value, "regular": self.regular, "nonregular": self.nonregular,
                "patterns": [{"a": a, "b": b, "c": c, "count": n, "value": v}
                             for (a, b, c), (n, v) in self.pattern_values.items()],
                "sigma_T2": self.sigma_T2, "sigma2": self.sigma2, "T": self.T, "j": self.j,
                "route": self.route, "stderr": self.stderr, "kurtosis": self.kurtosis,
                "kurtosis_stderr": self.kurtosis_stderr, "notes": list(self.notes)}


def _square_patterns(j):
    """(a, b, c) with a + b + c = j and the diagram count of each."""
    out = []
    for a in range(j + 1):
        for b in range(j + 1 - a):
            c = j - a - b
            count = factorial(j) ** 4 // (factorial(a) * factorial(b) * factorial(c)) ** 2
            out.append(((a, b, c), count))
    return out


def _kernel_and_sigma(model, weights, j, z, T, sigma2):
    t, a = _r_weights(weights, z, T)
    if sigma2 is None:
        sigma2 = sigma_limit_squared(model, weights, j, z)
    if not sigma2 > 0:
        raise DomainError("limit variance sigma^2(j, z) must be positive")
    r = np.ascontiguousarray(a / np.sqrt(sigma2))
    lags = np.arange(t.size) * weights.step
    return r, np.ascontiguousarray(covariance(model, lags)), float(sigma2)


def fourth_moment_statistic(model, weights, j, z, T, route=DIAGRAM, sigma2=None,
                            max_points=4096, max_k4_points=256, replicates=5000, seed=0,
                            fallback=False):
    """E pi_{T,j}^4 with pi normalised by the limit sigma(j, z).

    The diagram route returns the regular part 3 sigma_T^4 / sigma^4 and the
    non-regular sum separately, from the same lag grid. Grids larger than
    ``max_points`` (or ``max_k4_points`` when a K4 pattern occurs) raise
    BudgetError unless ``fallback`` switches to the Monte Carlo route.
    """
    if j < 1:
        raise DomainError("chaos order must be at least 1")
    if route == MONTECARLO:
        return _fourth_moment_mc(model, weights, j, z, T, sigma2, replicates, seed)
    if route != DIAGRAM:
        raise DomainError(f"unknown route {route!r}")
    n = weights.nodes(T)[0].size
    needs_k4 = j >= 3
    if n > max_points or (needs_k4 and n > max_k4_points):
        limit = max_k4_points if needs_k4 else max_points
        if fallback:
            res = _fourth_moment_mc(model, weights, j, z, T, sigma2, replicates, seed)
            res.notes.append(f"grid of {n} points above the diagram budget {limit}")
            return res
        raise BudgetError(f"diagram route on {n} grid points exceeds the budget of {limit}")
    r, c, sigma2 = _kernel_and_sigma(model, weights, j, z, T, sigma2)
    powers = {k: np.ascontiguousarray(c ** k) for k in range(j + 1)}
    S = float(r @ _lag_matrix(powers[j]) @ r)
    patterns = {}
    regular = 0.0
    nonregular = 0.0
    for (a, b, cc), count in _square_patterns(j):
        nz = [x for x in (a, b, cc) if x]
        if len(nz) == 1:
            v = S * S
        elif len(nz) == 2:
            v = _cycle_trace(r, powers[nz[0]], powers[nz[1]])
        else:
            v = kernels.k4_pattern_sum(r, powers[a], powers[b], powers[cc])
        patterns[(a, b, cc)] = (count, v)
        if len(nz) == 1:
            regular += count * v
        else:
            nonregular += count * v
    sigma_T2 = factorial(j) * S * sigma2
    return FourthMomentResult(regular + nonregular, regular, nonregular, patterns,
                              sigma_T2, sigma2, int(T), j)


def _fourth_moment_mc(model, weights, j, z, T, sigma2, replicates, seed):
    from .hermite import hermite_poly
    from .simulate import SimulationPlan, simulate_values

    t, a = _r_weights(weights, z, T)
    if sigma2 is None:
        sigma2 = sigma_limit_squared(model, weights, j, z)
    plan = SimulationPlan(model, t.size, weights.step, seed)
    vals = []
    for start in range(0, replicates, 500):
        X = simulate_values(plan, range(start, min(replicates, start + 500)))
        vals.append(hermite_poly(j, X) @ a)
    pi_ = np.concatenate(vals) / np.sqrt(sigma2)
    if np.var(pi_) == 0:
        raise DegenerateSampleError("simulated statistic has zero variance")
    m4 = pi_ ** 4
    value = float(m4.mean())
    se = float(m4.std(ddof=1) / np.sqrt(m4.size))
    kurt, kurt_se = jackknife_kurtosis(pi_)
    sigma_T2 = sigma_T_squared(model, weights, j, z, T)
    return FourthMomentResult(value, float("nan"), float("nan"), {}, sigma_T2, float(sigma2),
                              int(T), j, MONTECARLO, se, kurt, kurt_se)


def jackknife_kurtosis(x):
    """Standardized fourth moment m4 / m2^2 (mean known to be 0) with jackknife SE."""
    x = np.asarray(x, dtype=float)
    n = x.size
    s2, s4 = np.sum(x ** 2), np.sum(x ** 4)
    k = (s4 / n) / (s2 / n) ** 2
    loo = ((s4 - x ** 4) / (n - 1)) / ((s2 - x ** 2) / (n - 1)) ** 2
    se = np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return float(k), float(se)


# ---------------------------------------------------------------------------
# contractions


@dataclass(frozen=True)
class ContractionSpec:
    j: int
    p: int
    T: int
    model: object
    weights: object
    z: tuple = None

    def __post_init__(self):
        if self.j < 2:
            raise DomainError("contractions need j >= 2")
        if not 1 <= self.p <= self.j - 1:
            raise DomainError(f"p must lie in [1, {self.j - 1}]")


def contraction_from_lags(r, c, j, p):
    """sum r r r r B^{j-p}(q-k) B^{j-p}(l-i) B^p(q-l) B^p(k-i) for lag covariance c."""
    c = np.asarray(c, dtype=float)
    return _cycle_trace(np.asarray(r, dtype=float), c ** p, c ** (j - p))


def contraction_norm(spec, max_points=4096):
    """Squared norm of f_{j,T} (x)_p f_{j,T} on the time grid of the weights.

    The kernel is R_T (without the sigma normalisation); z defaults to the
    first canonical direction.
    """
    w = spec.weights
    z = np.eye(w.q)[0] if spec.z is None else np.asarray(spec.z, dtype=float)
    t, a = _r_weights(w, z, spec.T)
    if t.size > max_points:
        raise BudgetError(f"contraction on {t.size} grid points exceeds the budget of {max_points}")
    c = covariance(spec.model, np.arange(t.size) * w.step)
    return max(0.0, contraction_from_lags(a, c, spec.j, spec.p))


def nonregular_bound_ingredients(diagram, model, weights, j, z, T, sigma2=None):
    """Factors of the per-diagram bound on |F_Gamma(T)|.

    bound = 2^(4 - rho_r) |z|^4 |k|^4 / sigma^4 T^-2 prod_i int_0^T |B|^q(i) nu(dt),
    with z(i) = q(i) / j and C0 = max(1, int_0^inf B^2 nu(dt)).
    """
    from .weights import b3_constants

    q = diagram.level_indegrees
    rho_sd, rho_r = level_counts(diagram)
    t, h = weights.nodes(T)
    # int_0^T |B(t)|^q nu(dt) on the lag grid
    lags = np.arange(t.size) * weights.step
    absB = np.abs(covariance(model, lags))
    integrals = [float(T) if qi == 0 else float(h * np.sum(absB ** qi)) for qi in q]
    far = np.abs(covariance(model, np.arange(1 << 18) * weights.step)) ** 2
    C0 = max(1.0, float(h * np.sum(far)))
    z = np.asarray(z, dtype=float)
    k = b3_constants(weights, T)
    if sigma2 is None:
        sigma2 = sigma_limit_squared(model, weights, j, z)
    pref = 2.0 ** (4 - rho_r) * np.sum(z ** 2) ** 2 * np.sum(k ** 2) ** 2 / sigma2 ** 2
    product = float(np.prod(integrals)) / float(T) ** 2
    return {"q": list(q), "z": [qi / j for qi in q], "rho_sd": rho_sd, "rho_r": rho_r,
            "integrals": integrals, "C0": C0, "prefactor": float(pref),
            "scaled_product": product, "bound": float(pref * product)}


def diagram_value(diagram, model, weights, z, T, sigma2=None):
    """F_Gamma(T) for a diagram of order (j, j, j, j), by its multiplicity pattern."""
    if diagram.levels != 4 or len(set(diagram.order)) != 1:
        raise DomainError("F_Gamma is defined here for square orders (j, j, j, j)")
    j = diagram.order[0]
    n = diagram.multiplicities()
    a, b, cc = n[0][1], n[0][2], n[0][3]
    r, c, _ = _kernel_and_sigma(model, weights, j, z, T, sigma2)
    nz = [x for x in (a, b, cc) if x]
    if len(nz) == 1:
        S = float(r @ _lag_matrix(c ** j) @ r)
        return S * S
    if len(nz) == 2:
        return _cycle_trace(r, c ** nz[0], c ** nz[1])
    return kernels.k4_pattern_sum(r, np.ascontiguousarray(c ** a),
                                  np.ascontiguousarray(c ** b), np.ascontiguousarray(c ** cc))


def regular_count(j):
    """3 (j!)^2: the number of regular diagrams of order (j, j, j, j)."""
    return 3 * factorial(j) ** 2
