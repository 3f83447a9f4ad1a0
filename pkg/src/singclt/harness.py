"""Monte Carlo check that the weighted functional zeta_T is asymptotically N(0, Xi).

Thresholds (KS distance, covariance distance, mean test) are engineering
calibrations, not hypothesis tests with guaranteed error rates.
"""

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite_e
from scipy import stats
from scipy.special import gammaln

from .errors import DegenerateSampleError, DomainError
from .hermite import hermite_coefficients, hermite_poly, psi_from_spec
from .limitcov import limit_covariance, mehler_remainder_profile
from .simulate import SimulationPlan, simulate_values
from .spectral import SpectralModel
from .weights import WeightSpec, limit_measure

DEFAULT_TESTS = {"normality": True, "covariance": True, "fourth_moment": True,
                 "contraction_decay": False, "tail_diagnostics": False}


@dataclass
class ExperimentConfig:
    model: SpectralModel
    weights: WeightSpec
    psi: object
    horizons: list
    replicates: int = 1000
    seed: int = 0
    tests: dict = field(default_factory=lambda: dict(DEFAULT_TESTS))
    directions: list = None
    d: int = None
    chaos_orders: list = field(default_factory=lambda: [1, 2])
    center: bool = False
    conjecture_mode: bool = False
    ks_tol: float = 0.02
    cov_tol: float = 0.10
    chunk: int = 100

    def __post_init__(self):
        self.horizons = [int(T) if self.weights.time_domain == "discrete" else float(T)
                         for T in self.horizons]
        if not self.horizons:
            raise DomainError("need at least one horizon")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise DomainError("horizons must be increasing")
        for T in self.horizons:
            k = np.log2(T / self.horizons[0])
            if abs(k - round(k)) > 1e-9:
                raise DomainError("horizons must form a dyadic ladder")
        if self.model.time_domain != self.weights.time_domain:
            raise DomainError("model and weights use different time domains")
        if int(self.replicates) < 2:
            raise DomainError("need at least two replicates")
        self.replicates = int(self.replicates)
        self.tests = {**DEFAULT_TESTS, **(self.tests or {})}
        unknown = set(self.tests) - set(DEFAULT_TESTS)
        if unknown:
            raise DomainError(f"unknown tests {sorted(unknown)}")

    def direction_panel(self):
        """Configured directions, else the canonical basis plus the all-ones vector."""
        q = self.weights.q
        if self.directions is not None:
            dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
            if dirs.shape[1] != q:
                raise DomainError(f"directions must have length {q}")
            return dirs
        return np.vstack([np.eye(q), np.ones((1, q))]) if q > 1 else np.eye(1)

    def to_dict(self):
        psi = psi_from_spec(self.psi)
        return {"model": self.model.to_dict(), "weights": self.weights.to_dict(),
                "psi": psi.spec, "horizons": list(self.horizons),
                "replicates": self.replicates, "seed": int(self.seed), "tests": dict(self.tests),
                "directions": None if self.directions is None else
                np.asarray(self.directions, dtype=float).tolist(),
                "d": self.d, "chaos_orders": list(self.chaos_orders), "center": self.center,
                "conjecture_mode": self.conjecture_mode, "ks_tol": self.ks_tol,
                "cov_tol": self.cov_tol, "chunk": self.chunk}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        model = SpectralModel.from_dict(d.pop("model"))
        weights = WeightSpec.from_dict(d.pop("weights"))
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown experiment keys {sorted(extra)}")
        return cls(model=model, weights=weights, **d)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class MCReport:
    config: dict
    Xi: np.ndarray
    xi_oracle: np.ndarray
    xi_oracle_gap: float
    horizons: list
    verdicts: dict
    runtime: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)

    @property
    def passed(self):
        return all(self.verdicts.values())

    def to_dict(self):
        return {"config": self.config, "Xi": self.Xi.tolist(),
                "xi_oracle": self.xi_oracle.tolist(), "xi_oracle_gap": self.xi_oracle_gap,
                "horizons": self.horizons, "verdicts": self.verdicts, "passed": self.passed,
                "runtime": self.runtime, "messages": self.messages}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        return cls(d["config"], np.array(d["Xi"]), np.array(d["xi_oracle"]),
                   float(d["xi_oracle_gap"]), d["horizons"], d["verdicts"],
                   d.get("runtime", {}), d.get("messages", []))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def rows(self):
        """Plot-ready rows (horizon, statistic, value, stderr)."""
        out = []
        for h in self.horizons:
            T = h["T"]
            out.append((T, "cov_distance", h["cov_distance"], h["cov_distance_stderr"]))
            for k, (m, s) in enumerate(zip(h["mean"], h["mean_stderr"])):
                out.append((T, f"mean[{k}]", m, s))
            for n, st in enumerate(h["directions"]):
                for key in ("ks", "skew", "excess_kurtosis", "fourth_moment"):
                    out.append((T, f"{key}[z{n}]", st[key], st.get(key + "_stderr", 0.0)))
            for e in h.get("chaos_fourth_moment", []):
                out.append((T, f"pi4[j={e['j']}]", e["value"], e["stderr"]))
            for e in h.get("contractions", []):
                out.append((T, f"contraction[j={e['j']},p={e['p']}]", e["value"], 0.0))
            if "tail_rms" in h:
                out.append((T, "tail_rms", h["tail_rms"], 0.0))
        return out

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["horizon", "statistic", "value", "stderr"])
        for T, name, v, s in self.rows():
            w.writerow([T, name, repr(float(v)), repr(float(s))])
        return buf.getvalue()


def normality_tests(samples, kurtosis_flag=0.5):
    """KS distance to the fitted normal, skewness, excess kurtosis, and the
    standardized fourth moment with its jackknife standard error."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise DomainError("normality diagnostics need at least 100 samples")
    sd = x.std(ddof=1)
    if not sd > 0:
        raise DegenerateSampleError("sample has zero variance")
    mean = x.mean()
    ks = float(stats.kstest(x, "norm", args=(mean, sd)).statistic)
    skew = float(stats.skew(x))
    exkurt = float(stats.kurtosis(x))
    m4, m4_se = _fourth_moment_jackknife(x - mean)
    n = x.size
    return {"n": int(n), "mean": float(mean), "sd": float(sd), "ks": ks, "skew": skew,
            "skew_stderr": float(np.sqrt(6.0 / n)), "excess_kurtosis": exkurt,
            "excess_kurtosis_stderr": float(np.sqrt(24.0 / n)),
            "fourth_moment": m4, "fourth_moment_stderr": m4_se,
            "kurtosis_flag": bool(abs(exkurt) > kurtosis_flag)}


def _fourth_moment_jackknife(x):
    n = x.size
    s2, s4 = np.sum(x ** 2), np.sum(x ** 4)
    value = (s4 / n) / (s2 / n) ** 2
    loo = ((s4 - x ** 4) / (n - 1)) / ((s2 - x ** 2) / (n - 1)) ** 2
    se = np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return float(value), float(se)


def xi_lag_oracle(model, weights, psi, n_lags=1 << 20):
    """Xi from the full Mehler covariance summed over lags, atom by atom.

    Independent of the chaos-by-chaos route: Xi = sum_atoms Re(M) sum_tau
    Cov(psi(X_0), psi(X_tau)) cos(delta tau).
    """
    mu = limit_measure(weights)
    psi = psi_from_spec(psi)
    locs = [loc for loc, _ in mu.atoms]
    prof = mehler_remainder_profile(model, psi, 0, np.zeros(1), locs, n_lags=n_lags)
    q = weights.q
    out = np.zeros((q, q))
    for (_, M), p in zip(mu.atoms, prof):
        out = out + np.real(M) * p
    return 0.5 * (out + out.T)


def _max_entry_distance(S, Xi):
    return float(np.max(np.abs(S - Xi)) / np.max(np.abs(Xi)))


def _simulate_functionals(config, expansion, T, horizon_index):
    """zeta_T for every replicate, and the truncated version when requested."""
    w = config.weights
    t, h = w.nodes(T)
    norms = np.sqrt(h * np.sum(w.values(t) ** 2, axis=1))
    wt = w.values(t)
    plan = SimulationPlan(config.model, t.size, w.step, config.seed)
    psi = expansion.psi
    R = config.replicates
    zeta = np.empty((R, w.q))
    trunc = np.empty((R, w.q)) if config.tests["tail_diagnostics"] else None
    chaos = {j: np.empty(R) for j in config.chaos_orders} if config.tests["fourth_moment"] else {}
    base = horizon_index << 32
    for start in range(0, R, config.chunk):
        ids = range(base + start, base + min(R, start + config.chunk))
        X = simulate_values(plan, ids)
        sl = slice(start, start + len(ids))
        y = psi(X) - expansion.centered_by
        zeta[sl] = h * (y @ wt.T) / norms
        if trunc is not None:
            yd = _expansion_values(expansion, X)
            trunc[sl] = h * (yd @ wt.T) / norms
        for j in chaos:
            chaos[j][sl] = h * (hermite_poly(j, X) @ wt.T) / norms @ np.ones(w.q)
    return zeta, trunc, chaos


def _expansion_values(expansion, X):
    c = np.asarray(expansion.coefficients, dtype=float)
    k = np.arange(c.size)
    return hermite_e.hermeval(X, c * np.exp(-gammaln(k + 1.0)))


def run_experiment(config, progress=None):
    """Simulate every horizon and compare zeta_T with N(0, Xi)."""
    from .diagrams import contraction_norm, ContractionSpec
    from .limitcov import sigma_limit_squared

    t_start = time.time()
    d = config.d if config.d is not None else 60
    expansion = hermite_coefficients(config.psi, d, center=config.center)
    # assumption and overlap failures surface here, before any simulation
    lc = limit_covariance(config.model, config.weights, expansion,
                          conjecture_mode=config.conjecture_mode)
    Xi = lc.Xi
    oracle = xi_lag_oracle(config.model, config.weights, expansion.psi)
    oracle_gap = _max_entry_distance(Xi, oracle)
    dirs = config.direction_panel()
    ones = np.ones(config.weights.q)
    chaos_sigma = {}
    if config.tests["fourth_moment"]:
        for j in config.chaos_orders:
            chaos_sigma[j] = sigma_limit_squared(config.model, config.weights, j, ones,
                                                 conjecture_mode=True)
    per_h = []
    for n, T in enumerate(config.horizons):
        t0 = time.time()
        zeta, trunc, chaos = _simulate_functionals(config, expansion, T, n)
        R = zeta.shape[0]
        mean = zeta.mean(axis=0)
        mean_se = zeta.std(axis=0, ddof=1) / np.sqrt(R)
        S = np.cov(zeta, rowvar=False).reshape(config.weights.q, config.weights.q)
        dist = _max_entry_distance(S, Xi)
        # delete-a-group jackknife of the covariance distance
        groups = np.array_split(np.arange(R), 20)
        loo = []
        for g in groups:
            keep = np.ones(R, dtype=bool)
            keep[g] = False
            Sg = np.cov(zeta[keep], rowvar=False).reshape(S.shape)
            loo.append(_max_entry_distance(Sg, Xi))
        loo = np.array(loo)
        G = len(groups)
        dist_se = float(np.sqrt((G - 1) / G * np.sum((loo - loo.mean()) ** 2)))
        entry = {"T": T, "replicates": R, "mean": mean.tolist(), "mean_stderr": mean_se.tolist(),
                 "covariance": S.tolist(), "cov_distance": dist, "cov_distance_stderr": dist_se,
                 "directions": []}
        if config.tests["normality"] or config.tests["fourth_moment"]:
            for z in dirs:
                st = normality_tests(zeta @ z)
                st["z"] = z.tolist()
                entry["directions"].append(st)
        if config.tests["fourth_moment"]:
            fm = []
            for j, vals in chaos.items():
                p = vals / np.sqrt(chaos_sigma[j])
                m4 = p ** 4
                k, kse = _fourth_moment_jackknife(p)
                fm.append({"j": j, "value": float(m4.mean()),
                           "stderr": float(m4.std(ddof=1) / np.sqrt(R)),
                           "kurtosis": k, "kurtosis_stderr": kse})
            entry["chaos_fourth_moment"] = fm
        if config.tests["contraction_decay"]:
            entry["contractions"] = [
                {"j": j, "p": p, "value": contraction_norm(
                    ContractionSpec(j, p, T, config.model, config.weights, tuple(ones)))}
                for j in config.chaos_orders if j >= 2 for p in range(1, j)]
        if trunc is not None:
            entry["tail_rms"] = float(np.sqrt(np.mean(np.sum((zeta - trunc) ** 2, axis=1))))
            entry["truncation"] = expansion.truncation
        entry["seconds"] = time.time() - t0
        per_h.append(entry)
        if progress is not None:
            progress(entry)
    verdicts = _verdicts(config, per_h)
    msgs = list(lc.warnings)
    if oracle_gap > 1e-3:
        msgs.append(f"Xi differs from the lag-sum oracle by {oracle_gap:.3g} (max-entry relative)")
    return MCReport(config.to_dict(), Xi, oracle, oracle_gap, per_h, verdicts,
                    {"seconds": time.time() - t_start}, msgs)


def _verdicts(config, per_h):
    last = per_h[-1]
    out = {}
    R = config.replicates
    if config.tests["covariance"]:
        out["covariance"] = bool(last["cov_distance"] <= config.cov_tol)
        d = [h["cov_distance"] for h in per_h]
        s = [h["cov_distance_stderr"] for h in per_h]
        out["covariance_trend"] = all(b <= a + 2 * max(sa, sb)
                                      for a, b, sa, sb in zip(d, d[1:], s, s[1:]))
    out["mean_zero"] = all(abs(m) <= 4 * s for m, s in zip(last["mean"], last["mean_stderr"]))
    if config.tests["normality"] and R >= 100:
        out["normality"] = all(st["ks"] < config.ks_tol for st in last["directions"])
    if config.tests["fourth_moment"] and R >= 100:
        ok = True
        for n in range(len(last["directions"])):
            first = per_h[0]["directions"][n]
            fin = last["directions"][n]
            gap0 = abs(first["fourth_moment"] - 3.0)
            gap1 = abs(fin["fourth_moment"] - 3.0)
            ok &= gap1 <= gap0 + 2 * (first["fourth_moment_stderr"] + fin["fourth_moment_stderr"])
        out["fourth_moment_trend"] = bool(ok)
    return out
