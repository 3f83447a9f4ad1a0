"""Sample paths of the stationary Gaussian process on a regular grid.

Paths are exact draws from N(0, [B(step (i - j))]) by circulant embedding or
Toeplitz Cholesky. Randomness comes from a Philox generator keyed by
(seed, replicate_id), so any replicate can be regenerated on its own.
"""

import io
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from .errors import DomainError, EmbeddingError, FactorizationError
from .spectral import DISCRETE, SpectralModel, covariance

CIRCULANT = "circulant"
CHOLESKY = "cholesky"


@dataclass(frozen=True)
class SimulationPlan:
    model: SpectralModel
    n_points: int
    step: float = 1.0
    seed: int = 0
    method: str = CIRCULANT
    padding: int = 4
    tol_embed: float = 1e-8

    def __post_init__(self):
        if int(self.n_points) < 2:
            raise DomainError("need at least two grid points")
        object.__setattr__(self, "n_points", int(self.n_points))
        if not self.step > 0:
            raise DomainError("step must be positive")
        if self.model.time_domain == DISCRETE and self.step != 1.0:
            raise DomainError("discrete-time models use step 1")
        if self.method not in (CIRCULANT, CHOLESKY):
            raise DomainError(f"unknown simulation method {self.method!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if int(self.padding) < 2:
            raise DomainError("circulant padding factor must be at least 2")

    def to_dict(self):
        return {"model": self.model.to_dict(), "n_points": self.n_points, "step": self.step,
                "seed": int(self.seed), "method": self.method, "padding": self.padding,
                "tol_embed": self.tol_embed}

    @classmethod
    def from_dict(cls, d):
        return cls(SpectralModel.from_dict(d["model"]), int(d["n_points"]),
                   float(d.get("step", 1.0)), int(d.get("seed", 0)),
                   d.get("method", CIRCULANT), int(d.get("padding", 4)),
                   float(d.get("tol_embed", 1e-8)))


@dataclass
class SamplePath:
    values: np.ndarray
    plan: SimulationPlan
    replicate_id: int

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class Embedding:
    sqrt_eig: np.ndarray
    clipped_mass: float


def generator(seed, replicate_id):
    """Philox stream keyed by (seed, replicate_id)."""
    key = (int(seed) % 2 ** 64) | ((int(replicate_id) % 2 ** 64) << 64)
    return np.random.Generator(np.random.Philox(key=key))


@lru_cache(maxsize=16)
def circulant_embedding(model, n_points, step, padding, tol_embed):
    """sqrt(eigenvalues / M) of the circulant of size M = padding * N."""
    M = padding * n_points
    k = np.arange(M)
    c = covariance(model, np.minimum(k, M - k) * step)
    eig = np.fft.fft(c).real
    neg = -eig[eig < 0].sum()
    if neg > tol_embed * np.abs(eig).sum():
        raise EmbeddingError(
            f"circulant embedding has negative eigenvalue mass {neg:.3g}; "
            "increase the padding factor or use the cholesky method", achieved=float(neg / np.abs(eig).sum()))
    eig = np.clip(eig, 0.0, None)
    out = np.sqrt(eig / M)
    out.setflags(write=False)
    return Embedding(out, float(neg))


@lru_cache(maxsize=8)
def _cholesky_factor(model, n_points, step):
    c = covariance(model, np.arange(n_points) * step)
    try:
        L = linalg.cholesky(linalg.toeplitz(c), lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError(f"Toeplitz covariance is not positive definite: {exc}")
    L.setflags(write=False)
    return L


def simulate(plan, replicate_id=0):
    """One path of length N, deterministic in (plan.seed, replicate_id)."""
    return SamplePath(simulate_values(plan, [replicate_id])[0], plan, int(replicate_id))


def simulate_values(plan, replicate_ids):
    """Array of shape (len(replicate_ids), N); row r equals simulate(plan, ids[r]).values."""
    N = plan.n_points
    ids = list(replicate_ids)
    if plan.method == CHOLESKY:
        L = _cholesky_factor(plan.model, N, plan.step)
        Z = np.stack([generator(plan.seed, r).standard_normal(N) for r in ids])
        return Z @ L.T
    emb = circulant_embedding(plan.model, N, plan.step, plan.padding, plan.tol_embed)
    M = emb.sqrt_eig.size
    Z = np.empty((len(ids), M), dtype=complex)
    for n, r in enumerate(ids):
        g = generator(plan.seed, r)
        Z[n].real = g.standard_normal(M)
        Z[n].imag = g.standard_normal(M)
    return np.fft.fft(Z * emb.sqrt_eig[None, :], axis=1).real[:, :N]


def weighted_functional(path, psi, weights, T, return_error=False):
    """zeta_T with components W_iT^{-1} int_0^T w_i(t) psi(xi(t)) nu(dt).

    ``path`` is a SamplePath or a raw array (rows are replicates). Path entry
    n stands for the n-th node of ``weights.nodes(T)``; by stationarity the
    grid origin is immaterial. With ``return_error`` the continuous-time
    result comes with the change against the rule on every second node.
    """
    from .hermite import psi_from_spec
    from .weights import weight_norms

    values = path.values if isinstance(path, SamplePath) else np.asarray(path, dtype=float)
    t, h = weights.nodes(T)
    if t.size > values.shape[-1]:
        raise DomainError(f"horizon {T} needs {t.size} points, path has {values.shape[-1]}")
    f = psi_from_spec(psi)
    y = f(values[..., :t.size])
    W = weight_norms(weights, T)
    w = weights.values(t)
    out = h * (y @ w.T) / W
    if not return_error:
        return out
    if weights.time_domain == DISCRETE or t.size < 4:
        return out, 0.0
    n2 = (t.size // 2) * 2
    coarse = 2 * h * (0.5 * (y[..., 0:n2:2] + y[..., 1:n2:2]) @ (0.5 * (w[:, 0:n2:2] + w[:, 1:n2:2])).T)
    coarse = coarse / W
    return out, float(np.max(np.abs(out - coarse)))


def paths_to_csv(values):
    """One column per path."""
    values = np.atleast_2d(values)
    buf = io.StringIO()
    buf.write(",".join(f"path{r}" for r in range(values.shape[0])) + "\n")
    np.savetxt(buf, values.T, delimiter=",", fmt="%.17g")
    return buf.getvalue()


def paths_from_csv(text):
    arr = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    return arr.T


def save_paths(path_prefix, values, plan, fmt="npy"):
    """Write paths as .npy (binary) or .csv plus the plan as JSON."""
    if fmt == "npy":
        np.save(f"{path_prefix}.npy", np.atleast_2d(values))
    elif fmt == "csv":
        with open(f"{path_prefix}.csv", "w") as fh:
            fh.write(paths_to_csv(values))
    else:
        raise DomainError(f"unknown path format {fmt!r}")
    with open(f"{path_prefix}.plan.json", "w") as fh:
        json.dump(plan.to_dict(), fh, indent=2)
