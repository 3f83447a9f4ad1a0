"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and semantics; used when the extension is not built or
when ``SINGCLT_PURE_PYTHON`` is set.
"""

import numpy as np

_LN2 = np.log(2.0)


def _logkernel(a, x, u):
    au = a * u
    return au + np.log1p(np.exp(-2.0 * au)) - _LN2 - x * np.cosh(u)


def bessel_k_scaled(nu, x, p, rtol=1e-13, max_level=14):
    x = np.ascontiguousarray(x, dtype=float)
    a = abs(float(nu))
    if x.size == 0:
        return np.empty(0), 0.0
    ustar = np.arcsinh(a / x) if a > 0 else np.zeros_like(x)
    shift = np.maximum(_logkernel(a, x, 0.0), _logkernel(a, x, ustar))
    hi = ustar + 1.0
    lo = ustar.copy()
    grow = _logkernel(a, x, hi) > shift - 60.0
    while grow.any():
        hi[grow] = ustar[grow] + 2.0 * (hi[grow] - ustar[grow])
        grow = _logkernel(a, x, hi) > shift - 60.0
    for _ in range(20):
        mid = 0.5 * (lo + hi)
        up = _logkernel(a, x, mid) > shift - 60.0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    U = hi

    n = 16
    h = U / n
    k = np.arange(1, n)
    total = 0.5 * (np.exp(_logkernel(a, x, 0.0) - shift) + np.exp(_logkernel(a, x, U) - shift))
    total = total + np.exp(_logkernel(a, x[:, None], k[None, :] * h[:, None]) - shift[:, None]).sum(axis=1)
    old = total * h
    new = old
    change = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for _ in range(max_level):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        h[idx] *= 0.5
        odd_k = 2 * np.arange(n) + 1
        odd = np.exp(
            _logkernel(a, x[idx, None], odd_k[None, :] * h[idx, None]) - shift[idx, None]
        ).sum(axis=1)
        total[idx] += odd
        n *= 2
        new_idx = total[idx] * h[idx]
        change[idx] = np.abs(new_idx - old[idx]) / new_idx
        new[idx] = new_idx
        old[idx] = new_idx
        done = change[idx] <= rtol
        if n >= 32:
            active[idx[done]] = False
    vals = np.exp(np.log(new) + shift + p * np.log(x))
    return vals, float(change.max())


def toeplitz_bilinear(a, b, c):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    n = a.size
    idx = np.arange(n)
    total = 0.0
    # row blocks keep memory at O(block * T)
    for start in range(0, n, 512):
        rows = idx[start:start + 512]
        lag = np.abs(rows[:, None] - idx[None, :])
        total += float(a[rows] @ (c[lag] @ b))
    return float(total)


def k4_pattern_sum(r, ca, cb, cc):
    r = np.asarray(r, dtype=float)
    n = r.size
    idx = np.arange(n)
    lag = np.abs(idx[:, None] - idx[None, :])
    A, Bm, C = ca[lag], cb[lag], cc[lag]
    total = 0.0
    for t1 in range(n):
        x2 = r * A[t1]
        y3 = r * Bm[t1]
        y4 = r * C[t1]
        # inner[t2, t3] = sum_t4 Bm[t2, t4] y4[t4] A[t3, t4]
        inner = (Bm * y4[None, :]) @ A.T
        total += r[t1] * float(x2 @ ((C * inner) @ y3))
    return float(total)
