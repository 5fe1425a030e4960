"""Independent reference implementations the tests check the library against.

Everything here is deliberately naive (scalar loops, sorting, enumeration) and
stays independent of the code paths it verifies.
"""

import numpy as np


def conv1d_naive(x, w, b):
    """Scalar triple-loop cross-correlation: tap innermost, then channel."""
    c_in, length = x.shape
    f_out, _, k = w.shape
    t = length - k + 1
    out = np.empty((f_out, t))
    for f in range(f_out):
        for ti in range(t):
            acc = b[f]
            for c in range(c_in):
                for ki in range(k):
                    acc += x[c, ti + ki] * w[f, c, ki]
            out[f, ti] = acc
    return out


def central_difference(fn, x, h=1e-5):
    """Elementwise central difference of a scalar function of an array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = fn(x)
        flat[i] = orig - h
        lo = fn(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * h)
    return grad


def max_rel_err(analytic, numeric):
    """max |a-n| / max(|a|, |n|, 1) over all entries."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1.0)
    return float(np.max(np.abs(a - n) / scale)) if a.size else 0.0


def enumerate_window_origins(n, w, s):
    """All window start positions by explicit scanning."""
    return [t for t in range(n) if t + w <= n and t % s == 0]


def percentile_sorted(values, p):
    """Sort-based percentile with linear interpolation."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 1:
        return float(v[0])
    pos = p / 100.0 * (v.size - 1)
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    frac = pos - lo
    return float(v[lo] * (1.0 - frac) + v[hi] * frac)
