"""Hot numeric kernels with numba-jitted and pure-numpy implementations.

The jitted path is used when numba imports cleanly; setting the environment
variable HAR_NUMBA to 0/false/off forces the numpy fallback. Both paths fix
the floating-point accumulation order per output element (conv forward: bias
first, then kernel tap innermost, then input channel), so they produce
bit-identical results to each other and to a naive scalar loop.

benchmarks/bench_kernels.py times the two paths against each other.
"""

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _numba_wanted() -> bool:
    flag = os.environ.get("HAR_NUMBA", "").strip().lower()
    return flag not in ("0", "false", "off", "no")


NUMBA_ENABLED = False
if _numba_wanted():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


# ---------------------------------------------------------------------------
# numpy fallback path
#
# Loops run over filters/channels/taps and vectorize over the output position,
# which touches every output element in the same scalar order as the jitted
# loops below.

def conv1d_fwd_np(x, w, b):
    c_in, length = x.shape
    f_out, _, k = w.shape
    t = length - k + 1
    out = np.empty((f_out, t))
    for f in range(f_out):
        acc = np.full(t, b[f])
        for c in range(c_in):
            row = x[c]
            taps = w[f, c]
            for ki in range(k):
                acc += row[ki:ki + t] * taps[ki]
        out[f] = acc
    return out


def conv1d_bwd_np(x, w, up):
    c_in, length = x.shape
    f_out, _, k = w.shape
    t = up.shape[1]
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    db = np.zeros(f_out)
    # windows[c, ki, ti] == x[c, ki + ti]
    windows = sliding_window_view(x, t, axis=1)
    for ti in range(t):
        col = up[:, ti]
        db += col
        dw += col[:, None, None] * windows[None, :, :, ti]
    for f in range(f_out):
        for ki in range(k):
            dx[:, ki:ki + t] += np.outer(w[f, :, ki], up[f])
    return dx, dw, db


def maxpool1d_fwd_np(x, pool):
    c, length = x.shape
    t = length // pool
    windows = x[:, :t * pool].reshape(c, t, pool)
    # numpy argmax keeps the first occurrence, matching the jitted scan
    return windows.max(axis=2), windows.argmax(axis=2)


def maxpool1d_bwd_np(argmax, up, length, pool):
    c, t = up.shape
    dx = np.zeros((c, length))
    cols = np.arange(t) * pool + argmax
    dx[np.arange(c)[:, None], cols] = up
    return dx


# ---------------------------------------------------------------------------
# numba path

if NUMBA_ENABLED:

    @njit(cache=True)
    def conv1d_fwd_nb(x, w, b):
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

    @njit(cache=True)
    def conv1d_bwd_nb(x, w, up):
        c_in, length = x.shape
        f_out, _, k = w.shape
        t = up.shape[1]
        dx = np.zeros_like(x)
        dw = np.zeros_like(w)
        db = np.zeros(f_out)
        for f in range(f_out):
            s = 0.0
            for ti in range(t):
                s += up[f, ti]
            db[f] = s
        for f in range(f_out):
            for c in range(c_in):
                for ki in range(k):
                    s = 0.0
                    for ti in range(t):
                        s += up[f, ti] * x[c, ti + ki]
                    dw[f, c, ki] = s
        for f in range(f_out):
            for ki in range(k):
                for c in range(c_in):
                    wv = w[f, c, ki]
                    for ti in range(t):
                        dx[c, ti + ki] += wv * up[f, ti]
        return dx, dw, db

    @njit(cache=True)
    def maxpool1d_fwd_nb(x, pool):
        c_in, length = x.shape
        t = length // pool
        out = np.empty((c_in, t))
        argmax = np.empty((c_in, t), dtype=np.int64)
        for c in range(c_in):
            for ti in range(t):
                base = ti * pool
                best = x[c, base]
                at = 0
                for j in range(1, pool):
                    v = x[c, base + j]
                    if v > best:
                        best = v
                        at = j
                out[c, ti] = best
                argmax[c, ti] = at
        return out, argmax

    @njit(cache=True)
    def maxpool1d_bwd_nb(argmax, up, length, pool):
        c_in, t = up.shape
        dx = np.zeros((c_in, length))
        for c in range(c_in):
            for ti in range(t):
                dx[c, ti * pool + argmax[c, ti]] = up[c, ti]
        return dx

    conv1d_fwd = conv1d_fwd_nb
    conv1d_bwd = conv1d_bwd_nb
    maxpool1d_fwd = maxpool1d_fwd_nb
    maxpool1d_bwd = maxpool1d_bwd_nb
else:
    conv1d_fwd = conv1d_fwd_np
    conv1d_bwd = conv1d_bwd_np
    maxpool1d_fwd = maxpool1d_fwd_np
    maxpool1d_bwd = maxpool1d_bwd_np
