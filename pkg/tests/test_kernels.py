"""The jitted and fallback kernel paths must agree bit for bit."""

import numpy as np
import pytest

from harkit import kernels
from oracles import conv1d_naive

needs_numba = pytest.mark.skipif(not kernels.NUMBA_ENABLED,
                                 reason="numba path disabled")


def random_case(rng):
    c = int(rng.integers(1, 5))
    length = int(rng.integers(3, 40))
    k = int(rng.integers(1, length + 1))
    f = int(rng.integers(1, 6))
    x = rng.standard_normal((c, length))
    w = rng.standard_normal((f, c, k))
    b = rng.standard_normal(f)
    return x, w, b


def test_numpy_fallback_matches_naive_loop_exactly():
    rng = np.random.default_rng(11)
    for _ in range(50):
        x, w, b = random_case(rng)
        assert np.array_equal(kernels.conv1d_fwd_np(x, w, b), conv1d_naive(x, w, b))


@needs_numba
def test_numba_matches_naive_loop_exactly():
    rng = np.random.default_rng(12)
    for _ in range(50):
        x, w, b = random_case(rng)
        assert np.array_equal(kernels.conv1d_fwd_nb(x, w, b), conv1d_naive(x, w, b))


@needs_numba
def test_backward_paths_bit_identical():
    rng = np.random.default_rng(13)
    for _ in range(50):
        x, w, b = random_case(rng)
        t = x.shape[1] - w.shape[2] + 1
        up = rng.standard_normal((w.shape[0], t))
        got_nb = kernels.conv1d_bwd_nb(x, w, up)
        got_np = kernels.conv1d_bwd_np(x, w, up)
        for a, b_ in zip(got_nb, got_np):
            assert np.array_equal(a, b_)


@needs_numba
def test_maxpool_paths_bit_identical():
    rng = np.random.default_rng(14)
    for _ in range(50):
        c = int(rng.integers(1, 5))
        length = int(rng.integers(2, 40))
        pool = int(rng.integers(1, length + 1))
        x = rng.standard_normal((c, length))
        out_nb, arg_nb = kernels.maxpool1d_fwd_nb(x, pool)
        out_np, arg_np = kernels.maxpool1d_fwd_np(x, pool)
        assert np.array_equal(out_nb, out_np)
        assert np.array_equal(arg_nb, arg_np)
        up = rng.standard_normal(out_nb.shape)
        assert np.array_equal(kernels.maxpool1d_bwd_nb(arg_nb, up, length, pool),
                              kernels.maxpool1d_bwd_np(arg_np, up, length, pool))


def test_maxpool_ties_take_first_index():
    x = np.array([[2.0, 2.0, 2.0, 2.0]])
    _, arg = kernels.maxpool1d_fwd(x, 2)
    assert arg.tolist() == [[0, 0]]


def test_env_flag_selects_fallback(monkeypatch):
    import importlib

    monkeypatch.setenv("HAR_NUMBA", "0")
    reloaded = importlib.reload(kernels)
    try:
        assert not reloaded.NUMBA_ENABLED
        assert reloaded.conv1d_fwd is reloaded.conv1d_fwd_np
    finally:
        monkeypatch.undo()
        importlib.reload(kernels)
