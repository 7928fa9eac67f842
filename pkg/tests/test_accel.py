"""The numba path and the numpy fallback must agree on every kernel."""

import numpy as np
import pytest

from mmidict import accel


@pytest.fixture
def both_backends():
    if not accel.HAS_NUMBA:
        pytest.skip("numba not available")
    saved = accel.current_backend()
    yield
    accel.set_backend(saved)


def _random_problem(seed, n=16, K=40, N=25, T=5):
    rng = np.random.default_rng(seed)
    D = rng.normal(size=(n, K))
    D /= np.sqrt((D**2).sum(axis=0))
    Y = rng.normal(size=(n, N))
    return D, Y, T


def test_backend_flag_roundtrip(both_backends):
    accel.set_backend("numpy")
    assert not accel.using_numba()
    accel.set_backend("numba")
    assert accel.using_numba()
    with pytest.raises(ValueError):
        accel.set_backend("cuda")


def test_omp_paths_agree(both_backends):
    for seed in range(5):
        D, Y, T = _random_problem(seed)
        accel.set_backend("numba")
        idx_nb, val_nb, cnt_nb = accel.omp_batch(D, Y, T)
        accel.set_backend("numpy")
        idx_py, val_py, cnt_py = accel.omp_batch(D, Y, T)
        np.testing.assert_array_equal(cnt_nb, cnt_py)
        np.testing.assert_array_equal(idx_nb, idx_py)
        np.testing.assert_allclose(val_nb, val_py, rtol=1e-12, atol=1e-14)


def test_dtw_paths_agree(both_backends):
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = rng.normal(size=(rng.integers(2, 12), 4))
        b = rng.normal(size=(rng.integers(2, 12), 4))
        accel.set_backend("numba")
        c_nb, l_nb = accel.dtw_cost_length(a, b)
        accel.set_backend("numpy")
        c_py, l_py = accel.dtw_cost_length(a, b)
        assert l_nb == l_py
        np.testing.assert_allclose(c_nb, c_py, rtol=1e-12)
