"""Backend parity: the compiled extension must match the numpy fallback."""

import math

import numpy as np
import pytest

from llrd import _kernels_py, kernels


def _random_ba_problem(rng):
    n, m = rng.integers(2, 6), rng.integers(2, 6)
    p = rng.dirichlet(np.ones(n))
    d = rng.uniform(0.0, 3.0, size=(n, m))
    if rng.random() < 0.3:  # sprinkle forbidden pairs, keep rows viable
        d[rng.integers(n), rng.integers(m)] = math.inf
        d[:, 0] = np.minimum(d[:, 0], 2.0)
    lam = rng.uniform(0.05, 20.0)
    logq0 = np.full(m, -math.log(m))
    return p, d, lam, logq0


@pytest.mark.parametrize("seed", range(25))
def test_ba_parity(seed):
    rng = np.random.default_rng(seed)
    p, d, lam, logq0 = _random_ba_problem(rng)
    out_c = kernels.ba_iterate(p, d, lam, logq0, 1e-10, 10**5)
    out_p = _kernels_py.ba_iterate(p, d, lam, logq0, 1e-10, 10**5)
    for a, b, name in [
        (out_c[1], out_p[1], "marginal"),
        (out_c[2], out_p[2], "rate"),
        (out_c[3], out_p[3], "distortion"),
    ]:
        assert np.asarray(a) == pytest.approx(np.asarray(b), abs=1e-9), name
    assert out_c[6] == out_p[6]  # status


@pytest.mark.parametrize("seed", range(15))
def test_sinkhorn_parity(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 6))
    p = rng.dirichlet(np.ones(n))
    d = rng.uniform(0.0, 2.0, size=(n, n))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    logk = -rng.uniform(0.5, 5.0) * d
    logp = np.log(p)
    loga0 = logp.copy()
    logb0 = np.zeros(n)
    out_c = kernels.sinkhorn_scale(logk, logp, loga0, logb0, 1e-12, 10**5)
    out_p = _kernels_py.sinkhorn_scale(logk, logp, loga0, logb0, 1e-12, 10**5)
    w_c = np.exp(out_c[0][:, None] + logk + out_c[1][None, :])
    w_p = np.exp(out_p[0][:, None] + logk + out_p[1][None, :])
    assert w_c == pytest.approx(w_p, abs=1e-9)
    assert out_c[4] == out_p[4]


@pytest.mark.parametrize("seed", range(10))
def test_symnmf_parity(seed):
    rng = np.random.default_rng(200 + seed)
    n, r = int(rng.integers(2, 5)), int(rng.integers(2, 6))
    b_true = rng.uniform(0.0, 1.0, size=(n, r))
    v = b_true @ b_true.T
    b0 = rng.uniform(0.1, 1.0, size=(n, r))
    out_c = kernels.symnmf_run(v, b0, 500)
    out_p = _kernels_py.symnmf_run(v, b0, 500)
    assert np.asarray(out_c) == pytest.approx(np.asarray(out_p), rel=1e-8, abs=1e-10)


def test_ba_debug_monotonicity_both_backends():
    rng = np.random.default_rng(5)
    p, d, lam, logq0 = _random_ba_problem(rng)
    for impl in (kernels, _kernels_py):
        out = impl.ba_iterate(p, d, lam, logq0, 1e-10, 2000, True)
        assert out[6] in (0, 1)


def test_ba_warm_start_with_dead_symbol():
    # a zeroed starting marginal stays zeroed; the certificate still closes
    p = np.array([0.5, 0.5])
    d = np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 0.5]])
    logq0 = np.array([-math.log(2), -math.log(2), -math.inf])
    for impl in (kernels, _kernels_py):
        logw, q, rate, dist, iters, gap, status = impl.ba_iterate(
            p, d, 1.0, logq0, 1e-10, 10**5
        )
        assert q[2] == 0.0
        assert status == 0


def test_ba_reinit_on_support_loss():
    # starting marginal concentrated where a source row has no support:
    # one uniform re-initialization must rescue the run
    p = np.array([0.5, 0.5])
    d = np.array([[0.0, math.inf], [math.inf, 0.0]])
    logq0 = np.array([-math.inf, 0.0])  # row 0 sees nothing
    for impl in (kernels, _kernels_py):
        logw, q, rate, dist, iters, gap, status = impl.ba_iterate(
            p, d, 2.0, logq0, 1e-10, 10**5
        )
        assert status == 0
        assert q == pytest.approx([0.5, 0.5], abs=1e-9)


def test_backend_name_reports():
    assert kernels.backend_name() in ("cython", "python")
