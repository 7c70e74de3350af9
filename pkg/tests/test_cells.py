import math

import numpy as np
import pytest

from frictioncast import cells
from frictioncast.errors import ShapeError
from frictioncast.linalg import new_rng


def zeroed(params):
    for t in params.tensors().values():
        t[...] = 0.0
    return params


def scalar_sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


# --- plain cell forward ------------------------------------------------------

def test_gru_zero_params_halves_state():
    p = zeroed(cells.init_gru(2, 3, new_rng(0)))
    h_prev = np.array([0.4, -0.2, 1.0])
    h, _ = cells.gru_step(p, np.array([1.0, 2.0]), h_prev)
    # gates sit at 0.5 and the candidate at 0, so the state halves
    assert np.allclose(h, 0.5 * h_prev)


def test_gru_zero_state_zero_params():
    p = zeroed(cells.init_gru(1, 4, new_rng(0)))
    h, _ = cells.gru_step(p, np.array([0.3]), np.zeros(4))
    assert np.allclose(h, 0.0)


def scalar_gru_oracle(p, x, h_prev):
    """Loop-based re-implementation, no vector ops."""
    h_dim, d = p.w_r.shape
    def gate(w, u, b, squash):
        out = []
        for i in range(h_dim):
            a = b[i]
            for j in range(d):
                a += w[i][j] * x[j]
            for j in range(h_dim):
                a += u[i][j] * h_prev[j]
            out.append(squash(a))
        return out
    r = gate(p.w_r, p.u_r, p.b_r, scalar_sigmoid)
    z = gate(p.w_z, p.u_z, p.b_z, scalar_sigmoid)
    c = []
    for i in range(h_dim):
        a = p.b_c[i]
        for j in range(d):
            a += p.w_c[i][j] * x[j]
        for j in range(h_dim):
            a += p.u_c[i][j] * (r[j] * h_prev[j])
        c.append(math.tanh(a))
    return [(1 - z[i]) * h_prev[i] + z[i] * c[i] for i in range(h_dim)]


def test_gru_matches_scalar_oracle():
    rng = new_rng(3)
    for _ in range(10):
        p = cells.init_gru(2, 5, rng)
        x, h_prev = rng.standard_normal(2), rng.standard_normal(5)
        h, _ = cells.gru_step(p, x, h_prev)
        assert np.allclose(h, scalar_gru_oracle(p, x, h_prev), atol=1e-12)


def test_gru_shape_mismatch():
    p = cells.init_gru(2, 3, new_rng(0))
    with pytest.raises(ShapeError):
        cells.gru_step(p, np.zeros(3), np.zeros(3))


def test_gate_and_candidate_ranges():
    rng = new_rng(8)
    for _ in range(20):
        p = cells.init_gru(1, 4, rng)
        _, cache = cells.gru_step(p, rng.standard_normal(1),
                                  rng.standard_normal(4))
        assert np.all((cache["r"] > 0) & (cache["r"] < 1))
        assert np.all((cache["z"] > 0) & (cache["z"] < 1))
        assert np.all((cache["c"] > -1) & (cache["c"] < 1))


def test_state_is_convex_mix_of_carry_and_candidate():
    rng = new_rng(12)
    for _ in range(20):
        p = cells.init_gru(1, 4, rng)
        h_prev = rng.standard_normal(4)
        h, cache = cells.gru_step(p, rng.standard_normal(1), h_prev)
        lo = np.minimum(h_prev, cache["c"])
        hi = np.maximum(h_prev, cache["c"])
        assert np.all(h >= lo - 1e-12) and np.all(h <= hi + 1e-12)


# --- decay rate --------------------------------------------------------------

def test_decay_rate_zero_params():
    gamma = cells.decay_rate(np.zeros(3), np.zeros(3), np.array([0.0, 5.0, 100.0]))
    assert np.all(gamma == 1.0)


def test_decay_rate_scalar_case():
    gamma = cells.decay_rate(np.array([0.5]), np.array([0.1]), np.array([2.0]))
    assert gamma[0] == pytest.approx(math.exp(-1.1), abs=1e-12)


def test_decay_rate_rectifier_floor():
    gamma = cells.decay_rate(np.array([0.01]), np.array([-5.0]), np.array([1.0]))
    assert gamma[0] == 1.0


def test_decay_rate_range_and_floor_condition():
    rng = new_rng(2)
    w = rng.standard_normal(1000)
    b = rng.standard_normal(1000)
    delta = np.abs(rng.standard_normal(1000)) * 10
    gamma = cells.decay_rate(w, b, delta)
    assert np.all(gamma > 0) and np.all(gamma <= 1)
    pre = w * delta + b
    assert np.array_equal(gamma == 1.0, pre <= 0)


# --- decay cell --------------------------------------------------------------

def grud_from_gru(gru, d, h, x_mean):
    """Decay cell sharing the plain cell's weights, all new parts zero."""
    return cells.GrudParams(
        **{k: v.copy() for k, v in gru.tensors().items()},
        v_r=np.zeros((h, d)), v_z=np.zeros((h, d)), v_c=np.zeros((h, d)),
        w_decay_x=np.zeros(d), b_decay_x=np.zeros(d),
        w_decay_h=np.zeros((h, d)), b_decay_h=np.zeros(h),
        x_mean=x_mean,
    )


def test_grud_observed_input_ignores_decay():
    rng = new_rng(5)
    p = cells.init_grud(1, 3, rng, x_mean=np.array([0.6]))
    p.w_decay_x[...] = 5.0  # would decay hard if it were consulted
    x = np.array([0.9])
    _, cache = cells.grud_step(p, x, np.ones(1), np.array([3.0]),
                               np.array([0.1]), rng.standard_normal(3))
    assert np.array_equal(cache["x_hat"], x)


def test_grud_reduces_to_gru():
    rng = new_rng(6)
    for _ in range(30):
        gru = cells.init_gru(1, 4, rng)
        grud = grud_from_gru(gru, 1, 4, x_mean=np.array([0.5]))
        x = rng.random(1)
        h_prev = rng.standard_normal(4)
        hg, _ = cells.gru_step(gru, x, h_prev)
        hd, _ = cells.grud_step(grud, x, np.ones(1), rng.random(1),
                                rng.random(1), h_prev)
        assert np.allclose(hg, hd, atol=1e-12)


def test_grud_missing_with_unit_decay_uses_last_observation():
    rng = new_rng(7)
    p = cells.init_grud(1, 3, rng, x_mean=np.array([0.6]))
    p.w_decay_x[...] = 0.0  # unit input decay
    x_last = np.array([0.82])
    _, cache = cells.grud_step(p, np.array([np.nan]), np.zeros(1),
                               np.array([2.0]), x_last, np.zeros(3))
    assert np.array_equal(cache["x_hat"], x_last)


def test_grud_requires_x_mean():
    p = cells.init_grud(1, 3, new_rng(0))
    with pytest.raises(ShapeError, match="x_mean"):
        cells.grud_step(p, np.zeros(1), np.ones(1), np.zeros(1),
                        np.zeros(1), np.zeros(3))


def test_grud_state_is_convex_mix():
    rng = new_rng(13)
    for _ in range(20):
        p = cells.init_grud(1, 4, rng, x_mean=np.array([0.5]))
        m = np.array([float(rng.integers(0, 2))])
        x = np.where(m > 0.5, rng.random(1), np.nan)
        h, cache = cells.grud_step(p, x, m, rng.random(1), rng.random(1),
                                   rng.standard_normal(4))
        lo = np.minimum(cache["h_hat"], cache["c"])
        hi = np.maximum(cache["h_hat"], cache["c"])
        assert np.all(h >= lo - 1e-12) and np.all(h <= hi + 1e-12)


# --- LSTM --------------------------------------------------------------------

def test_lstm_zero_params():
    p = zeroed(cells.init_lstm(2, 3, new_rng(0)))
    c_prev = np.array([0.8, -0.4, 0.0])
    h, c, _ = cells.lstm_step(p, np.zeros(2), np.zeros(3), c_prev)
    assert np.allclose(c, 0.5 * c_prev)
    assert np.allclose(h, 0.5 * np.tanh(c))


def test_lstm_zero_everything():
    p = zeroed(cells.init_lstm(1, 3, new_rng(0)))
    h, c, _ = cells.lstm_step(p, np.zeros(1), np.zeros(3), np.zeros(3))
    assert np.allclose(h, 0.0) and np.allclose(c, 0.0)


def scalar_lstm_oracle(p, x, h_prev, c_prev):
    h_dim, d = p.w_f.shape
    def pre(w, u, b, i):
        a = b[i]
        for j in range(d):
            a += w[i][j] * x[j]
        for j in range(h_dim):
            a += u[i][j] * h_prev[j]
        return a
    h, c = [], []
    for i in range(h_dim):
        f = scalar_sigmoid(pre(p.w_f, p.u_f, p.b_f, i))
        g_i = scalar_sigmoid(pre(p.w_i, p.u_i, p.b_i, i))
        o = scalar_sigmoid(pre(p.w_o, p.u_o, p.b_o, i))
        g = math.tanh(pre(p.w_g, p.u_g, p.b_g, i))
        ci = f * c_prev[i] + g_i * g
        c.append(ci)
        h.append(o * math.tanh(ci))
    return h, c


def test_lstm_matches_scalar_oracle():
    rng = new_rng(9)
    for _ in range(10):
        p = cells.init_lstm(2, 4, rng)
        x = rng.standard_normal(2)
        h_prev, c_prev = rng.standard_normal(4), rng.standard_normal(4)
        h, c, _ = cells.lstm_step(p, x, h_prev, c_prev)
        oh, oc = scalar_lstm_oracle(p, x, h_prev, c_prev)
        assert np.allclose(h, oh, atol=1e-12)
        assert np.allclose(c, oc, atol=1e-12)


# --- dense -------------------------------------------------------------------

def test_dense_identity():
    p = cells.DenseParams(w=np.eye(3), b=np.zeros(3), activation="identity")
    x = np.array([0.1, -0.5, 2.0])
    y, _ = cells.dense_step(p, x)
    assert np.array_equal(y, x)


def test_dense_tanh_of_bias():
    p = cells.DenseParams(w=np.zeros((2, 3)), b=np.array([0.3, -0.7]))
    y, _ = cells.dense_step(p, np.ones(3))
    assert np.allclose(y, np.tanh([0.3, -0.7]))


def test_dense_matches_scalar_oracle():
    rng = new_rng(10)
    p = cells.init_dense(3, 2, rng)
    x = rng.standard_normal(3)
    y, _ = cells.dense_step(p, x)
    for i in range(2):
        a = p.b[i] + sum(p.w[i][j] * x[j] for j in range(3))
        assert y[i] == pytest.approx(math.tanh(a), abs=1e-12)


# --- initialization ----------------------------------------------------------

def test_init_deterministic():
    a = cells.init_grud(1, 4, new_rng(42))
    b = cells.init_grud(1, 4, new_rng(42))
    for (na, ta), (nb, tb) in zip(a.tensors().items(), b.tensors().items()):
        assert na == nb and np.array_equal(ta, tb)


def test_init_contract():
    p = cells.init_grud(1, 4, new_rng(0))
    assert np.all(p.b_r == 0) and np.all(p.b_z == 0) and np.all(p.b_c == 0)
    assert np.all(p.b_decay_x == 0) and np.all(p.b_decay_h == 0)
    # decay weights start slightly positive so the rectifier can train
    assert np.all(p.w_decay_x == cells.DECAY_WEIGHT_INIT)
    assert np.all(p.w_decay_h == cells.DECAY_WEIGHT_INIT)
    assert np.all(p.v_r == 0) and np.all(p.v_z == 0) and np.all(p.v_c == 0)


def test_init_weight_scale():
    p = cells.init_gru(1, 64, new_rng(1))
    std = np.std(p.u_r)
    assert abs(std - 1 / 8) < 0.1 / 8


# --- step backward vs finite differences -------------------------------------

def numeric_step_grads(step_fn, params, eps=1e-5):
    """Central differences of sum(h) over every parameter scalar."""
    out = {}
    for name, tensor in params.tensors().items():
        g = np.zeros_like(tensor)
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = tensor[idx]
            tensor[idx] = orig + eps
            hp = step_fn()
            tensor[idx] = orig - eps
            hm = step_fn()
            tensor[idx] = orig
            g[idx] = (np.sum(hp) - np.sum(hm)) / (2 * eps)
        out[name] = g
    return out


def assert_grads_close(analytic, numeric, tol=1e-6, skip=()):
    for name, a in analytic.items():
        if name in skip:
            continue
        n = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        rel = np.abs(a - n) / denom
        assert np.max(rel) < tol, f"{name}: rel err {np.max(rel):.2e}"


def test_gru_backward_matches_finite_differences():
    rng = new_rng(20)
    p = cells.init_gru(1, 3, rng)
    x, h_prev = rng.standard_normal(1), rng.standard_normal(3)
    _, cache = cells.gru_step(p, x, h_prev)
    g, dh_prev, dx = cells.gru_step_backward(p, cache, np.ones(3))
    assert_grads_close(g, numeric_step_grads(lambda: cells.gru_step(p, x, h_prev)[0], p))
    # carried-state and input gradients against finite differences
    eps = 1e-5
    for j in range(3):
        hp = h_prev.copy(); hp[j] += eps
        hm = h_prev.copy(); hm[j] -= eps
        num = (np.sum(cells.gru_step(p, x, hp)[0])
               - np.sum(cells.gru_step(p, x, hm)[0])) / (2 * eps)
        assert dh_prev[j] == pytest.approx(num, rel=1e-6, abs=1e-9)
    num = (np.sum(cells.gru_step(p, x + eps, h_prev)[0])
           - np.sum(cells.gru_step(p, x - eps, h_prev)[0])) / (2 * eps)
    assert dx[0] == pytest.approx(num, rel=1e-6, abs=1e-9)


def test_grud_backward_matches_finite_differences():
    rng = new_rng(21)
    p = cells.init_grud(1, 3, rng, x_mean=np.array([0.6]))
    # random decay params well away from the rectifier kink
    p.w_decay_x[...] = 0.4
    p.b_decay_x[...] = 0.2
    p.w_decay_h[...] = rng.random((3, 1)) + 0.1
    p.b_decay_h[...] = rng.random(3) + 0.1
    m = np.zeros(1)
    x, delta, x_last = np.array([np.nan]), np.array([2.0]), np.array([0.8])
    h_prev = rng.standard_normal(3)
    _, cache = cells.grud_step(p, x, m, delta, x_last, h_prev)
    g, dh_prev, _ = cells.grud_step_backward(p, cache, np.ones(3))
    numeric = numeric_step_grads(
        lambda: cells.grud_step(p, x, m, delta, x_last, h_prev)[0], p)
    assert_grads_close(g, numeric)


def test_grud_backward_dead_rectifier_gives_zero_decay_grads():
    rng = new_rng(22)
    p = cells.init_grud(1, 3, rng, x_mean=np.array([0.6]))
    p.w_decay_x[...] = 0.01
    p.b_decay_x[...] = -5.0  # pre-activation below zero -> gamma frozen at 1
    p.w_decay_h[...] = 0.01
    p.b_decay_h[...] = -5.0
    _, cache = cells.grud_step(p, np.array([np.nan]), np.zeros(1),
                               np.array([2.0]), np.array([0.8]),
                               rng.standard_normal(3))
    g, _, _ = cells.grud_step_backward(p, cache, np.ones(3))
    for name in ("w_decay_x", "b_decay_x", "w_decay_h", "b_decay_h"):
        assert np.all(g[name] == 0.0)


def test_lstm_backward_matches_finite_differences():
    rng = new_rng(23)
    p = cells.init_lstm(1, 3, rng)
    x = rng.standard_normal(1)
    h_prev, c_prev = rng.standard_normal(3), rng.standard_normal(3)
    _, _, cache = cells.lstm_step(p, x, h_prev, c_prev)
    g, _, _, _ = cells.lstm_step_backward(p, cache, np.ones(3), np.zeros(3))
    numeric = numeric_step_grads(
        lambda: cells.lstm_step(p, x, h_prev, c_prev)[0], p)
    assert_grads_close(g, numeric)


def test_zero_upstream_gradient_gives_zero_grads():
    rng = new_rng(24)
    p = cells.init_gru(1, 3, rng)
    _, cache = cells.gru_step(p, rng.standard_normal(1), rng.standard_normal(3))
    g, dh_prev, dx = cells.gru_step_backward(p, cache, np.zeros(3))
    assert all(np.all(t == 0) for t in g.values())
    assert np.all(dh_prev == 0) and np.all(dx == 0)


def test_step_backward_dispatcher():
    rng = new_rng(25)
    p = cells.init_gru(1, 3, rng)
    _, cache = cells.gru_step(p, rng.standard_normal(1), rng.standard_normal(3))
    g1, _, _ = cells.gru_step_backward(p, cache, np.ones(3))
    g2, _, _ = cells.step_backward("gru", p, cache, np.ones(3))
    assert all(np.array_equal(g1[k], g2[k]) for k in g1)
    with pytest.raises(ShapeError):
        cells.step_backward("nope", p, cache, np.ones(3))
