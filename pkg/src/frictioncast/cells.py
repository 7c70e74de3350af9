"""Single-step forward/backward kernels for the recurrent cells.

Implements the plain gated recurrent cell, its decay-mechanism variant for
missing data, a standard LSTM step for the baseline, and a dense layer for
the feed-forward baseline. Every forward step returns a write-once cache
holding exactly the intermediates the matching backward step needs; backward
passes are exact reverse-mode, gradient-checked against finite differences.

Conventions: x is the input vector [D], h the hidden state [H]. The decay
rate is exp(-max(0, w·delta + b)), so it lives in (0, 1] and its gradient is
zero wherever the rectifier is inactive (subgradient 0 at the kink).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ShapeError
from .linalg import sigmoid

Grads = dict[str, np.ndarray]


@dataclass
class GruParams:
    w_r: np.ndarray  # [H, D]
    u_r: np.ndarray  # [H, H]
    b_r: np.ndarray  # [H]
    w_z: np.ndarray
    u_z: np.ndarray
    b_z: np.ndarray
    w_c: np.ndarray  # candidate-state weights
    u_c: np.ndarray
    b_c: np.ndarray

    def tensors(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class GrudParams(GruParams):
    v_r: np.ndarray        # [H, D] mask weights
    v_z: np.ndarray
    v_c: np.ndarray
    w_decay_x: np.ndarray  # [D] diagonal per-variable input decay
    b_decay_x: np.ndarray  # [D]
    w_decay_h: np.ndarray  # [H, D] hidden decay
    b_decay_h: np.ndarray  # [H]
    x_mean: np.ndarray = None  # [D] frozen training mean; not trained

    def tensors(self) -> dict[str, np.ndarray]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        del out["x_mean"]  # frozen buffer, not a trainable tensor
        return out


@dataclass
class LstmParams:
    w_f: np.ndarray
    u_f: np.ndarray
    b_f: np.ndarray
    w_i: np.ndarray
    u_i: np.ndarray
    b_i: np.ndarray
    w_o: np.ndarray
    u_o: np.ndarray
    b_o: np.ndarray
    w_g: np.ndarray
    u_g: np.ndarray
    b_g: np.ndarray

    def tensors(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class DenseParams:
    w: np.ndarray  # [out, in]
    b: np.ndarray  # [out]
    activation: str = "tanh"  # "tanh" or "identity"

    def tensors(self) -> dict[str, np.ndarray]:
        return {"w": self.w, "b": self.b}


def zero_grads(params) -> Grads:
    return {name: np.zeros_like(t) for name, t in params.tensors().items()}


def decay_rate(w: np.ndarray, b: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """exp(-max(0, w·delta + b)); diagonal (1-D w) or full (2-D w) map."""
    pre = (w * delta if w.ndim == 1 else w @ delta) + b
    return np.exp(-np.maximum(pre, 0.0))


def _check(name: str, got, want) -> None:
    if got.shape != tuple(want):
        raise ShapeError(f"{name}: expected shape {tuple(want)}, got {got.shape}")


# --- plain gated recurrent cell ---------------------------------------------

def gru_step(p: GruParams, x: np.ndarray, h_prev: np.ndarray):
    h_dim, d = p.w_r.shape
    _check("x", x, (d,))
    _check("h_prev", h_prev, (h_dim,))
    r = sigmoid(p.w_r @ x + p.u_r @ h_prev + p.b_r)
    z = sigmoid(p.w_z @ x + p.u_z @ h_prev + p.b_z)
    c = np.tanh(p.w_c @ x + p.u_c @ (r * h_prev) + p.b_c)
    h = (1.0 - z) * h_prev + z * c
    cache = {"x": x, "h_prev": h_prev, "r": r, "z": z, "c": c}
    return h, cache


def gru_step_backward(p: GruParams, cache: dict, dh: np.ndarray):
    x, h_prev = cache["x"], cache["h_prev"]
    r, z, c = cache["r"], cache["z"], cache["c"]
    g = zero_grads(p)

    dz = dh * (c - h_prev)
    dc = dh * z
    dh_prev = dh * (1.0 - z)

    da_c = dc * (1.0 - c * c)
    g["w_c"] += np.outer(da_c, x)
    g["u_c"] += np.outer(da_c, r * h_prev)
    g["b_c"] += da_c
    d_rh = p.u_c.T @ da_c
    dr = d_rh * h_prev
    dh_prev = dh_prev + d_rh * r

    da_r = dr * r * (1.0 - r)
    da_z = dz * z * (1.0 - z)
    g["w_r"] += np.outer(da_r, x)
    g["u_r"] += np.outer(da_r, h_prev)
    g["b_r"] += da_r
    g["w_z"] += np.outer(da_z, x)
    g["u_z"] += np.outer(da_z, h_prev)
    g["b_z"] += da_z
    dh_prev = dh_prev + p.u_r.T @ da_r + p.u_z.T @ da_z
    dx = p.w_c.T @ da_c + p.w_r.T @ da_r + p.w_z.T @ da_z
    return g, dh_prev, dx


# --- decay-mechanism cell ----------------------------------------------------

def grud_step(p: GrudParams, x: np.ndarray, m: np.ndarray, delta: np.ndarray,
              x_last: np.ndarray, h_prev: np.ndarray):
    """One step of the decay cell on possibly-missing input.

    `x_last` is the most recent observed value per variable before this step
    (the frozen training mean before any observation). Missing entries of `x`
    may be NaN; they are never read.
    """
    if p.x_mean is None:
        raise ShapeError("x_mean is unset on the decay cell parameters")
    h_dim, d = p.w_r.shape
    _check("x", x, (d,))
    _check("m", m, (d,))
    _check("delta", delta, (d,))
    _check("x_last", x_last, (d,))
    _check("h_prev", h_prev, (h_dim,))

    x_obs = np.where(m > 0.5, x, 0.0)  # sanitize sentinels before arithmetic
    pre_x = p.w_decay_x * delta + p.b_decay_x
    gamma_x = np.exp(-np.maximum(pre_x, 0.0))
    pre_h = p.w_decay_h @ delta + p.b_decay_h
    gamma_h = np.exp(-np.maximum(pre_h, 0.0))

    x_hat = m * x_obs + (1.0 - m) * (gamma_x * x_last + (1.0 - gamma_x) * p.x_mean)
    h_hat = gamma_h * h_prev

    r = sigmoid(p.w_r @ x_hat + p.u_r @ h_hat + p.v_r @ m + p.b_r)
    z = sigmoid(p.w_z @ x_hat + p.u_z @ h_hat + p.v_z @ m + p.b_z)
    c = np.tanh(p.w_c @ x_hat + p.u_c @ (r * h_hat) + p.v_c @ m + p.b_c)
    h = (1.0 - z) * h_hat + z * c
    cache = {"x_obs": x_obs, "m": m, "delta": delta, "x_last": x_last,
             "h_prev": h_prev, "pre_x": pre_x, "gamma_x": gamma_x,
             "pre_h": pre_h, "gamma_h": gamma_h, "x_hat": x_hat,
             "h_hat": h_hat, "r": r, "z": z, "c": c}
    return h, cache


def grud_step_backward(p: GrudParams, cache: dict, dh: np.ndarray):
    m, delta = cache["m"], cache["delta"]
    x_last, h_prev = cache["x_last"], cache["h_prev"]
    gamma_x, gamma_h = cache["gamma_x"], cache["gamma_h"]
    x_hat, h_hat = cache["x_hat"], cache["h_hat"]
    r, z, c = cache["r"], cache["z"], cache["c"]
    g = zero_grads(p)

    dz = dh * (c - h_hat)
    dc = dh * z
    dh_hat = dh * (1.0 - z)

    da_c = dc * (1.0 - c * c)
    g["w_c"] += np.outer(da_c, x_hat)
    g["u_c"] += np.outer(da_c, r * h_hat)
    g["v_c"] += np.outer(da_c, m)
    g["b_c"] += da_c
    d_rh = p.u_c.T @ da_c
    dr = d_rh * h_hat
    dh_hat = dh_hat + d_rh * r

    da_r = dr * r * (1.0 - r)
    da_z = dz * z * (1.0 - z)
    g["w_r"] += np.outer(da_r, x_hat)
    g["u_r"] += np.outer(da_r, h_hat)
    g["v_r"] += np.outer(da_r, m)
    g["b_r"] += da_r
    g["w_z"] += np.outer(da_z, x_hat)
    g["u_z"] += np.outer(da_z, h_hat)
    g["v_z"] += np.outer(da_z, m)
    g["b_z"] += da_z
    dh_hat = dh_hat + p.u_r.T @ da_r + p.u_z.T @ da_z
    dx_hat = p.w_c.T @ da_c + p.w_r.T @ da_r + p.w_z.T @ da_z

    # hidden decay path: h_hat = gamma_h * h_prev
    dgamma_h = dh_hat * h_prev
    dh_prev = dh_hat * gamma_h
    da_h = np.where(cache["pre_h"] > 0.0, -gamma_h * dgamma_h, 0.0)
    g["w_decay_h"] += np.outer(da_h, delta)
    g["b_decay_h"] += da_h

    # input decay path: x_hat mixes x_last and the frozen mean on missing slots
    dgamma_x = dx_hat * (1.0 - m) * (x_last - p.x_mean)
    da_x = np.where(cache["pre_x"] > 0.0, -gamma_x * dgamma_x, 0.0)
    g["w_decay_x"] += da_x * delta
    g["b_decay_x"] += da_x

    dx = dx_hat * m
    return g, dh_prev, dx


# --- LSTM baseline -----------------------------------------------------------

def lstm_step(p: LstmParams, x: np.ndarray, h_prev: np.ndarray,
              c_prev: np.ndarray):
    h_dim, d = p.w_f.shape
    _check("x", x, (d,))
    _check("h_prev", h_prev, (h_dim,))
    _check("c_prev", c_prev, (h_dim,))
    f = sigmoid(p.w_f @ x + p.u_f @ h_prev + p.b_f)
    i = sigmoid(p.w_i @ x + p.u_i @ h_prev + p.b_i)
    o = sigmoid(p.w_o @ x + p.u_o @ h_prev + p.b_o)
    gc = np.tanh(p.w_g @ x + p.u_g @ h_prev + p.b_g)
    c = f * c_prev + i * gc
    tc = np.tanh(c)
    h = o * tc
    cache = {"x": x, "h_prev": h_prev, "c_prev": c_prev, "f": f, "i": i,
             "o": o, "gc": gc, "c": c, "tc": tc}
    return h, c, cache


def lstm_step_backward(p: LstmParams, cache: dict, dh: np.ndarray,
                       dc_in: np.ndarray):
    x, h_prev, c_prev = cache["x"], cache["h_prev"], cache["c_prev"]
    f, i, o, gc, tc = cache["f"], cache["i"], cache["o"], cache["gc"], cache["tc"]
    g = zero_grads(p)

    do = dh * tc
    dc = dc_in + dh * o * (1.0 - tc * tc)
    df = dc * c_prev
    di = dc * gc
    dgc = dc * i
    dc_prev = dc * f

    da = {
        "f": df * f * (1.0 - f),
        "i": di * i * (1.0 - i),
        "o": do * o * (1.0 - o),
        "g": dgc * (1.0 - gc * gc),
    }
    dh_prev = np.zeros_like(h_prev)
    dx = np.zeros_like(x)
    for gate, d_pre in da.items():
        g[f"w_{gate}"] += np.outer(d_pre, x)
        g[f"u_{gate}"] += np.outer(d_pre, h_prev)
        g[f"b_{gate}"] += d_pre
        dh_prev += getattr(p, f"u_{gate}").T @ d_pre
        dx += getattr(p, f"w_{gate}").T @ d_pre
    return g, dh_prev, dc_prev, dx


# --- dense layer (feed-forward baseline) -------------------------------------

def dense_step(p: DenseParams, x: np.ndarray):
    if p.w.shape[1] != x.shape[0]:
        raise ShapeError(f"dense: weights {p.w.shape} vs input {x.shape}")
    a = p.w @ x + p.b
    y = np.tanh(a) if p.activation == "tanh" else a
    return y, {"x": x, "y": y}


def dense_step_backward(p: DenseParams, cache: dict, dy: np.ndarray):
    x, y = cache["x"], cache["y"]
    da = dy * (1.0 - y * y) if p.activation == "tanh" else dy
    g = {"w": np.outer(da, x), "b": da.copy()}
    dx = p.w.T @ da
    return g, dx


def step_backward(kind: str, params, cache: dict, dh: np.ndarray,
                  dc: np.ndarray | None = None):
    """Dispatch to the matching backward kernel for `kind`."""
    if kind == "gru":
        return gru_step_backward(params, cache, dh)
    if kind == "gru-d":
        return grud_step_backward(params, cache, dh)
    if kind == "lstm":
        return lstm_step_backward(params, cache, dh, dc)
    if kind == "dense":
        return dense_step_backward(params, cache, dh)
    raise ShapeError(f"unknown cell kind: {kind}")


# --- initialization -----------------------------------------------------------

def _weight(rng, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols)) / np.sqrt(cols)


def init_gru(d: int, h: int, rng) -> GruParams:
    return GruParams(
        w_r=_weight(rng, h, d), u_r=_weight(rng, h, h), b_r=np.zeros(h),
        w_z=_weight(rng, h, d), u_z=_weight(rng, h, h), b_z=np.zeros(h),
        w_c=_weight(rng, h, d), u_c=_weight(rng, h, h), b_c=np.zeros(h),
    )


# Zero-initialized decay weights would sit exactly on the rectifier kink,
# where the subgradient is 0, leaving the decay mechanism untrainable. A small
# positive weight keeps the rectifier active so the decay rates can learn.
DECAY_WEIGHT_INIT = 0.1


def init_grud(d: int, h: int, rng, x_mean: np.ndarray | None = None) -> GrudParams:
    base = init_gru(d, h, rng)
    return GrudParams(
        **base.tensors(),
        # mask weights start at zero: the cell begins as a plain gated cell on
        # the decayed input and learns how much the mask channels matter
        v_r=np.zeros((h, d)), v_z=np.zeros((h, d)), v_c=np.zeros((h, d)),
        w_decay_x=np.full(d, DECAY_WEIGHT_INIT),
        b_decay_x=np.zeros(d),
        w_decay_h=np.full((h, d), DECAY_WEIGHT_INIT),
        b_decay_h=np.zeros(h),
        x_mean=None if x_mean is None else np.asarray(x_mean, dtype=np.float64),
    )


def init_lstm(d: int, h: int, rng) -> LstmParams:
    return LstmParams(
        w_f=_weight(rng, h, d), u_f=_weight(rng, h, h), b_f=np.zeros(h),
        w_i=_weight(rng, h, d), u_i=_weight(rng, h, h), b_i=np.zeros(h),
        w_o=_weight(rng, h, d), u_o=_weight(rng, h, h), b_o=np.zeros(h),
        w_g=_weight(rng, h, d), u_g=_weight(rng, h, h), b_g=np.zeros(h),
    )


def init_dense(d_in: int, d_out: int, rng, activation: str = "tanh") -> DenseParams:
    return DenseParams(w=_weight(rng, d_out, d_in), b=np.zeros(d_out),
                       activation=activation)


def init_params(kind: str, d: int, h: int, rng):
    if kind == "gru":
        return init_gru(d, h, rng)
    if kind == "gru-d":
        return init_grud(d, h, rng)
    if kind == "lstm":
        return init_lstm(d, h, rng)
    if kind == "dense":
        return init_dense(d, h, rng)
    raise ShapeError(f"unknown cell kind: {kind}")
