"""Sequence models with a scalar regression head, exact BPTT, persistence.

A model is a stack of cells (depth-1 by default) plus a linear readout on the
final hidden state. The decay variant consumes the raw mask/interval channels
of a sample; every other variant requires fully observed (or pre-imputed)
input. `backward` returns exact gradients of the squared-error loss, and
`gradient_check` compares them against central finite differences.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import cells
from .errors import ConfigError, ShapeError, UnimputedValueError
from .missingness import TrainStats
from .timeseries import TimeSeriesSample

VARIANTS = ("gru", "gru-d", "lstm", "ffnn")

MODEL_FORMAT = "frictioncast-model"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    variant: str
    input_dim: int = 1
    hidden_size: int = 16
    recurrent_depth: int = 1
    ffnn_hidden_layers: int = 2
    window_len: int = 7  # T; only the feed-forward variant needs it up front

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; one of {VARIANTS}")
        if self.input_dim < 1 or self.hidden_size < 1:
            raise ConfigError("input_dim and hidden_size must be >= 1")
        if self.recurrent_depth < 1 or self.ffnn_hidden_layers < 1:
            raise ConfigError("layer counts must be >= 1")


@dataclass
class Model:
    spec: ModelSpec
    layers: list            # cell params per layer
    head_w: np.ndarray      # [H]
    head_b: np.ndarray      # [1]
    train_stats: TrainStats | None = None

    def named_tensors(self) -> dict[str, np.ndarray]:
        """Trainable tensors keyed by a stable dotted path (views, mutable)."""
        out = {}
        for i, layer in enumerate(self.layers):
            for name, t in layer.tensors().items():
                out[f"layers.{i}.{name}"] = t
        out["head.w"] = self.head_w
        out["head.b"] = self.head_b
        return out

    def clone(self) -> "Model":
        return copy.deepcopy(self)


def build_model(spec: ModelSpec, rng,
                x_mean: np.ndarray | None = None) -> Model:
    """Initialize a model; weights N(0, 1/fan_in), biases zero, decay weights
    at the small positive constant that keeps the rectifier trainable."""
    d, h = spec.input_dim, spec.hidden_size
    layers = []
    if spec.variant == "ffnn":
        d_in = spec.window_len * d
        for _ in range(spec.ffnn_hidden_layers):
            layers.append(cells.init_dense(d_in, h, rng))
            d_in = h
    elif spec.variant == "gru-d":
        layers.append(cells.init_grud(d, h, rng, x_mean=x_mean))
        for _ in range(spec.recurrent_depth - 1):
            layers.append(cells.init_gru(h, h, rng))
    else:
        init = cells.init_gru if spec.variant == "gru" else cells.init_lstm
        d_in = d
        for _ in range(spec.recurrent_depth):
            layers.append(init(d_in, h, rng))
            d_in = h
    head_w = rng.standard_normal(h) / np.sqrt(h)
    return Model(spec=spec, layers=layers, head_w=head_w, head_b=np.zeros(1))


def set_train_stats(model: Model, stats: TrainStats) -> None:
    """Attach frozen training statistics; feeds the decay cell's mean."""
    model.train_stats = stats
    if model.spec.variant == "gru-d":
        model.layers[0].x_mean = stats.mean.copy()


def _layer_kind(spec: ModelSpec, layer_idx: int) -> str:
    if spec.variant == "ffnn":
        return "dense"
    if spec.variant == "gru-d":
        return "gru-d" if layer_idx == 0 else "gru"
    return spec.variant


def forward(model: Model, sample: TimeSeriesSample):
    """Unroll the model over one window; returns (prediction, trace)."""
    spec = model.spec
    t_len = sample.x.shape[0]
    if sample.x.shape[1] != spec.input_dim:
        raise ShapeError(
            f"sample has {sample.x.shape[1]} variables, model expects {spec.input_dim}"
        )
    if spec.variant != "gru-d" and np.any(np.isnan(sample.x)):
        raise UnimputedValueError(
            f"unimputed missing value reaching a {spec.variant} model"
        )

    trace = {"caches": [], "h_final": None}
    if spec.variant == "ffnn":
        v = sample.x.reshape(-1)
        if v.shape[0] != model.layers[0].w.shape[1]:
            raise ShapeError(
                f"window length {t_len} does not match the configured "
                f"feed-forward input size"
            )
        layer_caches = []
        for layer in model.layers:
            v, cache = cells.dense_step(layer, v)
            layer_caches.append(cache)
        trace["caches"] = layer_caches
        h_final = v
    else:
        h_dim = spec.hidden_size
        h_states = [np.zeros(h_dim) for _ in model.layers]
        c_states = [np.zeros(h_dim) for _ in model.layers]
        x_last = None
        if spec.variant == "gru-d":
            x_last = model.layers[0].x_mean.copy()
        caches = [[] for _ in model.layers]
        for t in range(t_len):
            inp = sample.x[t]
            for li, layer in enumerate(model.layers):
                kind = _layer_kind(spec, li)
                if kind == "gru":
                    h_states[li], cache = cells.gru_step(layer, inp, h_states[li])
                elif kind == "gru-d":
                    h_states[li], cache = cells.grud_step(
                        layer, inp, sample.m[t], sample.delta[t], x_last,
                        h_states[li])
                    obs = sample.m[t] > 0.5
                    x_last = np.where(obs, sample.x[t], x_last)
                else:  # lstm
                    h_states[li], c_states[li], cache = cells.lstm_step(
                        layer, inp, h_states[li], c_states[li])
                caches[li].append(cache)
                inp = h_states[li]
        trace["caches"] = caches
        h_final = h_states[-1]

    trace["h_final"] = h_final
    y_hat = float(model.head_w @ h_final + model.head_b[0])
    trace["y_hat"] = y_hat
    return y_hat, trace


def loss_mse(y_hat: float, y: float) -> float:
    return (y_hat - y) ** 2


def backward(model: Model, trace: dict, y: float) -> cells.Grads:
    """Exact gradient of (y_hat - y)^2 w.r.t. every trainable tensor."""
    spec = model.spec
    grads = {name: np.zeros_like(t) for name, t in model.named_tensors().items()}
    dy = 2.0 * (trace["y_hat"] - y)
    grads["head.w"] += dy * trace["h_final"]
    grads["head.b"] += np.array([dy])
    dh_final = dy * model.head_w

    if spec.variant == "ffnn":
        dv = dh_final
        for li in range(len(model.layers) - 1, -1, -1):
            g, dv = cells.dense_step_backward(model.layers[li],
                                              trace["caches"][li], dv)
            for name, val in g.items():
                grads[f"layers.{li}.{name}"] += val
        return grads

    n_layers = len(model.layers)
    t_len = len(trace["caches"][0])
    dh = [np.zeros(spec.hidden_size) for _ in range(n_layers)]
    dc = [np.zeros(spec.hidden_size) for _ in range(n_layers)]
    dh[-1] = dh_final.copy()
    for t in range(t_len - 1, -1, -1):
        dx_above = None
        for li in range(n_layers - 1, -1, -1):
            kind = _layer_kind(spec, li)
            d_out = dh[li] + (dx_above if dx_above is not None else 0.0)
            cache = trace["caches"][li][t]
            if kind == "lstm":
                g, dh_prev, dc_prev, dx = cells.lstm_step_backward(
                    model.layers[li], cache, d_out, dc[li])
                dc[li] = dc_prev
            elif kind == "gru-d":
                g, dh_prev, dx = cells.grud_step_backward(
                    model.layers[li], cache, d_out)
            else:
                g, dh_prev, dx = cells.gru_step_backward(
                    model.layers[li], cache, d_out)
            for name, val in g.items():
                grads[f"layers.{li}.{name}"] += val
            dh[li] = dh_prev
            dx_above = dx
    return grads


def _kink_excluded(model: Model, trace: dict, eps: float) -> set[str]:
    """Decay-tensor elements whose rectifier sits too close to its kink.

    Finite differences straddle the kink there, so the comparison is
    meaningless; excluded elements are identified by "name[i]" / "name[i,j]".
    """
    excluded = set()
    if model.spec.variant != "gru-d":
        return excluded
    caches = trace["caches"][0]
    d = model.spec.input_dim
    h = model.spec.hidden_size
    max_delta = max(float(np.max(c["delta"])) for c in caches) if caches else 0.0
    tol = 10.0 * eps * (1.0 + max_delta)
    near_x = np.zeros(d, dtype=bool)
    near_h = np.zeros(h, dtype=bool)
    for c in caches:
        near_x |= np.abs(c["pre_x"]) < tol
        near_h |= np.abs(c["pre_h"]) < tol
    for i in np.nonzero(near_x)[0]:
        excluded.add(f"layers.0.w_decay_x[{i}]")
        excluded.add(f"layers.0.b_decay_x[{i}]")
    for i in np.nonzero(near_h)[0]:
        for j in range(d):
            excluded.add(f"layers.0.w_decay_h[{i},{j}]")
        excluded.add(f"layers.0.b_decay_h[{i}]")
    return excluded


def gradient_check(model: Model, sample: TimeSeriesSample,
                   eps: float = 1e-5) -> float:
    """Worst relative error of analytic gradients vs central differences."""
    if eps <= 0:
        raise ConfigError("eps must be > 0")
    y = sample.y
    y_hat, trace = forward(model, sample)
    analytic = backward(model, trace, y)
    excluded = _kink_excluded(model, trace, eps)

    # Central differences carry cancellation noise of roughly
    # macheps * |loss| / (2 * eps) in absolute terms, so components whose
    # magnitude sits within 1e5x of that floor cannot be certified to a
    # relative accuracy of 1e-5 no matter how exact the analytic gradient
    # is.  Skip them; the remaining components dominate the gradient and
    # would expose any systematic error in the backward pass.
    base_loss = loss_mse(y_hat, y)
    fd_floor = 1e5 * np.finfo(float).eps * (1.0 + abs(base_loss)) / (2.0 * eps)

    worst = 0.0
    for name, tensor in model.named_tensors().items():
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            key = f"{name}[{','.join(str(i) for i in idx)}]"
            if key in excluded:
                continue
            orig = tensor[idx]
            tensor[idx] = orig + eps
            lp = loss_mse(forward(model, sample)[0], y)
            tensor[idx] = orig - eps
            lm = loss_mse(forward(model, sample)[0], y)
            tensor[idx] = orig
            numeric = (lp - lm) / (2.0 * eps)
            a = analytic[name][idx]
            if max(abs(a), abs(numeric)) < fd_floor:
                continue
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst


# --- persistence --------------------------------------------------------------

def _tensor_doc(t: np.ndarray) -> dict:
    return {"shape": list(t.shape), "data": t.reshape(-1).tolist()}


def _tensor_from_doc(doc: dict) -> np.ndarray:
    return np.array(doc["data"], dtype=np.float64).reshape(doc["shape"])


def save_model(model: Model, path) -> None:
    """Versioned JSON document; float64 round-trip is exact (repr formatting)."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "spec": asdict(model.spec),
        "tensors": {n: _tensor_doc(t) for n, t in model.named_tensors().items()},
    }
    if model.spec.variant == "gru-d" and model.layers[0].x_mean is not None:
        doc["x_mean"] = _tensor_doc(model.layers[0].x_mean)
    if model.train_stats is not None:
        doc["train_stats"] = {
            "mean": _tensor_doc(model.train_stats.mean),
            "max_interval": _tensor_doc(model.train_stats.max_interval),
        }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError(f"{path}: not a model document")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported model format version")
    spec = ModelSpec(**doc["spec"])
    from .linalg import new_rng
    model = build_model(spec, new_rng(0))
    for name, tensor in model.named_tensors().items():
        tensor[...] = _tensor_from_doc(doc["tensors"][name])
    if "x_mean" in doc:
        model.layers[0].x_mean = _tensor_from_doc(doc["x_mean"])
    if "train_stats" in doc:
        model.train_stats = TrainStats(
            mean=_tensor_from_doc(doc["train_stats"]["mean"]),
            max_interval=_tensor_from_doc(doc["train_stats"]["max_interval"]),
        )
    return model
