"""Adam optimization, the early-stopping training loop, and evaluation.

Updates are per-sample (stochastic). Each epoch reshuffles the training set
from a seed derived deterministically from the master seed, so a fixed seed
reproduces the whole run bit for bit. The best-validation parameters are
restored when early stopping fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import missingness, network
from .errors import ConfigError, DataError, DivergenceError
from .linalg import new_rng
from .metrics import EvalReport, compute_metrics
from .timeseries import DatasetSplit, TimeSeriesSample

IMPUTATIONS = {
    "average": missingness.impute_average,
    "last": missingness.impute_last,
    "simple": missingness.impute_simple,
}


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "beta1", "beta2", "eps_adam",
                     "max_epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.patience >= self.max_epochs:
            raise ConfigError("patience must be smaller than max_epochs")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_model(cls, model: network.Model) -> "AdamState":
        tensors = model.named_tensors()
        return cls(m={n: np.zeros_like(a) for n, a in tensors.items()},
                   v={n: np.zeros_like(a) for n, a in tensors.items()})


@dataclass
class TrainReport:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    epochs_run: int = 0
    best_epoch: int = 0

    def csv_rows(self) -> list[tuple[int, float, float]]:
        return [(e + 1, tl, vl) for e, (tl, vl)
                in enumerate(zip(self.train_losses, self.val_losses))]


def adam_step(tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, config: TrainConfig) -> None:
    """Standard bias-corrected Adam update, applied in place."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, tensor in tensors.items():
        g = grads[name]
        if g.shape != tensor.shape:
            raise ConfigError(f"gradient shape mismatch on {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        tensor -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2)
                                                      + config.eps_adam)


def _prepare_inputs(samples: list[TimeSeriesSample], variant: str,
                    imputation: str | None,
                    stats: missingness.TrainStats) -> list[TimeSeriesSample]:
    """Impute for non-decay models; the decay model consumes samples raw."""
    if variant == "gru-d":
        return samples
    if all(s.fully_observed for s in samples):
        return samples
    if imputation is None:
        raise ConfigError(
            f"{variant} model requires an imputation choice on missing data"
        )
    if imputation not in IMPUTATIONS:
        raise ConfigError(f"unknown imputation {imputation!r}; "
                          f"one of {sorted(IMPUTATIONS)}")
    impute = IMPUTATIONS[imputation]
    out = []
    for s in samples:
        filled = impute(s.view(), stats)
        out.append(replace(s, x=filled, m=np.ones_like(s.m),
                           delta=missingness.compute_intervals(
                               s.s, np.ones_like(s.m))))
    return out


def _mean_loss(model: network.Model, samples: list[TimeSeriesSample]) -> float:
    total = 0.0
    for s in samples:
        y_hat, _ = network.forward(model, s)
        total += network.loss_mse(y_hat, s.y)
    return total / len(samples)


def train(model: network.Model, splits: DatasetSplit,
          imputation: str | None, config: TrainConfig):
    """Optimize until validation loss stalls; returns (best model, report)."""
    if not splits.train or not splits.validation:
        raise DataError("train and validation sets must be non-empty")

    stats = missingness.empirical_mean([s.view() for s in splits.train])
    network.set_train_stats(model, stats)
    variant = model.spec.variant
    train_set = _prepare_inputs(splits.train, variant, imputation, stats)
    val_set = _prepare_inputs(splits.validation, variant, imputation, stats)

    state = AdamState.for_model(model)
    report = TrainReport()
    best_val = math.inf
    best_tensors = None
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = new_rng(config.seed * 1_000_003 + epoch).permutation(len(train_set))
        epoch_loss = 0.0
        for i in order:
            sample = train_set[i]
            y_hat, trace = network.forward(model, sample)
            loss = network.loss_mse(y_hat, sample.y)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            epoch_loss += loss
            grads = network.backward(model, trace, sample.y)
            adam_step(model.named_tensors(), grads, state, config)
        val_loss = _mean_loss(model, val_set)
        if not math.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        report.train_losses.append(epoch_loss / len(train_set))
        report.val_losses.append(val_loss)
        report.epochs_run = epoch
        if val_loss < best_val:
            best_val = val_loss
            report.best_epoch = epoch
            best_tensors = {n: t.copy() for n, t in model.named_tensors().items()}
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    for name, tensor in model.named_tensors().items():
        tensor[...] = best_tensors[name]
    return model, report


def evaluate(model: network.Model, test_set: list[TimeSeriesSample],
             imputation: str | None) -> EvalReport:
    """Metrics over a held-out set, using the model's frozen training stats."""
    if not test_set:
        raise DataError("test set must be non-empty")
    if model.train_stats is None:
        raise ConfigError("model has no training statistics; train it first")
    prepared = _prepare_inputs(test_set, model.spec.variant, imputation,
                               model.train_stats)
    y_true = [s.y for s in prepared]
    y_pred = [network.forward(model, s)[0] for s in prepared]
    return compute_metrics(y_true, y_pred)
