"""Time-aware recurrent forecasting for friction-like daily series.

Gated recurrent cells with and without a learned decay mechanism for missing
data, manual backpropagation through time, baseline imputers, and a
reproducible experiment harness.
"""

from .errors import (ConfigError, DataError, DivergenceError,
                     FrictionCastError, ShapeError, UnimputedValueError)
from .metrics import EvalReport, compute_metrics
from .missingness import (MaskedView, TrainStats, compute_intervals,
                          compute_mask, empirical_mean, impute_average,
                          impute_last, impute_simple)
from .network import (Model, ModelSpec, backward, build_model, forward,
                      gradient_check, load_model, loss_mse, save_model)
from .timeseries import (DatasetSplit, SegmentSeries, SynthConfig,
                         TimeSeriesSample, ingest_csv, inject_missing, split,
                         synthesize, window)
from .training import TrainConfig, TrainReport, adam_step, evaluate, train

__all__ = [
    "ConfigError", "DataError", "DivergenceError", "FrictionCastError",
    "ShapeError", "UnimputedValueError",
    "EvalReport", "compute_metrics",
    "MaskedView", "TrainStats", "compute_intervals", "compute_mask",
    "empirical_mean", "impute_average", "impute_last", "impute_simple",
    "Model", "ModelSpec", "backward", "build_model", "forward",
    "gradient_check", "load_model", "loss_mse", "save_model",
    "DatasetSplit", "SegmentSeries", "SynthConfig", "TimeSeriesSample",
    "ingest_csv", "inject_missing", "split", "synthesize", "window",
    "TrainConfig", "TrainReport", "adam_step", "evaluate", "train",
]

__version__ = "0.1.0"
