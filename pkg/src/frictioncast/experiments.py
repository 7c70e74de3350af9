"""Experiment harness: benchmark grid, missing-rate sweep, curve exports.

Every grid cell (model, imputation, missing rate, seed) is an independent
job whose sub-seeds (series, split, masks, parameters, shuffling) are all
derived from the master seed with `SeedSequence`, so any row is reproducible
from the configuration alone. Rows are sorted before writing, which keeps
output files byte-identical across reruns and across worker counts.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import network, timeseries, training
from .errors import ConfigError, DataError
from .linalg import new_rng
from .training import TrainConfig, TrainReport

RESULT_COLUMNS = ["model", "imputation", "missing_rate", "seed",
                  "mae", "mse", "mape_percent", "epochs_run", "best_epoch"]
AGG_COLUMNS = ["model", "imputation", "missing_rate", "n_seeds",
               "mae_mean", "mae_se", "mse_mean", "mse_se",
               "mape_mean", "mape_se"]


@dataclass(frozen=True)
class ModelEntry:
    variant: str
    imputation: str | None = None

    @property
    def label(self) -> str:
        return self.variant if self.imputation is None \
            else f"{self.variant}+{self.imputation}"


@dataclass(frozen=True)
class ExperimentConfig:
    synth: timeseries.SynthConfig | None = None
    csv_path: str | None = None
    window_len: int = 7
    models: tuple[ModelEntry, ...] = (
        ModelEntry("gru-d"),
        ModelEntry("gru", "average"),
        ModelEntry("gru", "last"),
        ModelEntry("gru", "simple"),
    )
    missing_rates: tuple[float, ...] = (0.8,)
    n_seeds: int = 3
    hidden_size: int = 16
    recurrent_depth: int = 1
    ffnn_hidden_layers: int = 2
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def __post_init__(self):
        if self.window_len < 1:
            raise ConfigError("window_len must be >= 1")
        if not self.models:
            raise ConfigError("at least one model entry is required")
        if any(not 0.0 <= r < 1.0 for r in self.missing_rates):
            raise ConfigError("missing rates must lie in [0, 1)")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if self.synth is None and self.csv_path is None:
            object.__setattr__(self, "synth", timeseries.SynthConfig())


def config_from_json(doc: dict, seed: int | None = None) -> ExperimentConfig:
    """Build a config from a parsed JSON document (CLI `--config` payload)."""
    kwargs = {}
    data = doc.get("data", {})
    if "csv" in data:
        kwargs["csv_path"] = data["csv"]
    if "synth" in data:
        kwargs["synth"] = timeseries.SynthConfig(**data["synth"])
    if "T" in doc:
        kwargs["window_len"] = int(doc["T"])
    if "models" in doc:
        kwargs["models"] = tuple(
            ModelEntry(m["variant"], m.get("imputation")) for m in doc["models"]
        )
    if "missing_rates" in doc:
        kwargs["missing_rates"] = tuple(float(r) for r in doc["missing_rates"])
    for key in ("n_seeds", "hidden_size", "recurrent_depth",
                "ffnn_hidden_layers"):
        if key in doc:
            kwargs[key] = int(doc[key])
    if "train" in doc:
        kwargs["train"] = TrainConfig(**doc["train"])
    if seed is not None:
        kwargs["seed"] = seed
    elif "seed" in doc:
        kwargs["seed"] = int(doc["seed"])
    return ExperimentConfig(**kwargs)


def config_to_json(config: ExperimentConfig) -> dict:
    doc = dataclasses.asdict(config)
    doc["models"] = [{"variant": m.variant, "imputation": m.imputation}
                     for m in config.models]
    return doc


@dataclass(frozen=True)
class ResultRow:
    model: str
    imputation: str
    missing_rate: float
    seed: int
    mae: float
    mse: float
    mape_percent: float
    epochs_run: int
    best_epoch: int

    def sort_key(self):
        return (self.model, self.imputation, self.missing_rate, self.seed)


@dataclass
class ResultsTable:
    rows: list[ResultRow]

    def aggregates(self) -> list[dict]:
        """Mean and standard error per (model, imputation, rate) group."""
        groups: dict[tuple, list[ResultRow]] = {}
        for r in self.rows:
            groups.setdefault((r.model, r.imputation, r.missing_rate), []).append(r)
        out = []
        for (model, imputation, rate), rows in sorted(groups.items()):
            n = len(rows)
            agg = {"model": model, "imputation": imputation,
                   "missing_rate": rate, "n_seeds": n}
            for col, attr in (("mae", "mae"), ("mse", "mse"),
                              ("mape", "mape_percent")):
                vals = np.array([getattr(r, attr) for r in rows])
                agg[f"{col}_mean"] = float(np.mean(vals))
                agg[f"{col}_se"] = (float(np.std(vals, ddof=1) / math.sqrt(n))
                                    if n > 1 else 0.0)
            out.append(agg)
        return out


def _seed_for(master: int, *tags: int) -> int:
    """Stable 64-bit sub-seed derived from the master seed and integer tags."""
    ss = np.random.SeedSequence(entropy=[master, *tags])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# tag namespaces for sub-seed derivation
_TAG_SERIES, _TAG_SPLIT, _TAG_MASK, _TAG_PARAMS, _TAG_TRAIN = range(5)


@dataclass(frozen=True)
class _Job:
    entry: ModelEntry
    rate: float
    seed: int
    config: ExperimentConfig


def _series_for(config: ExperimentConfig, seed: int) -> list[timeseries.SegmentSeries]:
    if config.csv_path is not None:
        return list(timeseries.ingest_csv(config.csv_path).values())
    synth = dataclasses.replace(config.synth,
                                seed=_seed_for(config.seed, _TAG_SERIES, seed))
    return [timeseries.synthesize(synth)]


def _model_spec(config: ExperimentConfig, entry: ModelEntry) -> network.ModelSpec:
    depth = config.recurrent_depth
    if entry.variant == "lstm":
        depth = max(depth, 2)  # baseline runs with two recurrent layers
    return network.ModelSpec(
        variant=entry.variant, input_dim=1, hidden_size=config.hidden_size,
        recurrent_depth=depth, ffnn_hidden_layers=config.ffnn_hidden_layers,
        window_len=config.window_len,
    )


def run_single(config: ExperimentConfig, entry: ModelEntry, rate: float,
               seed: int) -> tuple[ResultRow, TrainReport, network.Model]:
    """One grid cell: build data, train, evaluate. Fully seed-determined."""
    master = config.seed
    reports = []
    metrics_rows = []
    model = None
    for seg_idx, series in enumerate(_series_for(config, seed)):
        samples = timeseries.window(series, config.window_len)
        splits = timeseries.split(
            samples, _seed_for(master, _TAG_SPLIT, seed, seg_idx))
        if rate > 0.0:
            def mask(split_samples, which):
                return [timeseries.inject_missing(
                            s, rate,
                            _seed_for(master, _TAG_MASK, seed, seg_idx, which, i))
                        for i, s in enumerate(split_samples)]
            splits = timeseries.DatasetSplit(
                train=mask(splits.train, 0),
                validation=mask(splits.validation, 1),
                test=mask(splits.test, 2),
            )
        spec = _model_spec(config, entry)
        model = network.build_model(
            spec, new_rng(_seed_for(master, _TAG_PARAMS, seed, seg_idx)))
        train_cfg = dataclasses.replace(
            config.train, seed=_seed_for(master, _TAG_TRAIN, seed, seg_idx))
        model, report = training.train(model, splits, entry.imputation, train_cfg)
        ev = training.evaluate(model, splits.test, entry.imputation)
        reports.append(report)
        metrics_rows.append((ev.mae, ev.mse, ev.mape_percent))
    mae, mse, mape = (float(np.mean([m[i] for m in metrics_rows]))
                      for i in range(3))
    row = ResultRow(
        model=entry.variant, imputation=entry.imputation or "none",
        missing_rate=rate, seed=seed, mae=mae, mse=mse, mape_percent=mape,
        epochs_run=max(r.epochs_run for r in reports),
        best_epoch=max(r.best_epoch for r in reports),
    )
    return row, reports[-1], model


def _run_job(job: _Job) -> ResultRow:
    return run_single(job.config, job.entry, job.rate, job.seed)[0]


def run_benchmark(config: ExperimentConfig, threads: int = 1) -> ResultsTable:
    """Full (model x imputation x rate x seed) grid."""
    jobs = [_Job(entry, rate, seed, config)
            for entry in config.models
            for rate in config.missing_rates
            for seed in range(config.n_seeds)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_job, jobs))
    else:
        rows = [_run_job(j) for j in jobs]
    rows.sort(key=ResultRow.sort_key)
    return ResultsTable(rows=rows)


def sweep_missing_rates(config: ExperimentConfig, threads: int = 1) -> ResultsTable:
    """Benchmark across the configured missing rates; decay model required."""
    if not any(m.variant == "gru-d" for m in config.models):
        raise ConfigError("the missing-rate sweep requires a gru-d model entry")
    return run_benchmark(config, threads=threads)


def export_decay_curve(model: network.Model, delta_max: float,
                       step: float = 0.5) -> list[tuple[float, float]]:
    """Learned input-decay rate as (interval, rate) pairs, one variable."""
    if model.spec.variant != "gru-d":
        raise ConfigError("decay curves exist only for the gru-d variant")
    if delta_max <= 0 or step <= 0:
        raise ConfigError("delta_max and step must be positive")
    p = model.layers[0]
    out = []
    n = int(math.floor(delta_max / step + 1e-9)) + 1
    for k in range(n):
        d = k * step
        gamma = float(np.exp(-max(0.0, p.w_decay_x[0] * d + p.b_decay_x[0])))
        out.append((d, gamma))
    return out


# --- file outputs -------------------------------------------------------------

def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_results_csv(table: ResultsTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(RESULT_COLUMNS)
        for r in table.rows:
            w.writerow([r.model, r.imputation, _fmt(r.missing_rate), r.seed,
                        _fmt(r.mae), _fmt(r.mse), _fmt(r.mape_percent),
                        r.epochs_run, r.best_epoch])


def write_aggregates_csv(table: ResultsTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(AGG_COLUMNS)
        for a in table.aggregates():
            w.writerow([a["model"], a["imputation"], _fmt(a["missing_rate"]),
                        a["n_seeds"],
                        _fmt(a["mae_mean"]), _fmt(a["mae_se"]),
                        _fmt(a["mse_mean"]), _fmt(a["mse_se"]),
                        _fmt(a["mape_mean"]), _fmt(a["mape_se"])])


def export_loss_curves(reports: list[tuple[str, TrainReport]], path) -> None:
    """Long-format `label,epoch,train_loss,val_loss` CSV."""
    if not reports:
        raise DataError("no training reports to export")
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["label", "epoch", "train_loss", "val_loss"])
        for label, report in reports:
            for epoch, tl, vl in report.csv_rows():
                w.writerow([label, epoch, _fmt(tl), _fmt(vl)])


def write_decay_curve_csv(curve: list[tuple[float, float]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["delta", "gamma_x"])
        for d, gamma in curve:
            w.writerow([_fmt(d), _fmt(gamma)])


def write_manifest(config: ExperimentConfig, path, command: str,
                   extra: dict | None = None) -> None:
    doc = {"command": command, "config": config_to_json(config)}
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def write_series_csv(series_list: list[timeseries.SegmentSeries], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(timeseries.CSV_HEADER)
        for series in series_list:
            for day, val in zip(series.timestamps, series.values):
                w.writerow([series.segment_id, _fmt(float(day)), _fmt(float(val))])
