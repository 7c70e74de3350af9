"""Command-line entry point for the experiment harness.

Subcommands: synth, train, benchmark, sweep, decay-curve, gradcheck.
All outputs land in the --out directory; a run_manifest.json capturing the
resolved configuration is written beside them.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments, network, timeseries
from .errors import FrictionCastError
from .linalg import new_rng


def _load_config(args) -> experiments.ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            doc = json.load(f)
    return experiments.config_from_json(doc, seed=args.seed)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--threads", type=int, default=1, help="parallel jobs")


def cmd_synth(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    series = []
    base = config.synth or timeseries.SynthConfig()
    for i in range(config.n_seeds):
        import dataclasses
        series.append(timeseries.synthesize(
            dataclasses.replace(base, seed=base.seed + i)))
    path = out / "synthetic.csv"
    experiments.write_series_csv(series, path)
    experiments.write_manifest(config, out / "run_manifest.json", "synth")
    print(f"wrote {path} ({sum(len(s.values) for s in series)} rows)")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    entry = config.models[0]
    rate = config.missing_rates[0]
    row, report, model = experiments.run_single(config, entry, rate, seed=0)
    experiments.write_results_csv(experiments.ResultsTable([row]),
                                  out / "results.csv")
    experiments.export_loss_curves([(entry.label, report)],
                                   out / "loss_curves.csv")
    network.save_model(model, out / "model.json")
    experiments.write_manifest(config, out / "run_manifest.json", "train")
    print(f"{entry.label} rate={rate}: mae={row.mae:.4f} mse={row.mse:.5f} "
          f"mape={row.mape_percent:.2f}% (best epoch {row.best_epoch})")
    return 0


def cmd_benchmark(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    table = experiments.run_benchmark(config, threads=args.threads)
    experiments.write_results_csv(table, out / "results.csv")
    experiments.write_aggregates_csv(table, out / "aggregates.csv")
    experiments.write_manifest(config, out / "run_manifest.json", "benchmark")
    for agg in table.aggregates():
        label = agg["model"] if agg["imputation"] == "none" \
            else f"{agg['model']}+{agg['imputation']}"
        print(f"{label} rate={agg['missing_rate']}: "
              f"mae={agg['mae_mean']:.4f}±{agg['mae_se']:.4f} "
              f"mape={agg['mape_mean']:.2f}%")
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    table = experiments.sweep_missing_rates(config, threads=args.threads)
    experiments.write_results_csv(table, out / "results.csv")
    experiments.write_aggregates_csv(table, out / "sweep_aggregates.csv")
    experiments.write_manifest(config, out / "run_manifest.json", "sweep")
    print(f"swept rates {list(config.missing_rates)} over "
          f"{config.n_seeds} seeds -> {out / 'sweep_aggregates.csv'}")
    return 0


def cmd_decay_curve(args) -> int:
    model = network.load_model(args.model)
    out = _out_dir(args)
    curve = experiments.export_decay_curve(model, delta_max=args.delta_max)
    path = out / "decay_curve.csv"
    experiments.write_decay_curve_csv(curve, path)
    print(f"wrote {path} ({len(curve)} points)")
    return 0


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else 0
    rng = new_rng(seed)
    worst = {}
    for variant in network.VARIANTS:
        spec = network.ModelSpec(variant=variant, input_dim=1, hidden_size=4,
                                 recurrent_depth=2 if variant == "lstm" else 1,
                                 window_len=7)
        errs = []
        for _ in range(args.draws):
            model = network.build_model(spec, rng)
            if variant == "gru-d":
                model.layers[0].x_mean = rng.random(1)
                model.layers[0].w_decay_x[...] = rng.standard_normal(1) * 0.5
                model.layers[0].b_decay_x[...] = rng.standard_normal(1) * 0.5
                model.layers[0].w_decay_h[...] = rng.standard_normal((4, 1)) * 0.5
                model.layers[0].b_decay_h[...] = rng.standard_normal(4) * 0.5
            sample = _random_sample(rng, t_len=7,
                                    with_missing=(variant == "gru-d"))
            errs.append(network.gradient_check(model, sample, eps=1e-5))
        worst[variant] = max(errs)
        print(f"{variant}: max relative error {worst[variant]:.3e} "
              f"over {args.draws} draws")
    threshold = 1e-5
    ok = all(v < threshold for v in worst.values())
    print("gradcheck " + ("PASS" if ok else "FAIL")
          + f" (threshold {threshold:g})")
    return 0 if ok else 1


def _random_sample(rng, t_len: int, with_missing: bool) -> timeseries.TimeSeriesSample:
    import numpy as np
    from . import missingness
    s = np.cumsum(rng.random(t_len) * 2.0 + 0.5)
    s -= s[0]
    x = rng.random((t_len, 1))
    m = np.ones((t_len, 1))
    if with_missing:
        m = (rng.random((t_len, 1)) > 0.4).astype(float)
        x = np.where(m > 0.5, x, np.nan)
    delta = missingness.compute_intervals(s, m)
    return timeseries.TimeSeriesSample(x=x, s=s, m=m, delta=delta,
                                       y=float(rng.random()))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frictioncast",
        description="Time-aware recurrent forecasting experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="emit a synthetic friction CSV")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a single configuration")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("benchmark", help="run the model x imputation grid")
    _add_common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sweep", help="missing-rate sweep")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("decay-curve", help="export the learned input decay")
    p.add_argument("--model", required=True, help="trained model.json")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--delta-max", type=float, default=35.0)
    p.set_defaults(func=cmd_decay_curve)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--draws", type=int, default=5)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FrictionCastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
