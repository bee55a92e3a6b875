"""Command-line surface: decompose, train, forecast, evaluate, ablate,
ensemble, and a persistence runtime benchmark.

All outputs are CSV or JSON written atomically (temp file + rename).
Failures print a machine-readable JSON object to stderr and exit with 2
for configuration errors, 3 for data errors, 4 for numerical divergence.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import ForecastConfig, apply_overrides, load_config_file, validate
from .data import (SeriesRecord, SplitSpec, load_csv, select_series, split,
                   write_csv)
from .errors import EmptyEnsemble, InvalidConfig, TopoForecastError
from .metrics import EvalContext, ScoreReport, score_methods
from .models import load_checkpoint, make_variant, save_checkpoint
from .persistence import lower_star_barcode
from .train import rolling_forecast, train_model, ensemble_forecast
from .windowing import plan, windowed_barcodes


def _atomic_write(path, payload) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(payload, bytes) else "w"
    with open(tmp, mode, newline="" if mode == "w" else None) as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _write_rows(path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(str(c) for c in row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def _fmt(x) -> str:
    return repr(float(x))


# -- subcommands ---------------------------------------------------------


def cmd_decompose(args) -> None:
    records = load_csv(args.input)
    rec = select_series(records, args.series_id)
    p = plan(rec.values.size, args.n)
    if args.window_count is not None and p.count != args.window_count:
        raise InvalidConfig(
            f"series length {rec.values.size} with window {args.n} gives "
            f"{p.count} windows, not {args.window_count}"
        )
    wb = windowed_barcodes(rec.values, p)
    rows = []
    for j in range(wb.count):
        for side, barcode in (("sub", wb.sub[j]), ("sup", wb.sup[j])):
            for bar in barcode:
                rows.append((j, side, _fmt(bar.birth), _fmt(bar.death),
                             int(bar.essential)))
    _write_rows(args.output, ["window_index", "side", "birth", "death", "essential"],
                rows)


def _load_cfg(args) -> ForecastConfig:
    cfg = load_config_file(args.config) if args.config else ForecastConfig()
    overrides = {key: getattr(args, key, None) for key in (
        "variant", "backbone", "lookback", "window", "window_count", "horizon",
        "coordinate_functions", "heads", "encoder_layers", "hidden_dim",
        "iterations", "batch_size", "loss",
        "lr_topvec", "lr_encoder", "lr_mlp", "lr_backbone",
        "nbeats_stacks", "nbeats_blocks_per_stack", "nbeats_block_layers",
        "nbeats_block_hidden",
    )}
    return apply_overrides(cfg, overrides)


def _train_one(rec: SeriesRecord, cfg: ForecastConfig, seed: int, variant=None):
    train_idx, _, _ = split(rec, SplitSpec(cfg.test_fraction, cfg.validation_fraction))
    train_values = rec.values[train_idx.start:train_idx.stop]
    model = make_variant(variant or cfg.variant, cfg, np.random.default_rng(seed),
                         training_values=train_values)
    result = train_model(model, train_values, model.cfg,
                         rng=np.random.default_rng(seed))
    return result


def cmd_train(args) -> None:
    cfg = _load_cfg(args)
    rec = select_series(load_csv(args.input), args.series_id)
    if cfg.lookback is None and cfg.window is None:
        raise InvalidConfig("set a lookback (or window and window_count)")
    validate(cfg)
    result = _train_one(rec, cfg, args.seed)
    save_checkpoint(args.checkpoint, result.model)
    if args.loss_csv:
        _write_rows(args.loss_csv, ["iteration", "loss"],
                    [(i, _fmt(v)) for i, v in enumerate(result.losses)])


def cmd_forecast(args) -> None:
    model = load_checkpoint(args.checkpoint)
    rec = select_series(load_csv(args.input), args.series_id)
    cfg = model.cfg
    if args.rolling:
        _, _, test_idx = split(rec, SplitSpec(cfg.test_fraction, cfg.validation_fraction))
        values = rolling_forecast(model, rec.values, model.lookback,
                                  start=test_idx.start,
                                  count=test_idx.stop - test_idx.start)
        horizon = values.size
    else:
        x = rec.values[-model.lookback:]
        values = model.predict(x)
        horizon = model.horizon
    out = SeriesRecord(id=rec.id, frequency=rec.frequency, values=values,
                       horizon=horizon)
    tmp = str(args.output) + ".tmp"
    write_csv(tmp, [out])
    os.replace(tmp, args.output)


def _evaluate_report(truth_path, forecast_paths, names=None) -> ScoreReport:
    truth = {rec.id: rec for rec in load_csv(truth_path)}
    methods = {}
    actuals = {}
    contexts = {}
    for k, fpath in enumerate(forecast_paths):
        name = names[k] if names else Path(fpath).stem
        forecasts = {}
        for rec in load_csv(fpath):
            if rec.id not in truth:
                raise InvalidConfig(f"forecast series {rec.id!r} missing from truth file")
            t = truth[rec.id]
            h = rec.values.size
            if h >= t.values.size:
                raise InvalidConfig(
                    f"forecast for {rec.id!r} is not shorter than the truth series"
                )
            forecasts[rec.id] = rec.values
            actuals[rec.id] = t.values[-h:]
            contexts[rec.id] = EvalContext(t.values[:-h], t.seasonality, h)
        methods[name] = forecasts
    for name, forecasts in methods.items():
        missing = set(actuals) - set(forecasts)
        if missing:
            raise InvalidConfig(f"method {name!r} lacks forecasts for {sorted(missing)}")
    return score_methods(methods, actuals, contexts)


def cmd_evaluate(args) -> None:
    report = _evaluate_report(args.truth, args.forecast)
    rows = []
    for i, name in enumerate(report.methods):
        for j, sid in enumerate(report.series_ids):
            rows.append((sid, name, _fmt(report.smape_table[i, j]),
                         _fmt(report.mase_table[i, j])))
    _write_rows(args.output_csv, ["series_id", "method", "smape", "mase"], rows)
    if args.output_json:
        _atomic_write(args.output_json, report.to_json() + "\n")


VARIANT_LABELS = {"base": "base", "top": "+Top", "attn": "+Attn", "topattn": "+TopAttn"}


def cmd_ablate(args) -> None:
    cfg = _load_cfg(args)
    if cfg.lookback is None and cfg.window is None:
        raise InvalidConfig("set a lookback (or window and window_count)")
    records = load_csv(args.input)
    if args.series_id:
        records = [select_series(records, args.series_id)]

    variants = ["base", "top", "attn", "topattn"]
    smape_table = np.zeros((len(variants), len(records)))
    param_counts = {}
    detail = {}
    for vi, variant in enumerate(variants):
        cfg_v = apply_overrides(cfg, {"variant": variant})
        validate(cfg_v)
        for sj, rec in enumerate(records):
            result = _train_one(rec, cfg_v, args.seed, variant=variant)
            spec = SplitSpec(cfg.test_fraction, cfg.validation_fraction)
            _, _, test_idx = split(rec, spec)
            forecasts = rolling_forecast(result.model, rec.values, result.model.lookback,
                                         start=test_idx.start,
                                         count=test_idx.stop - test_idx.start)
            from .metrics import smape as smape_fn
            smape_table[vi, sj] = smape_fn(rec.values[test_idx.start:test_idx.stop],
                                           forecasts)
            param_counts[variant] = result.model.parameter_count()
            detail.setdefault(variant, {})[rec.id] = float(smape_table[vi, sj])

    from .metrics import rank_and_diff
    avg_rank, avg_diff = rank_and_diff(smape_table)
    rows = []
    for vi, variant in enumerate(variants):
        rows.append((VARIANT_LABELS[variant], param_counts[variant],
                     _fmt(avg_rank[vi]), _fmt(avg_diff[vi]),
                     _fmt(smape_table[vi].mean())))
    _write_rows(args.output_csv,
                ["variant", "parameters", "avg_rank", "avg_pct_diff", "mean_smape"],
                rows)
    if args.output_json:
        payload = {
            "variants": {VARIANT_LABELS[v]: {
                "parameters": param_counts[v],
                "avg_rank": float(avg_rank[i]),
                "avg_pct_diff": float(avg_diff[i]),
                "smape": detail[v],
            } for i, v in enumerate(variants)},
            "series": [rec.id for rec in records],
        }
        _atomic_write(args.output_json, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _canonical_members(paths):
    """Deterministic member order regardless of CLI argument order."""
    keyed = []
    for p in paths:
        digest = hashlib.sha256(Path(p).read_bytes()).hexdigest()
        keyed.append((Path(p).name, digest, p))
    return [p for _, _, p in sorted(keyed)]


def cmd_ensemble(args) -> None:
    if not args.members:
        raise EmptyEnsemble("no member forecast files given")
    paths = _canonical_members(args.members)
    member_records = [ {rec.id: rec for rec in load_csv(p)} for p in paths ]
    ids = list(member_records[0])
    for p, recs in zip(paths, member_records):
        if list(recs) != ids:
            raise InvalidConfig(f"member {p} covers different series than the first member")

    aggregated = []
    for sid in ids:
        member_values = [recs[sid].values for recs in member_records]
        med = ensemble_forecast(member_values)
        proto = member_records[0][sid]
        aggregated.append(SeriesRecord(id=sid, frequency=proto.frequency,
                                       values=med, horizon=med.size))
    tmp = str(args.output) + ".tmp"
    write_csv(tmp, aggregated)
    os.replace(tmp, args.output)

    if args.owa_by_size:
        if not args.truth:
            raise InvalidConfig("--owa-by-size needs --truth")
        rows = []
        for k in range(1, len(paths) + 1):
            tmp_members = []
            for sid in ids:
                med = ensemble_forecast([recs[sid].values for recs in member_records[:k]])
                tmp_members.append(SeriesRecord(id=sid,
                                                frequency=member_records[0][sid].frequency,
                                                values=med, horizon=med.size))
            tmp_path = str(args.owa_by_size) + f".k{k}.tmp"
            write_csv(tmp_path, tmp_members)
            try:
                report = _evaluate_report(args.truth, [tmp_path], names=[f"size{k}"])
            finally:
                os.remove(tmp_path)
            owa_value = report.owa.get(f"size{k}")
            rows.append((k, _fmt(owa_value) if owa_value is not None else "nan"))
        _write_rows(args.owa_by_size, ["ensemble_size", "owa"], rows)


def cmd_bench_ph(args) -> None:
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)
    rows = []
    for n in sizes:
        lower_star_barcode(rng.normal(size=n))  # warm up allocation paths
        times = np.empty(args.repeats)
        for r in range(args.repeats):
            values = rng.normal(size=n)
            t0 = time.perf_counter()
            lower_star_barcode(values)
            times[r] = time.perf_counter() - t0
        rows.append((n, _fmt(np.median(times))))
    _write_rows(args.output, ["n", "median_seconds"], rows)


# -- argument parsing ------------------------------------------------------


def _add_config_flags(sub) -> None:
    sub.add_argument("--config", help="sectioned key = value config file")
    sub.add_argument("--variant", choices=["base", "top", "attn", "topattn"])
    sub.add_argument("--backbone", choices=["linear", "nbeats"])
    sub.add_argument("--lookback", type=int)
    sub.add_argument("--window", type=int)
    sub.add_argument("--window-count", dest="window_count", type=int)
    sub.add_argument("--horizon", type=int)
    sub.add_argument("--coordinate-functions", dest="coordinate_functions", type=int)
    sub.add_argument("--heads", type=int)
    sub.add_argument("--encoder-layers", dest="encoder_layers", type=int)
    sub.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    sub.add_argument("--iterations", type=int)
    sub.add_argument("--batch-size", dest="batch_size", type=int)
    sub.add_argument("--loss", choices=["mse", "smape"])
    sub.add_argument("--lr-topvec", dest="lr_topvec", type=float)
    sub.add_argument("--lr-encoder", dest="lr_encoder", type=float)
    sub.add_argument("--lr-mlp", dest="lr_mlp", type=float)
    sub.add_argument("--lr-backbone", dest="lr_backbone", type=float)
    sub.add_argument("--nbeats-stacks", dest="nbeats_stacks", type=int)
    sub.add_argument("--nbeats-blocks-per-stack", dest="nbeats_blocks_per_stack", type=int)
    sub.add_argument("--nbeats-block-layers", dest="nbeats_block_layers", type=int)
    sub.add_argument("--nbeats-block-hidden", dest="nbeats_block_hidden", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topo",
        description="Topological-attention time series forecasting toolkit",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("decompose", help="emit per-window barcodes as CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--series-id", dest="series_id")
    p.add_argument("--n", type=int, required=True, help="window length")
    p.add_argument("--window-count", dest="window_count", type=int)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_decompose)

    p = subs.add_parser("train", help="train one model on a series")
    p.add_argument("--input", required=True)
    p.add_argument("--series-id", dest="series_id")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--loss-csv", dest="loss_csv")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("forecast", help="forecast from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--series-id", dest="series_id")
    p.add_argument("--output", required=True)
    p.add_argument("--rolling", action="store_true",
                   help="one-step forecasts over the held-out test region")
    p.set_defaults(func=cmd_forecast)

    p = subs.add_parser("evaluate", help="score forecast files against a truth file")
    p.add_argument("--truth", required=True)
    p.add_argument("--forecast", action="append", required=True)
    p.add_argument("--output-csv", dest="output_csv", required=True)
    p.add_argument("--output-json", dest="output_json")
    p.set_defaults(func=cmd_evaluate)

    p = subs.add_parser("ablate", help="train and compare all four variants")
    p.add_argument("--input", required=True)
    p.add_argument("--series-id", dest="series_id")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output-csv", dest="output_csv", required=True)
    p.add_argument("--output-json", dest="output_json")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = subs.add_parser("ensemble", help="median-aggregate member forecast files")
    p.add_argument("members", nargs="*")
    p.add_argument("--output", required=True)
    p.add_argument("--truth")
    p.add_argument("--owa-by-size", dest="owa_by_size")
    p.set_defaults(func=cmd_ensemble)

    p = subs.add_parser("bench-ph", help="persistence runtime over window sizes")
    p.add_argument("--sizes", default="250,500,1000,2000")
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_bench_ph)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except TopoForecastError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
