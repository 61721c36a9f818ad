"""Command-line entry point: ``deepport <verb> [flags]``.

Exit codes: 0 success, 1 configuration/validation, 2 I/O, 3 training
divergence, 4 numerical conditioning.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import baselines
from ._io import atomic_write_json, atomic_write_text
from .data import (
    SplitSpec,
    format_returns_csv,
    load_returns_csv,
    prices_to_returns,
    split,
    split_by_fraction,
    synth_market,
)
from .errors import ConditioningError, DeepPortError, DivergenceError, ValidationError
from .frontier import (
    PipelineSettings,
    TrackingSeries,
    build_frontier,
    build_lambda_frontier,
    compare_frontiers,
    frontier_from_csv,
    frontier_to_csv,
    tracking_to_csv,
)
from .market_map import encode_market, ranking_to_csv, select_universe
from .nn import TrainConfig, network_to_dict
from .portfolio_map import TargetSeries, amend_target, calibrate, index_target, track

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGENCE, EXIT_CONDITIONING = 0, 1, 2, 3, 4

DEFAULTS = {
    "input": None,
    "layout": "wide",
    "prices": False,
    "synth_assets": 60,
    "synth_periods": 220,
    "synth_latent": 3,
    "synth_noise": 0.01,
    "calib_start": None,
    "calib_end": None,
    "valid_start": None,
    "valid_end": None,
    "calib_fraction": 0.5,
    "ae_hidden": 5,
    "ae_activation": "relu",
    "ae_lambda": 0.0,
    "ae_penalty": "l2",
    "ae_lr": 0.2,
    "ae_epochs": 1000,
    "ae_batch": 16,
    "pm_hidden": 5,
    "pm_activation": "relu",
    "pm_lambda": 0.0,
    "pm_penalty": "l2",
    "pm_lr": 0.5,
    "pm_epochs": 500,
    "pm_batch": 16,
    "output_activation": "linear",
    "solver": "sgd",
    "k_folds": 4,
    "contiguous_folds": False,
    "target": "index",
    "amend_target": False,
    "amend_floor": -0.05,
    "amend_replacement": 0.05,
    "grid": [15, 25, 45],
    "lambda_grid": None,
    "n_stocks": 25,
    "n_communal": 10,
    "linear_diagnostic": False,
    "seed": 0,
    "jobs": 1,
    "out_dir": "out",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _common(p, out_help):
    p.add_argument("--config", help="flat JSON config; flags override its fields")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel grid points")
    p.add_argument("-o", "--out-dir", dest="out_dir", default=argparse.SUPPRESS, help=out_help)


def _pipeline_flags(p):
    S = argparse.SUPPRESS
    p.add_argument("-i", "--input", default=S, help="returns CSV; synthetic market if omitted")
    p.add_argument("--layout", choices=["wide", "long"], default=S)
    p.add_argument("--prices", action="store_true", default=S, help="input holds price levels")
    p.add_argument("--synth-assets", dest="synth_assets", type=int, default=S)
    p.add_argument("--synth-periods", dest="synth_periods", type=int, default=S)
    p.add_argument("--synth-latent", dest="synth_latent", type=int, default=S)
    p.add_argument("--synth-noise", dest="synth_noise", type=float, default=S)
    for name in ("calib-start", "calib-end", "valid-start", "valid-end"):
        p.add_argument(f"--{name}", dest=name.replace("-", "_"), default=S)
    p.add_argument("--calib-fraction", dest="calib_fraction", type=float, default=S)
    for pre in ("ae", "pm"):
        p.add_argument(f"--{pre}-hidden", dest=f"{pre}_hidden", type=int, default=S)
        p.add_argument(f"--{pre}-activation", dest=f"{pre}_activation",
                       choices=["relu", "tanh", "linear"], default=S)
        p.add_argument(f"--{pre}-lambda", dest=f"{pre}_lambda", type=float, default=S)
        p.add_argument(f"--{pre}-penalty", dest=f"{pre}_penalty", choices=["l1", "l2"], default=S)
        p.add_argument(f"--{pre}-lr", dest=f"{pre}_lr", type=float, default=S)
        p.add_argument(f"--{pre}-epochs", dest=f"{pre}_epochs", type=int, default=S)
        p.add_argument(f"--{pre}-batch", dest=f"{pre}_batch", type=int, default=S)
    p.add_argument("--output-activation", dest="output_activation",
                   choices=["relu", "tanh", "linear"], default=S)
    p.add_argument("--solver", choices=["sgd", "lstsq"], default=S)
    p.add_argument("-k", "--k-folds", dest="k_folds", type=int, default=S)
    p.add_argument("--contiguous-folds", dest="contiguous_folds", action="store_true", default=S)
    p.add_argument("--target", default=S, help="'index', a ticker, or a one-column CSV")
    p.add_argument("--amend-target", dest="amend_target", action="store_true", default=S)
    p.add_argument("--amend-floor", dest="amend_floor", type=float, default=S)
    p.add_argument("--amend-replacement", dest="amend_replacement", type=float, default=S)
    p.add_argument("--n-communal", dest="n_communal", type=int, default=S)
    p.add_argument("--linear-diagnostic", dest="linear_diagnostic", action="store_true", default=S,
                   help="linear activations, lambda=0, exact least-squares calibration")


def build_parser():
    parser = _Parser(prog="deepport", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic latent-factor market")
    p.add_argument("--assets", type=int, default=60)
    p.add_argument("--periods", type=int, default=220)
    p.add_argument("--latent", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--drawdown", help="ASSET,PERIOD,MAGNITUDE (0-based indices)")
    p.add_argument("--layout", choices=["wide", "long"], default="wide")
    _common(p, "output CSV path")

    p = sub.add_parser("ingest", help="validate a CSV and write wide-layout returns")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--layout", choices=["wide", "long"], default="wide")
    p.add_argument("--prices", action="store_true")
    _common(p, "output CSV path")

    for verb, text in (("encode", "train the market-map and rank stocks"),
                       ("calibrate", "calibrate one portfolio-map"),
                       ("frontier", "sweep the stock grid and trace the deep frontier")):
        p = sub.add_parser(verb, help=text)
        _pipeline_flags(p)
        _common(p, "output directory")
        if verb == "calibrate":
            p.add_argument("--n-stocks", dest="n_stocks", type=int, default=argparse.SUPPRESS)
        if verb == "frontier":
            p.add_argument("--grid", type=_int_list, default=argparse.SUPPRESS,
                           help="comma-separated stock counts")
            p.add_argument("--lambda-grid", dest="lambda_grid", type=_float_list,
                           default=argparse.SUPPRESS,
                           help="sweep calibration lambda at --n-stocks instead")
            p.add_argument("--n-stocks", dest="n_stocks", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("baseline", help="classical encoders")
    p.add_argument("kind", choices=["moments", "bl", "factor"])
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--layout", choices=["wide", "long"], default="wide")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--views", help="JSON file with P, q, Omega (bl)")
    p.add_argument("-K", type=int, default=3, help="number of factors (factor)")
    p.add_argument("--max-iters", dest="max_iters", type=int, default=500)
    _common(p, "output JSON path")

    p = sub.add_parser("report", help="compare frontier CSVs")
    p.add_argument("frontiers", nargs="+")
    p.add_argument("--mode", choices=["stocks", "lambda"], default="stocks")
    _common(p, "output JSON path")
    return parser


# --------------------------------------------------------------------------
# config resolution
# --------------------------------------------------------------------------


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValidationError("config file must hold a flat JSON object")
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in DEFAULTS:
            cfg[key] = value
    if isinstance(cfg["grid"], str):
        cfg["grid"] = _int_list(cfg["grid"])
    if cfg["linear_diagnostic"]:
        cfg.update(ae_activation="linear", pm_activation="linear", pm_lambda=0.0, solver="lstsq")
    return cfg


def _train_cfgs(cfg):
    ae = TrainConfig(lam=cfg["ae_lambda"], penalty=cfg["ae_penalty"], learning_rate=cfg["ae_lr"],
                     epochs=cfg["ae_epochs"], batch_size=cfg["ae_batch"], seed=cfg["seed"])
    pm = TrainConfig(lam=cfg["pm_lambda"], penalty=cfg["pm_penalty"], learning_rate=cfg["pm_lr"],
                     epochs=cfg["pm_epochs"], batch_size=cfg["pm_batch"], seed=cfg["seed"])
    return ae, pm


def _settings(cfg):
    ae, pm = _train_cfgs(cfg)
    return PipelineSettings(
        autoencoder=ae, calibration=pm, ae_hidden=cfg["ae_hidden"], pm_hidden=cfg["pm_hidden"],
        ae_activation=cfg["ae_activation"], pm_activation=cfg["pm_activation"],
        output_activation=cfg["output_activation"], k=cfg["k_folds"], n_communal=cfg["n_communal"],
        solver=cfg["solver"], contiguous_folds=cfg["contiguous_folds"], amend=cfg["amend_target"],
        floor=cfg["amend_floor"], replacement=cfg["amend_replacement"], jobs=cfg["jobs"],
    )


def _load_data(cfg):
    if cfg["input"]:
        data = load_returns_csv(cfg["input"], cfg["layout"])
        if cfg["prices"]:
            data = prices_to_returns(data)
    else:
        data = synth_market(cfg["synth_assets"], cfg["synth_periods"], cfg["synth_latent"],
                            seed=cfg["seed"], noise_scale=cfg["synth_noise"])
    target = cfg["target"]
    if target == "index":
        y = index_target(data)
    elif target in data.tickers:
        y = TargetSeries(data.column(target), target, timestamps=data.timestamps)
        data = data.drop([target])
    elif os.path.exists(target):
        series = load_returns_csv(target, "wide")
        if series.N != 1:
            raise ValidationError(f"target file {target} must have exactly one value column")
        y = TargetSeries(series.values[:, 0], series.tickers[0], timestamps=series.timestamps)
    else:
        raise ValidationError(f"target {target!r} is neither 'index', a ticker, nor a file")
    return data, y


def _split_spec(cfg, data):
    keys = ("calib_start", "calib_end", "valid_start", "valid_end")
    if all(cfg[k] is None for k in keys):
        return split_by_fraction(data, cfg["calib_fraction"])
    calib_end = cfg["calib_end"] if cfg["calib_end"] is not None else cfg["valid_start"]
    valid_start = cfg["valid_start"] if cfg["valid_start"] is not None else calib_end
    return SplitSpec((cfg["calib_start"], calib_end), (valid_start, cfg["valid_end"]))


def _out_dir(cfg):
    os.makedirs(cfg["out_dir"], exist_ok=True)
    return cfg["out_dir"]


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_synth(args):
    drawdown = None
    if args.drawdown:
        try:
            a, p, mag = args.drawdown.split(",")
            drawdown = (int(a), int(p), float(mag))
        except ValueError:
            raise ValidationError(f"--drawdown expects ASSET,PERIOD,MAGNITUDE, got {args.drawdown!r}") from None
    seed = getattr(args, "seed", 0)
    out = getattr(args, "out_dir", "market.csv")
    data = synth_market(args.assets, args.periods, args.latent, drawdown, seed=seed,
                        noise_scale=args.noise)
    echo = {"command": "synth", "assets": args.assets, "periods": args.periods,
            "latent": args.latent, "noise": args.noise, "drawdown": drawdown, "seed": seed,
            "layout": args.layout, "output": out}
    atomic_write_text(out, format_returns_csv(data, args.layout))
    atomic_write_json(out + ".config.json", echo)
    print(json.dumps(echo))
    return EXIT_OK


def cmd_ingest(args):
    data = load_returns_csv(args.input, args.layout)
    if args.prices:
        data = prices_to_returns(data)
    out = getattr(args, "out_dir", "returns.csv")
    summary = {"command": "ingest", "input": args.input, "layout": args.layout,
               "prices": args.prices, "output": out, "T": data.T, "N": data.N,
               "first": data.timestamps[0], "last": data.timestamps[-1]}
    atomic_write_text(out, format_returns_csv(data))
    atomic_write_json(out + ".config.json", summary)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_encode(args):
    cfg = resolve_config(args)
    data, _ = _load_data(cfg)
    cal, val = split(data, _split_spec(cfg, data))
    ae, _ = _train_cfgs(cfg)
    report = encode_market(cal, cfg["ae_hidden"], ae, X_hat=val,
                           hidden_activation=cfg["ae_activation"],
                           output_activation=cfg["output_activation"])
    out = _out_dir(cfg)
    atomic_write_text(os.path.join(out, "ranking.csv"), ranking_to_csv(report.ranking))
    atomic_write_json(os.path.join(out, "market_map.json"), network_to_dict(report.network))
    atomic_write_json(os.path.join(out, "encode_report.json"),
                      {"config": cfg, "epsilon_m": report.epsilon_m,
                       "calibration_rows": cal.T, "validation_rows": val.T})
    print(json.dumps({"command": "encode", "out_dir": out, "epsilon_m": report.epsilon_m}))
    return EXIT_OK


def cmd_calibrate(args):
    cfg = resolve_config(args)
    data, y = _load_data(cfg)
    cal, val = split(data, _split_spec(cfg, data))
    settings = _settings(cfg)
    y_cal, y_val = y.align(cal), y.align(val)
    if settings.amend:
        y_cal = amend_target(y_cal, settings.floor, settings.replacement)
        y_val = amend_target(y_val, settings.floor, settings.replacement)
    enc = encode_market(cal, settings.ae_hidden, settings.autoencoder, X_hat=val,
                        hidden_activation=settings.ae_activation,
                        output_activation=settings.output_activation)
    tickers = select_universe(enc.ranking, cfg["n_stocks"], settings.n_communal)
    report = calibrate(cal.select(tickers), y_cal, settings.pm_hidden, settings.calibration,
                       settings.k, settings.pm_activation, settings.output_activation,
                       settings.solver, settings.contiguous_folds)
    out = _out_dir(cfg)
    tracker_val = track(report.network, val.select(tickers))
    eps_p = float(np.mean((y_val.values - tracker_val) ** 2))
    for name, X, yy, z in (("calibration", cal, y_cal, track(report.network, cal.select(tickers))),
                           ("validation", val, y_val, tracker_val)):
        atomic_write_text(os.path.join(out, f"tracking_{name}.csv"),
                          tracking_to_csv(TrackingSeries(X.timestamps, yy.values, z)))
    atomic_write_json(os.path.join(out, "calibration_report.json"),
                      {"config": cfg, "epsilon_m": enc.epsilon_m, "epsilon_p": eps_p,
                       **report.to_dict()})
    print(json.dumps({"command": "calibrate", "out_dir": out, "mean_cv_error": report.mean_cv_error,
                      "epsilon_p": eps_p}))
    return EXIT_OK


def cmd_frontier(args):
    cfg = resolve_config(args)
    data, y = _load_data(cfg)
    spec = _split_spec(cfg, data)
    settings = _settings(cfg)
    if cfg["lambda_grid"]:
        frontier = build_lambda_frontier(data, y, spec, cfg["n_stocks"], cfg["lambda_grid"], settings)
        label = lambda key: f"lambda{key:g}"
    else:
        frontier = build_frontier(data, y, spec, cfg["grid"], settings)
        label = lambda key: f"n{key}"
    out = _out_dir(cfg)
    atomic_write_text(os.path.join(out, "frontier.csv"), frontier_to_csv(frontier))
    track_dir = os.path.join(out, "tracking")
    os.makedirs(track_dir, exist_ok=True)
    for key, series in frontier.tracks.items():
        for window, ts in series.items():
            atomic_write_text(os.path.join(track_dir, f"{label(key)}_{window}.csv"), tracking_to_csv(ts))
    points = [
        {"n_stocks": p.n_stocks, "lambda": p.lam, "seed": p.seed, "epsilon_m": p.epsilon_m,
         "epsilon_p": p.epsilon_p, "in_sample_error": p.in_sample_error, "cv_error": p.cv_error,
         "tickers": list(p.tickers)}
        for p in frontier.points
    ]
    atomic_write_json(os.path.join(out, "report.json"),
                      {"config": cfg, "settings": frontier.config, "mode": frontier.mode,
                       "points": points})
    print(json.dumps({"command": "frontier", "out_dir": out, "points": len(points)}))
    return EXIT_OK


def cmd_baseline(args):
    data = load_returns_csv(args.input, args.layout)
    out = getattr(args, "out_dir", f"baseline_{args.kind}.json")
    seed = getattr(args, "seed", 0)
    echo = {"kind": args.kind, "input": args.input, "lambda": args.lam}
    if args.kind == "moments":
        result = baselines.markowitz_moments(data).to_dict()
    elif args.kind == "bl":
        if not args.views:
            raise ValidationError("baseline bl needs --views FILE with P, q, Omega")
        with open(args.views, encoding="utf-8") as fh:
            v = json.load(fh)
        views = baselines.ViewSpec(v["P"], v["q"], v["Omega"], args.lam)
        mom = baselines.markowitz_moments(data)
        result = {"mean": baselines.black_litterman_mean(mom, views).tolist(),
                  "sample_mean": mom.mean.tolist()}
        echo["views"] = args.views
    else:
        model = baselines.factor_model_fit(data, args.K, args.lam, args.max_iters, seed)
        trace = np.asarray(model.objective_trace)
        increases = np.diff(trace)
        if np.any(increases > 1e-10 * max(1.0, trace[0])):
            raise ConditioningError(f"objective increased by {increases.max():.3e}")
        result = {**model.to_dict(), "monotone": True}
        echo.update(K=args.K, max_iters=args.max_iters, seed=seed)
    result["tickers"] = list(data.tickers)
    result["config"] = echo
    atomic_write_json(out, result)
    print(json.dumps({"command": "baseline", "kind": args.kind, "output": out}))
    return EXIT_OK


def cmd_report(args):
    frontiers = []
    for path in args.frontiers:
        with open(path, encoding="utf-8") as fh:
            frontiers.append(frontier_from_csv(fh.read(), args.mode))
    rep = compare_frontiers(frontiers)
    doc = {"frontiers": args.frontiers, **rep.to_dict(),
           "dominant_file": None if rep.dominant is None else args.frontiers[rep.dominant]}
    text = json.dumps(doc, indent=2)
    if hasattr(args, "out_dir"):
        atomic_write_text(args.out_dir, text + "\n")
    print(text)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "encode": cmd_encode,
    "calibrate": cmd_calibrate,
    "frontier": cmd_frontier,
    "baseline": cmd_baseline,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ConditioningError as exc:
        print(f"error: numerical conditioning: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING
    except (DeepPortError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
