"""Command-line entry point.

Subcommands wire configs to the library: data generation, training,
point certification/prediction, the attribute-expansion study and its
ablation, a single inversion attack, and the defense sweep.  Every run
prints its fully resolved configuration and writes it next to any
outputs, so identical invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import harness
from .data import export_csv, generate_synthetic_insurance
from .inversion import AttackConfig, run_attack, write_trace
from .nn import batch_predictor, load_model, save_model
from .numerics import RngStream
from .smoothing import SmoothingParams, certify, predict_smoothed

_OUT_ENV = "PRIVSMOOTH_OUT"


class CliError(Exception):
    """User-facing failure with a one-line message."""


def _default_out() -> str:
    return os.environ.get(_OUT_ENV, ".")


def _print_resolved(name: str, config: dict) -> None:
    print(f"[{name}] resolved config: {json.dumps(config, sort_keys=True)}")


def _load_config(cls, path: str | None, overrides: dict):
    """Config file fields, overridden by explicit flags, validated by cls."""
    fields = {f.name for f in dataclasses.fields(cls)}
    merged = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise CliError(f"config {path} is not valid JSON: {exc}") from exc
        unknown = sorted(set(doc) - fields)
        if unknown:
            raise CliError(f"config {path} has unknown keys: {unknown}")
        merged.update(doc)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("sigmas", "vote_counts", "ablation_cells"):
        if key in merged and isinstance(merged[key], list):
            merged[key] = tuple(
                tuple(v) if isinstance(v, list) else v for v in merged[key]
            )
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}") from exc


def _load_point(path: str) -> np.ndarray:
    try:
        point = np.loadtxt(path, dtype=float)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read input point {path}: {exc}") from exc
    point = np.atleast_1d(point)
    if point.ndim != 1:
        raise CliError(f"input point {path} must hold one vector, got shape {point.shape}")
    return point


def _cmd_gen_data(args) -> int:
    config = {"n": args.n, "seed": args.seed, "out": args.out}
    _print_resolved("gen-data", config)
    records = generate_synthetic_insurance(args.n, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    export_csv(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_train(args) -> int:
    overrides = {
        "csv_path": args.data,
        "seed": args.seed,
        "epochs": args.epochs,
        "learning_rate": args.learning_rate,
        "l1_lambda": args.l1_lambda,
        "hidden_size": args.hidden_size,
        "n_records": args.n_records,
    }
    config = _load_config(harness.RecommendationConfig, args.config, overrides)
    _print_resolved("train", harness._config_echo(config))
    task = harness._prepare_recommendation(config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    save_model(task.model, outdir / "model.ckpt")
    pipeline = {
        "threshold_b": task.threshold_b,
        "bmi_column": task.bmi_col,
        "bmi_mean": task.bmi_mean,
        "bmi_std": task.bmi_std,
        "base_test_accuracy": task.base_accuracy,
        "config": harness._config_echo(config),
    }
    with open(outdir / "pipeline.json", "w", encoding="utf-8") as fh:
        json.dump(pipeline, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"threshold_b={task.threshold_b!r} base_test_accuracy={task.base_accuracy!r}")
    print(f"wrote {outdir / 'model.ckpt'} and {outdir / 'pipeline.json'}")
    return 0


def _smoothing_args(args) -> SmoothingParams:
    return SmoothingParams(sigma=args.sigma, n=args.n, n0=args.n0, alpha=args.alpha)


def _cmd_certify(args) -> int:
    config = {"model": args.model, "input": args.input, "sigma": args.sigma,
              "n": args.n, "n0": args.n0, "alpha": args.alpha, "seed": args.seed}
    _print_resolved("certify", config)
    model = load_model(args.model)
    point = _load_point(args.input)
    cert = certify(batch_predictor(model), point, _smoothing_args(args), RngStream(args.seed))
    if cert is None:
        print("abstain")
    else:
        print(f"label={cert.label} radius={cert.radius!r} pa_lower={cert.pa_lower!r}")
    return 0


def _cmd_predict(args) -> int:
    config = {"model": args.model, "input": args.input, "sigma": args.sigma,
              "n": args.n, "alpha": args.alpha, "seed": args.seed}
    _print_resolved("predict", config)
    model = load_model(args.model)
    point = _load_point(args.input)
    params = SmoothingParams(sigma=args.sigma, n=args.n, n0=args.n0, alpha=args.alpha)
    outcome = predict_smoothed(batch_predictor(model), point, params, RngStream(args.seed))
    print("abstain" if outcome.is_abstain else f"label={outcome.label}")
    return 0


def _cmd_ape(args) -> int:
    overrides = {"seed": args.seed, "csv_path": args.data, "n_records": args.n_records}
    if args.sigma is not None:
        overrides["sigmas"] = (args.sigma,)
    config = _load_config(harness.RecommendationConfig, args.config, overrides)
    _print_resolved("ape", harness._config_echo(config))
    report = harness.run_recommendation_experiment(config)
    harness.write_recommendation_report(report, args.out)
    print(f"threshold_b={report.threshold_b!r}")
    for row in report.rows:
        print(
            f"sigma={row.sigma:g}: accuracy={row.accuracy!r} "
            f"abstention={row.abstention_rate!r} expansion={row.empirical_expansion!r}"
        )
    print(f"report written to {args.out}")
    return 0


def _cmd_ablation(args) -> int:
    overrides = {"seed": args.seed, "csv_path": args.data, "n_records": args.n_records}
    config = _load_config(harness.RecommendationConfig, args.config, overrides)
    _print_resolved("ablation", harness._config_echo(config))
    report = harness.run_ablation(config)
    harness.write_recommendation_report(report, args.out)
    for row in report.rows:
        print(
            f"n={row.n_votes} alpha={row.alpha:g}: expansion={row.empirical_expansion!r} "
            f"abstention={row.abstention_rate!r}"
        )
    print(f"report written to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    overrides = {"seed": args.seed}
    config = _load_config(harness.InversionConfig, args.config, overrides)
    _print_resolved("sweep", harness._config_echo(config))
    report = harness.run_inversion_experiment(config)
    harness.write_inversion_report(report, args.out)
    b = report.baseline
    print(f"baseline: asr={b.asr!r} accuracy={b.accuracy!r}")
    for row in report.rows:
        print(f"sigma={row.sigma:g} n={row.n_votes}: asr={row.asr!r} accuracy={row.accuracy!r}")
    print(f"report written to {args.out}")
    return 0


def _cmd_invert(args) -> int:
    config = {"model": args.model, "target": args.target, "seed": args.seed,
              "probe_count": args.probe_count, "probe_radius": args.probe_radius,
              "step_size": args.step_size, "max_iters": args.max_iters,
              "init_budget": args.init_budget, "box_lo": args.box_lo, "box_hi": args.box_hi}
    _print_resolved("invert", config)
    model = load_model(args.model)
    if args.box_lo >= args.box_hi:
        raise CliError(f"domain box is empty: [{args.box_lo}, {args.box_hi}]")
    dim = model.input_dim
    box = (np.full(dim, args.box_lo), np.full(dim, args.box_hi))
    cfg = AttackConfig(
        target_class=args.target, probe_count=args.probe_count,
        probe_radius=args.probe_radius, step_size=args.step_size,
        max_iters=args.max_iters, init_budget=args.init_budget, seed=args.seed,
    )
    result = run_attack(batch_predictor(model), cfg, box)
    print(
        f"success={result.success} queries={result.queries_used} "
        f"steps={max(0, len(result.path) - 1)} reason={result.abandoned_reason}"
    )
    if args.out is not None:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_trace(result, args.out)
        print(f"trace written to {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privsmooth",
        description="Smoothing-certified inference-time privacy experiments",
    )
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker cap; results never depend on it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic insurance-style CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=os.path.join(_default_out(), "data.csv"))
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train the threshold recommendation model")
    p.add_argument("--data", help="CSV path; omit to use the synthetic generator")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--l1-lambda", dest="l1_lambda", type=float)
    p.add_argument("--hidden-size", dest="hidden_size", type=int)
    p.add_argument("--n-records", dest="n_records", type=int)
    p.add_argument("--out", default=_default_out())
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("certify", help="certify one feature-space point")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="text file with one feature vector")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--n0", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("predict", help="abstaining smoothed prediction for one point")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--n0", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("ape", help="attribute-expansion study (histograms, metrics)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--data", help="CSV path; omit to use the synthetic generator")
    p.add_argument("--sigma", type=float, help="run a single noise scale")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-records", dest="n_records", type=int)
    p.add_argument("--out", default=_default_out())
    p.set_defaults(func=_cmd_ape)

    p = sub.add_parser("ablation", help="vote-count and alpha ablation at fixed sigma")
    p.add_argument("--config")
    p.add_argument("--data")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-records", dest="n_records", type=int)
    p.add_argument("--out", default=_default_out())
    p.set_defaults(func=_cmd_ablation)

    p = sub.add_parser("sweep", help="inversion defense sweep over (sigma, N)")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=_default_out())
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("invert", help="one label-only inversion attack on a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--probe-count", dest="probe_count", type=int, default=32)
    p.add_argument("--probe-radius", dest="probe_radius", type=float, default=2.0)
    p.add_argument("--step-size", dest="step_size", type=float, default=0.4)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=30)
    p.add_argument("--init-budget", dest="init_budget", type=int, default=500)
    p.add_argument("--box-lo", dest="box_lo", type=float, default=-10.0)
    p.add_argument("--box-hi", dest="box_hi", type=float, default=10.0)
    p.add_argument("--out", help="optional path for the attack trace TSV")
    p.set_defaults(func=_cmd_invert)

    return parser


def dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
