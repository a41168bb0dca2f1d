"""Command-line interface.

Subcommands: ``curves`` (closed-form scenario curves as CSV, optionally
rendered to PNG), ``gradcheck`` (finite-difference oracle, CI-friendly
exit status), ``train`` (single run with a JSON report) and ``sweep``
(temperature grid with per-variant aggregates).

Exit codes: 0 success, 1 numeric/check failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment
from .errors import ContrastLabError, DivergedLoss
from .gradcheck import LOSS_KINDS, check_loss_gradients
from .scenario import (
    DEFAULT_GRID_POINTS,
    DIV_TEMP,
    LEARNABLE,
    TEMP_FREE,
    figure_curves,
    sample_curve,
)

CLI_VARIANTS = {"div-temp": DIV_TEMP, "learnable": LEARNABLE, "temp-free": TEMP_FREE}
_VARIANT_NAMES = {v: k for k, v in CLI_VARIANTS.items()}

CURVES_HEADER = ["variant", "tau_or_t", "N", "C", "value"]
SWEEP_HEADER = ["variant", "tau", "seed", "knn_acc"]


def _float_fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _write_curves_csv(curves, stream) -> None:
    writer = csv.writer(stream)
    writer.writerow(CURVES_HEADER)
    for curve in curves:
        name = _VARIANT_NAMES[curve.variant]
        for x, value in zip(curve.grid, curve.values):
            if curve.sweep == "tau":
                row = [name, _float_fmt(x), curve.n, _float_fmt(curve.c), _float_fmt(value)]
            else:
                row = [name, _float_fmt(curve.tau_or_t), curve.n, _float_fmt(x), _float_fmt(value)]
            writer.writerow(row)


def cmd_curves(args) -> int:
    args.quantity = args.quantity.replace("-", "_")
    if args.figure is not None:
        curves = figure_curves(args.figure, points=args.points)
    else:
        variant = CLI_VARIANTS[args.variant]
        ns = args.n or [2]
        curves = []
        if variant == DIV_TEMP:
            taus = args.tau or [1.0]
            curves = [
                sample_curve(variant, tau=tau, n=n, points=args.points, quantity=args.quantity)
                for tau in taus for n in ns
            ]
        elif variant == LEARNABLE:
            ts = args.t or [0.0]
            curves = [
                sample_curve(variant, t=t, n=n, points=args.points, quantity=args.quantity)
                for t in ts for n in ns
            ]
        else:
            curves = [
                sample_curve(variant, n=n, points=args.points, quantity=args.quantity)
                for n in ns
            ]

    if args.out:
        with open(args.out, "w", newline="") as fh:
            _write_curves_csv(curves, fh)
        plot_path = args.plot or Path(args.out).with_suffix(".png")
        if not args.no_plot:
            from .plotting import render_curves

            render_curves(curves, plot_path)
            print(f"wrote {args.out} and {plot_path}")
        else:
            print(f"wrote {args.out}")
    else:
        buffer = io.StringIO()
        _write_curves_csv(curves, buffer)
        sys.stdout.write(buffer.getvalue())
        if args.plot:
            from .plotting import render_curves

            render_curves(curves, args.plot)
    return 0


def cmd_gradcheck(args, parser) -> int:
    if args.trials < 1:
        parser.error("--trials must be >= 1")
    report = check_loss_gradients(
        args.loss, n=args.n, trials=args.trials, tolerance=args.tol,
        seed=args.seed, d=args.d,
    )
    print(f"gradcheck loss={args.loss} n={args.n} d={args.d} trials={args.trials}")
    print(report.summary())
    return 0 if report.passed else 1


def _train_overrides(args) -> dict:
    overrides = {}
    if args.loss is not None:
        if args.loss == "ntxent" or args.loss == "div-temp":
            if args.tau is None:
                overrides["train.loss"] = {"kind": "fixed_tau", "tau": 0.5}
            else:
                overrides["train.loss"] = {"kind": "fixed_tau", "tau": args.tau}
        elif args.loss == "learnable":
            overrides["train.loss"] = {"kind": "learnable_t", "t": 0.0}
        else:
            overrides["train.loss"] = {"kind": "temperature_free"}
    elif args.tau is not None:
        overrides["train.loss"] = {"kind": "fixed_tau", "tau": args.tau}
    if args.epochs is not None:
        overrides["train.epochs"] = args.epochs
    if args.seed is not None:
        overrides["train.seed"] = args.seed
    return overrides


def cmd_train(args, parser) -> int:
    try:
        cfg = experiment.load_config(args.config, _train_overrides(args))
        weights, report = experiment.run_experiment(cfg)
    except DivergedLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ContrastLabError, json.JSONDecodeError, OSError, KeyError) as exc:
        parser.error(str(exc))

    payload = json.dumps(report.to_json_dict(), indent=2)
    if args.report:
        Path(args.report).write_text(payload + "\n")
        print(f"wrote {args.report}")
        if not args.no_plot:
            from .plotting import render_training

            plot_path = Path(args.report).with_suffix(".png")
            render_training(report.to_json_dict(), plot_path)
            print(f"wrote {plot_path}")
    else:
        print(payload)
    if args.weights:
        arrays = {f"w{i}": w for i, w in enumerate(weights)}
        np.savez(args.weights, **arrays)
        print(f"wrote {args.weights}")
    return 0


def _parse_list(text, kind):
    try:
        return [kind(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad list {text!r}")


def cmd_sweep(args, parser) -> int:
    try:
        cfg = experiment.load_config(args.config, {})
        if args.epochs is not None:
            cfg["train"]["epochs"] = args.epochs
        quiet = args.out is None
        progress = (lambda row: print(
            f"  {row['variant']} tau={row['tau']} seed={row['seed']}: {row['knn_acc']:.4f}",
            file=sys.stderr if quiet else sys.stdout,
        )) if args.verbose else None
        rows = experiment.run_sweep(
            cfg, taus=args.taus, seeds=args.seeds,
            include_temp_free=args.include_temp_free,
            include_learnable=args.include_learnable,
            progress=progress,
        )
    except DivergedLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ContrastLabError, json.JSONDecodeError, OSError, KeyError) as exc:
        parser.error(str(exc))

    def write_rows(stream):
        writer = csv.writer(stream)
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([
                row["variant"], _float_fmt(row["tau"]), row["seed"], _float_fmt(row["knn_acc"]),
            ])

    aggregates = experiment.sweep_aggregates(rows)
    agg_lines = [
        (f"{a['variant']}" + (f" tau={a['tau']:g}" if a["tau"] is not None else "")
         + f": {a['mean']:.4f} +/- {a['std']:.4f} over {a['runs']} seeds")
        for a in aggregates
    ]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_rows(fh)
        print(f"wrote {args.out}")
        if not args.no_plot:
            from .plotting import render_sweep

            plot_path = Path(args.out).with_suffix(".png")
            render_sweep(rows, plot_path)
            print(f"wrote {plot_path}")
        for line in agg_lines:
            print(line)
    else:
        write_rows(sys.stdout)
        for line in agg_lines:
            print(line, file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contrastlab",
        description="Contrastive-loss laboratory: curves, gradient checks, training, sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curves", help="emit closed-form scenario curves as CSV (+PNG)")
    p.add_argument("--variant", choices=sorted(CLI_VARIANTS), default="div-temp")
    p.add_argument("--tau", type=float, action="append", help="repeatable temperature")
    p.add_argument("--t", type=float, action="append", help="repeatable learnable scale")
    p.add_argument("--n", type=int, action="append", help="repeatable pair count")
    p.add_argument("--points", type=int, default=DEFAULT_GRID_POINTS)
    p.add_argument("--figure", type=int, choices=(2, 3, 4, 5),
                   help="preset parameter grid for a standard diagnostic figure")
    p.add_argument("--quantity", choices=("grad-scale", "loss"), default="grad-scale")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--plot", help="PNG path (default: alongside --out)")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("gradcheck", help="finite-difference check of analytical gradients")
    p.add_argument("--loss", choices=LOSS_KINDS, default="ntxent")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--d", type=int, default=4, help="input width for end-to-end checks")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="one contrastive run + kNN evaluation")
    p.add_argument("--config", help="JSON config file (merged over defaults)")
    p.add_argument("--loss", choices=("ntxent", "div-temp", "learnable", "temp-free"))
    p.add_argument("--tau", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--report", help="write the run report JSON here (default: stdout)")
    p.add_argument("--weights", help="save final weights as .npz")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("sweep", help="temperature grid: one train+eval per (tau, seed)")
    p.add_argument("--taus", type=lambda s: _parse_list(s, float),
                   default=list(experiment.TABLE_TAUS))
    p.add_argument("--seeds", type=lambda s: _parse_list(s, int),
                   default=list(experiment.DEFAULT_SEEDS))
    p.add_argument("--include-temp-free", action="store_true")
    p.add_argument("--include-learnable", action="store_true")
    p.add_argument("--config", help="JSON config file (merged over defaults)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "curves":
        try:
            return cmd_curves(args)
        except ContrastLabError as exc:
            parser.error(str(exc))
    if args.command == "gradcheck":
        return cmd_gradcheck(args, parser)
    if args.command == "train":
        return cmd_train(args, parser)
    return cmd_sweep(args, parser)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
