"""Command line interface.

    parnet synth --set 1 --count 100 --points 500 --seed 7 --out set1.txt
    parnet train --data train.txt --net ppn --out ppn.bin
    parnet compare-param --set 1 --ppn ppn.bin --out table1.json --csv table1.csv
    parnet sweep-knots --set 3 --ppn ppn.bin --ksn ksn.bin --train-data train.txt --out sweep.json
    parnet approximate --input points.txt --ppn ppn.bin --ksn ksn.bin --kappa-threshold 5 --out curve.txt
    parnet export --report table1.json --out table1.csv

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Every flag can
also come from ``--config FILE`` (one ``key = value`` per line, keys are the
long flag names); flags given on the command line win.
"""

import argparse
import logging
import sys

import numpy as np

from parnet import evaluation
from parnet.datasets import Dataset, SynthesisConfig, build_eval_set, build_training_set
from parnet.exceptions import ParnetError
from parnet.geometry import curve_hausdorff
from parnet.io import read_curve, read_json, read_points, write_curve, write_json, write_points
from parnet.neural.models import (
    KnotSelector,
    PointParametrizer,
    ksn_dataset,
    load_estimator,
    save_estimator,
)
from parnet.pipeline import PipelineConfig, compute_kappa_threshold, parnet_approximate

logger = logging.getLogger("parnet")

# Network sizes and optimizer settings per training profile.
PROFILES = {
    "desk": {"ppn": {"hidden_sizes": (128, 128, 128), "learning_rate": 1e-3, "dropout": 0.0,
                     "epochs": 300, "batch_size": 256},
             "ksn": {"hidden_sizes": (64, 64, 64), "learning_rate": 1e-3, "dropout": 0.0,
                     "epochs": 100, "batch_size": 256}},
    "full": {"ppn": {"hidden_sizes": (1000, 1000, 1000), "learning_rate": 1e-4,
                      "dropout": 0.2, "epochs": 50, "batch_size": 256},
              "ksn": {"hidden_sizes": (500, 500, 500), "learning_rate": 1e-4,
                      "dropout": 0.2, "epochs": 50, "batch_size": 256}},
}


class UsageError(Exception):
    """Bad flag combination; reported with exit code 2."""


def _hidden(text):
    try:
        sizes = tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("hidden sizes must be positive")
    return sizes


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_eval_source(p, sets):
    p.add_argument("--data", help="evaluation dataset file (overrides --set)")
    p.add_argument("--set", type=int, choices=sets, default=sets[0])
    p.add_argument("--count", type=_positive_int, default=100)
    p.add_argument("--points", type=_positive_int, default=500)
    p.add_argument("--l", type=_positive_int, default=100, help="network input length")


def _add_kappa(p):
    p.add_argument("--kappa-threshold", type=float,
                   help="segmentation threshold on total curvature")
    p.add_argument("--train-data",
                   help="training dataset used to derive --kappa-threshold (98th percentile)")


def build_parser():
    parser = argparse.ArgumentParser(prog="parnet", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value file with default flag values")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = command("synth", "write a training or evaluation dataset")
    p.add_argument("--set", choices=["train", "1", "2", "3", "4"], default="train")
    p.add_argument("--count", type=_positive_int)
    p.add_argument("--points", type=_positive_int)
    p.add_argument("--sampling", choices=["uniform-arclength", "uniform-parameter"],
                   default="uniform-arclength", help="training-set sampling")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = command("train", "train a PPN or KSN")
    p.add_argument("--data", required=True, help="training dataset file")
    p.add_argument("--net", choices=["ppn", "ksn"], default="ppn")
    p.add_argument("--ppn", help="trained PPN (required for --net ksn)")
    p.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    p.add_argument("--hidden", type=_hidden)
    p.add_argument("--epochs", type=_positive_int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--batch-size", type=_positive_int)
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--log", help="history log (default: <out>.log)")
    p.set_defaults(func=cmd_train)

    p = command("compare-param", "single-span comparison of parametrizations")
    _add_eval_source(p, [1, 2])
    p.add_argument("--ppn")
    p.add_argument("--baselines-only", action="store_true")
    p.add_argument("--out", required=True, help="JSON report")
    p.add_argument("--csv", help="also write the per-instance table")
    p.set_defaults(func=cmd_compare_param)

    p = command("sweep-knots", "PARNET vs NKTP over a range of interior-knot counts")
    _add_eval_source(p, [3, 4])
    p.add_argument("--ppn")
    p.add_argument("--ksn")
    _add_kappa(p)
    p.add_argument("--min-knots", type=int, default=3)
    p.add_argument("--max-knots", type=int, default=23)
    p.add_argument("--out", required=True, help="JSON report")
    p.add_argument("--csv", help="also write the plot-data table")
    p.set_defaults(func=cmd_sweep_knots)

    p = command("approximate", "approximate one point sequence")
    p.add_argument("--input", required=True, help="point file, one x,y pair per line")
    p.add_argument("--ppn")
    p.add_argument("--ksn")
    _add_kappa(p)
    p.add_argument("--l", type=_positive_int, default=100)
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--max-knots", type=int, default=30)
    p.add_argument("--out", required=True, help="curve file")
    p.add_argument("--report", help="report file (default: <out>.report)")
    p.add_argument("--dense", help="write a dense sampling of the curve here")
    p.add_argument("--dense-count", type=_positive_int, default=1000)
    p.set_defaults(func=cmd_approximate)

    p = command("export", "convert a JSON report to CSV, or render curves as SVG")
    p.add_argument("--report", help="JSON report from compare-param or sweep-knots")
    p.add_argument("--input", help="point file to draw")
    p.add_argument("--curve", action="append", default=[], metavar="NAME=PATH",
                   help="curve file to draw; repeatable")
    p.add_argument("--svg", help="SVG output path")
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_export)
    return parser


def read_config(path):
    """Flat ``key = value`` pairs; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _subparser(parser, command):
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command]
    raise UsageError(f"unknown command {command!r}")


def _config_path(argv):
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def _apply_config(parser, argv):
    """Parse ``argv`` with defaults taken from the --config file, if any."""
    argv = list(sys.argv[1:] if argv is None else argv)
    path = _config_path(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    if path is None or command is None:
        return parser.parse_args(argv)
    sub = _subparser(parser, command)
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, text in read_config(path).items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise UsageError(f"{path}: unknown key {key!r} for {command}")
        if action.nargs == 0:
            value = text.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = action.type(text) if action.type else text
            except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{path}: bad value for {key}: {exc}")
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"{path}: {key} must be one of {list(action.choices)}")
        if action.required:
            action.required = False
        defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def resolved_config(args):
    return {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in sorted(vars(args).items()) if k != "func"}


def _load(path, kind, flag):
    if not path:
        raise UsageError(f"{flag} is required")
    return load_estimator(path, kind=kind)


def _eval_dataset(args):
    if args.data:
        return Dataset.load(args.data)
    return build_eval_set(args.set, args.count, args.points, seed=args.seed)


def _kappa_threshold(args):
    if args.kappa_threshold is not None:
        if not args.kappa_threshold > 0:
            raise UsageError("--kappa-threshold must be positive")
        return args.kappa_threshold
    if not args.train_data:
        raise UsageError("one of --kappa-threshold or --train-data is required")
    return compute_kappa_threshold(Dataset.load(args.train_data).points)


def cmd_synth(args):
    if args.set == "train":
        cfg = SynthesisConfig(samples_per_curve=args.points or 100, seed=args.seed,
                              training_sampling=args.sampling)
        ds = build_training_set(cfg, args.count or 10000)
    else:
        ds = build_eval_set(int(args.set), args.count or 100, args.points or 500,
                            seed=args.seed)
    ds.meta["cli"] = resolved_config(args)
    ds.save(args.out)
    print(f"wrote {len(ds)} instances of {ds.points.shape[1]} points to {args.out} "
          f"(train={int(np.sum(~ds.is_test))} test={int(np.sum(ds.is_test))})")


def cmd_train(args):
    if args.net == "ksn" and not args.ppn:
        raise UsageError("KSN training needs the trained PPN (--ppn)")
    params = dict(PROFILES[args.profile][args.net])
    for key, flag in (("hidden_sizes", "hidden"), ("epochs", "epochs"),
                      ("learning_rate", "learning_rate"), ("dropout", "dropout"),
                      ("batch_size", "batch_size")):
        if getattr(args, flag) is not None:
            params[key] = getattr(args, flag)
    ds = Dataset.load(args.data)
    if not ds.is_test.any():
        raise UsageError(f"{args.data} has no test split; use a training dataset")
    if args.net == "ppn":
        est = PointParametrizer(random_state=args.seed, verbose=args.verbose, **params)
        est.fit(ds.train.X, X_test=ds.test.X)
    else:
        rows = ksn_dataset(ds, load_estimator(args.ppn, kind="ppn"))
        est = KnotSelector(random_state=args.seed, verbose=args.verbose, **params)
        est.fit(rows[~ds.is_test], X_test=rows[ds.is_test])
    save_estimator(args.out, est)
    log = args.log or args.out + ".log"
    with open(log, "w", encoding="ascii", newline="\n") as fh:
        fh.write(est.history_text())
    first, last = est.history_[0], est.history_[-1]
    print(f"{args.net}: {len(est.history_)} epochs, {last[0]} steps, "
          f"test loss {first[2]:.6g} -> {last[2]:.6g}; model {args.out}, log {log}")


def _report_payload(report, args, kind):
    return {"kind": kind, "methods": report.methods, "means": report.means,
            "values": {m: report.values[m] for m in report.methods},
            "meta": report.meta, "config": resolved_config(args), "seed": args.seed}


def cmd_compare_param(args):
    if args.baselines_only:
        ppn, methods = None, list(evaluation.BASELINES)
    else:
        if not args.ppn:
            raise UsageError("--ppn is required unless --baselines-only is given")
        ppn, methods = load_estimator(args.ppn, kind="ppn"), None
    ds = _eval_dataset(args)
    report = evaluation.compare_parametrizations(ds, ppn, args.l, methods)
    write_json(args.out, _report_payload(report, args, "compare-param"))
    if args.csv:
        with open(args.csv, "w", encoding="ascii", newline="\n") as fh:
            fh.write(report.to_csv())
    for m, v in report.means.items():
        print(f"{m:12s} {v:.6f}")


def cmd_sweep_knots(args):
    ppn = _load(args.ppn, "ppn", "--ppn")
    ksn = _load(args.ksn, "ksn", "--ksn")
    if not 0 <= args.min_knots <= args.max_knots:
        raise UsageError("need 0 <= --min-knots <= --max-knots")
    kappa = _kappa_threshold(args)
    ds = _eval_dataset(args)
    report = evaluation.sweep_knots(ds, ppn, ksn, kappa,
                                    range(args.min_knots, args.max_knots + 1), args.l)
    payload = {"kind": "sweep-knots", "methods": report.methods + ["dpkp"],
               "knot_counts": report.knot_counts,
               "means": {m: report.means[m] for m in report.methods},
               "table": report.table(), "meta": report.meta,
               "config": resolved_config(args), "seed": args.seed}
    write_json(args.out, payload)
    if args.csv:
        with open(args.csv, "w", encoding="ascii", newline="\n") as fh:
            fh.write(report.to_csv())
    print("interior_knots " + " ".join(report.methods))
    for row in report.table():
        print(f"{row[0]:14d} " + " ".join(f"{v:.6f}" for v in row[1:]))


def cmd_approximate(args):
    ppn = _load(args.ppn, "ppn", "--ppn")
    ksn = _load(args.ksn, "ksn", "--ksn")
    kappa = _kappa_threshold(args)
    points = read_points(args.input)
    cfg = PipelineConfig(l=args.l, kappa_threshold=kappa, threshold=args.threshold,
                         max_knots=args.max_knots)
    curve, _, report = parnet_approximate(points, cfg, ppn, ksn)
    write_curve(args.out, curve)
    error = curve_hausdorff(curve, points, cfg.sampling_factor)
    lines = [report.to_text().rstrip("\n"), f"hausdorff={error!r}"]
    lines += [f"config.{k}={v}" for k, v in resolved_config(args).items()]
    with open(args.report or args.out + ".report", "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    if args.dense:
        write_points(args.dense, curve.sample(args.dense_count))
    print(f"{len(curve.control_points)} control points, "
          f"{curve.knot_vector.interior.size} interior knots, hausdorff {error:.6g}"
          + ("" if report.converged else " (knot budget exhausted)"))


def cmd_export(args):
    if not args.report and not args.curve:
        raise UsageError("export needs --report and/or --curve")
    if args.report:
        if not args.out:
            raise UsageError("--out is required with --report")
        payload = read_json(args.report)
        if payload.get("kind") == "sweep-knots":
            header = ["interior_knots"] + payload["methods"]
            rows = [list(r) + ["absent"] for r in payload["table"]]
        else:
            header = ["instance"] + payload["methods"]
            n = len(payload["values"][payload["methods"][0]])
            rows = [[i] + [float(payload["values"][m][i]) for m in payload["methods"]]
                    for i in range(n)]
            rows.append(["mean"] + [float(payload["means"][m]) for m in payload["methods"]])
        evaluation.export_csv(rows, header, args.out)
        print(f"wrote {len(rows)} rows to {args.out}")
    if args.curve:
        if not (args.svg and args.input):
            raise UsageError("--curve needs --input and --svg")
        curves = {}
        for item in args.curve:
            name, sep, path = item.partition("=")
            if not sep:
                raise UsageError(f"--curve expects NAME=PATH, got {item!r}")
            curves[name] = read_curve(path)
        with open(args.svg, "w", encoding="ascii") as fh:
            fh.write(evaluation.render_svg(read_points(args.input), curves))
        print(f"wrote {args.svg}")


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return exc.code
    except (UsageError, OSError) as exc:
        print(f"parnet: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"parnet {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ParnetError, OSError, ValueError) as exc:
        print(f"parnet {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
