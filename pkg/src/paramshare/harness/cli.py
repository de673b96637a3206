"""Command-line entry point.

Exit status is 0 on success, 1 for invalid input (bad flags, config or
partition files) and 2 when a run fails or a verified bound does not hold.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from ..discovery import DiscoveryError
from ..partition import partition_distance, read_partition
from .config import ConfigError, ExperimentConfig, load_config_file
from .runner import run_experiment, summarize, write_csv
from .verify import verify_chi2, verify_claim1, verify_claim2, verify_claim3

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("paramshare")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _dims(text):
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _common_flags():
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    add = p.add_argument
    add("--config", help="key=value file; flags override its values")
    add("--dims", type=_dims, help="dimension grid, e.g. '2,3,4,5,6'")
    add("--rank-gt", dest="rank_gt", type=int)
    add("--sigma", type=float)
    add("--n", dest="n_total", type=int, help="total samples (train + validation)")
    add("--train-ratio", dest="train_ratio", type=float)
    add("--runs", type=int)
    add("--seed", dest="base_seed", type=int)
    add("--method", dest="methods", help="comma-separated: brute,relaxed,no-sharing,oracle")
    add("--lambda-entropy", dest="lambda_entropy", type=float)
    add("--lambda-nuclear", dest="lambda_nuclear", type=float)
    add("--lr", dest="learning_rate", type=float)
    add("--weight-decay", dest="weight_decay", type=float)
    add("--epochs", type=int)
    add("--patience", type=int)
    add("--minibatch-frac", dest="minibatch_fraction", type=float)
    add("--kernel-len", dest="kernel_len", type=int)
    add("--seq-len", dest="seq_len", type=int)
    add("--negated", action="store_true")
    add("--alpha", type=float)
    add("--n-test", dest="n_test", type=int)
    add("--workers", type=int)
    add("--record-time", dest="record_time", action="store_true",
        help="store wall-clock times (makes the CSV non-reproducible)")
    add("--out", help="CSV output path")
    add("--plot", help="SVG output path")
    return p


def build_parser():
    common = _common_flags()
    parser = _Parser(prog="paramshare", description="Discover parameter sharing from data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in [("gaussian", "shared-mean estimation"),
                       ("shift", "cross-correlation regression"),
                       ("denoise", "step-signal denoising"),
                       ("sum", "sum-of-numbers regression")]:
        sub.add_parser(name, parents=[common], help=text)
    pd = sub.add_parser("pd", help="partition distance between two partition files")
    pd.add_argument("file1")
    pd.add_argument("file2")
    v = sub.add_parser("verify", parents=[common], help="check a theoretical guarantee")
    v.add_argument("claim", choices=["claim1", "claim2", "claim3", "chi2"])
    return parser


def make_config(experiment, args):
    """Experiment defaults, then the config file, then explicit flags."""
    values = {}
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "claim", "verbose")}
    path = flags.pop("config", None)
    if path:
        values.update(load_config_file(path))
    values.update(flags)
    values.pop("experiment", None)
    return ExperimentConfig.for_experiment(experiment, **values)


def _with_suffix(path, K, many):
    if not many:
        return path
    stem, ext = os.path.splitext(path)
    return f"{stem}_K{K}{ext}"


def _run_grid(config, out=print):
    many = len(config.dims) > 1
    series = {m: ([], [], []) for m in config.methods}
    for K in config.dims:
        records = run_experiment(config, K)
        if config.out:
            write_csv(records, _with_suffix(config.out, K, many))
        if config.runs >= 2:
            for m, s in summarize(records).items():
                out(f"K={K} {m:<10} runs={s.runs} mse={s.mse.mean:.6g} ± {s.mse.half_width:.3g}"
                    f" pd={s.pd.mean:.4g} ± {s.pd.half_width:.3g}")
                series[m][0].append(K)
                series[m][1].append(s.mse.mean)
                series[m][2].append(s.mse.half_width)
        else:
            for r in records:
                out(f"K={K} {r.method:<10} run={r.run_index} mse={r.mse:.6g} pd={r.pd}")
    if config.plot and config.runs >= 2:
        from .plot import emit_plot

        ylabel = "MSE" if config.experiment == "gaussian" else "test loss"
        emit_plot(series, config.plot, xlabel="K", ylabel=ylabel, title=config.experiment)
    return EXIT_OK


def _verify(claim, config, out=print):
    if claim == "claim1":
        report = verify_claim1(config)
    elif claim == "claim2":
        report = verify_claim2(config)
    elif claim == "claim3":
        report = verify_claim3(config.dims[0])
    else:
        report = verify_chi2(config)
    for line in report.lines():
        out(line)
    if claim == "claim2" and config.plot:
        from .plot import emit_plot

        xs, ys = report.details["curve"]
        emit_plot({f"bound, rank {config.rank_gt}": (xs, list(ys), None)}, config.plot,
                  xlabel="train ratio r", ylabel="MSE gap bound")
    return EXIT_OK if report.holds else EXIT_RUNTIME


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        if args.command == "pd":
            d = partition_distance(read_partition(args.file1), read_partition(args.file2))
            print(d)
            return EXIT_OK
        if args.command == "verify":
            config = make_config(f"verify-{args.claim}", args)
            return _verify(args.claim, config)
        return _run_grid(make_config(args.command, args))
    except (DiscoveryError, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
