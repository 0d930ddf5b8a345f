"""Command-line interface.

Subcommands: gen-data, train, suite, eval, scan-surface, analyze-memory.
Options can come from a key=value config file (--config) and are overridden
by explicit flags.  Every run prints its fully resolved configuration to
stderr before executing; stdout carries only data (CSV or a single number).

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import data as data_mod
from . import network as net
from . import optim
from . import surface as surface_mod
from .core import RngStream
from .experiment import (DivergenceError, TrainConfig, evaluate, run_suite,
                         train, write_aggregate_csv, write_metrics_csv)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


TRAIN_DEFAULTS = {
    "seed": 0,
    "optimizer": "rsgd",
    "schedule": "exp_gamma",
    "gamma0": 0.9995,
    "lambda": 0.0001,
    "a0": 1.0,
    "b0": 0.5,
    "rho": None,
    "eta0": 0.8,
    "beta": 0.999,
    "eta_floor": 0.02,
    "batch": 100,
    "epochs": 100,
    "train_count": 1000,
    "test_count": 1000,
    "arch": "100-400-200-10",
    "activation": "sigmoid",
    "loss": "quadratic",
    "metric": "mse",
    "checkpoint_epochs": "",
    "mnist_images": None,
    "mnist_labels": None,
    "data_train": None,
    "data_test": None,
    "out": None,
}

ADAM_ETA0 = 0.01
ADAM_FLOOR = 0.001


def _add_train_options(p: _Parser):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--optimizer", choices=["backprop", "rsgd", "sgdm", "nag", "adam"])
    p.add_argument("--schedule", choices=["exp_gamma", "power_law"])
    p.add_argument("--gamma0", type=float)
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--a0", type=float)
    p.add_argument("--b0", type=float)
    p.add_argument("--rho", help="momentum parameter (a number, or 'adaptive')")
    p.add_argument("--eta0", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--eta-floor", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--train-count", type=int)
    p.add_argument("--test-count", type=int)
    p.add_argument("--arch", help="layer widths, e.g. 100-400-200-10")
    p.add_argument("--activation", choices=["sigmoid", "relu"])
    p.add_argument("--loss", choices=["quadratic", "cross-entropy"])
    p.add_argument("--metric", choices=["mse", "classification"])
    p.add_argument("--checkpoint-epochs", help="comma-separated epoch list")
    p.add_argument("--mnist-images")
    p.add_argument("--mnist-labels")
    p.add_argument("--data-train")
    p.add_argument("--data-test")
    p.add_argument("--out")


def _read_config_file(path) -> dict:
    values = {}
    with open(path) as f:
        for line_no, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{line_no}: expected key = value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _coerce(key, value):
    if value is None or not isinstance(value, str):
        return value
    kind = type(TRAIN_DEFAULTS.get(key, ""))
    if TRAIN_DEFAULTS.get(key) is None or kind is str:
        return value
    if kind is int:
        return int(value)
    if kind is float:
        return float(value)
    return value


def _resolve_options(args) -> dict:
    opts = dict(TRAIN_DEFAULTS)
    if getattr(args, "config", None):
        for key, value in _read_config_file(args.config).items():
            if key not in TRAIN_DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
            opts[key] = _coerce(key, value)
    flag_map = {name: name for name in TRAIN_DEFAULTS}
    flag_map["lambda_"] = "lambda"
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            opts[key] = value
    return opts


def _print_resolved(opts: dict, command: str):
    print(f"# resolved configuration ({command})", file=sys.stderr)
    for key in sorted(opts):
        print(f"# {key} = {opts[key]}", file=sys.stderr)


def _build_schedule(opts) -> optim.Schedule:
    if opts["schedule"] == "power_law":
        return optim.PowerLawSchedule(a0=float(opts["a0"]), b0=float(opts["b0"]))
    return optim.ExpGammaSchedule(gamma0=float(opts["gamma0"]), lam=float(opts["lambda"]))


def _parse_arch_opts(opts) -> net.Architecture:
    try:
        widths = [int(w) for w in str(opts["arch"]).split("-")]
    except ValueError:
        raise UsageError(f"bad --arch value {opts['arch']!r}")
    loss = str(opts["loss"]).replace("-", "_")
    output_activation = "softmax" if loss == "cross_entropy" else "sigmoid"
    return net.Architecture(widths=widths, hidden_activation=opts["activation"],
                            output_activation=output_activation, loss=loss)


def _dataset_source(opts) -> tuple:
    if opts["mnist_images"] or opts["mnist_labels"]:
        if not (opts["mnist_images"] and opts["mnist_labels"]):
            raise UsageError("--mnist-images and --mnist-labels go together")
        return ("mnist", opts["mnist_images"], opts["mnist_labels"])
    if opts["data_train"] or opts["data_test"]:
        if not (opts["data_train"] and opts["data_test"]):
            raise UsageError("--data-train and --data-test go together")
        return ("files", opts["data_train"], opts["data_test"])
    return ("teacher",)


def _build_train_config(opts) -> TrainConfig:
    arch = _parse_arch_opts(opts)
    optimizer = opts["optimizer"]
    schedule = None
    rho = None
    if optimizer == "rsgd" or opts["rho"] == "adaptive":
        schedule = _build_schedule(opts)
    if optimizer in ("sgdm", "nag"):
        if opts["rho"] is None:
            raise UsageError(f"{optimizer} requires --rho (a number or 'adaptive')")
        rho = opts["rho"] if opts["rho"] == "adaptive" else float(opts["rho"])
    eta0, floor = float(opts["eta0"]), float(opts["eta_floor"])
    if optimizer == "adam" and eta0 == TRAIN_DEFAULTS["eta0"]:
        eta0, floor = ADAM_ETA0, ADAM_FLOOR  # paper's Adam step sizes unless overridden
    ckpt = tuple(int(e) for e in str(opts["checkpoint_epochs"]).split(",") if e != "")
    metric = "classification_error" if opts["metric"] == "classification" else opts["metric"]
    try:
        return TrainConfig(
            architecture=arch, optimizer=optimizer, schedule=schedule, rho=rho,
            eta0=eta0, beta=float(opts["beta"]), eta_floor=floor,
            batch_size=int(opts["batch"]), epochs=int(opts["epochs"]),
            train_count=int(opts["train_count"]), test_count=int(opts["test_count"]),
            seed=int(opts["seed"]), dataset_source=_dataset_source(opts),
            checkpoint_epochs=ckpt, metric=metric)
    except ValueError as exc:
        raise UsageError(str(exc))


def _cmd_gen_data(args) -> int:
    rng = RngStream(args.seed, "data-gen")
    train_set, test_set = data_mod.generate_teacher_dataset(
        args.n_in, args.n_out, args.count, rng)
    os.makedirs(args.out, exist_ok=True)
    data_mod.save_dataset(os.path.join(args.out, "train.bin"), train_set)
    data_mod.save_dataset(os.path.join(args.out, "test.bin"), test_set)
    print(f"# wrote {args.out}/train.bin ({len(train_set)} examples) and "
          f"{args.out}/test.bin ({len(test_set)} examples)", file=sys.stderr)
    return 0


def _cmd_train(args) -> int:
    opts = _resolve_options(args)
    _print_resolved(opts, "train")
    config = _build_train_config(opts)
    result = train(config)
    if opts["out"]:
        os.makedirs(opts["out"], exist_ok=True)
        write_metrics_csv(os.path.join(opts["out"], "metrics.csv"), result.history)
        net.save_checkpoint(os.path.join(opts["out"], "final.ckpt"),
                            config.architecture, result.params)
        for epoch, params in result.checkpoints.items():
            net.save_checkpoint(os.path.join(opts["out"], f"epoch_{epoch:04d}.ckpt"),
                                config.architecture, params)
    else:
        write_metrics_csv(sys.stdout, result.history)
    print(f"# final test error: {result.final_test_error}", file=sys.stderr)
    return 0


def _cmd_suite(args) -> int:
    opts = _resolve_options(args)
    _print_resolved(opts, "suite")
    optimizers = [o.strip() for o in args.optimizers.split(",")] if args.optimizers \
        else [opts["optimizer"]]
    configs = {}
    for name in optimizers:
        per = dict(opts)
        per["optimizer"] = name
        if name == "adam":
            per["eta0"] = TRAIN_DEFAULTS["eta0"]  # let the Adam default kick in
        configs[name] = _build_train_config(per)
    rows = run_suite(configs, n_runs=args.runs, jobs=args.jobs)
    if opts["out"]:
        os.makedirs(opts["out"], exist_ok=True)
        write_aggregate_csv(os.path.join(opts["out"], "aggregate.csv"), rows)
    else:
        write_aggregate_csv(sys.stdout, rows)
    return 0


def _load_eval_dataset(opts, which="data_test"):
    source = _dataset_source(opts)
    if source[0] == "mnist":
        return data_mod.load_mnist_idx(source[1], source[2])
    if source[0] == "files":
        return data_mod.load_dataset(opts[which])
    raise UsageError("eval and scan-surface need --data-test or --mnist-images/--mnist-labels")


def _cmd_eval(args) -> int:
    opts = _resolve_options(args)
    _print_resolved(opts, "eval")
    arch, params = net.load_checkpoint(args.checkpoint)
    dataset = _load_eval_dataset(opts)
    metric = "classification_error" if opts["metric"] == "classification" else opts["metric"]
    print(evaluate(params, arch, dataset, metric))
    return 0


def _cmd_scan_surface(args) -> int:
    opts = _resolve_options(args)
    _print_resolved(opts, "scan-surface")
    paths = args.checkpoints.split(",")
    if len(paths) != 4:
        raise UsageError(f"--checkpoints needs exactly 4 paths, got {len(paths)}")
    loaded = [net.load_checkpoint(p) for p in paths]
    arch = loaded[0][0]
    corners = [params for _, params in loaded]
    dataset = _load_eval_dataset(opts)
    metric = "classification_error" if opts["metric"] == "classification" else opts["metric"]
    grid = surface_mod.scan_surface(corners, args.resolution, arch, dataset, metric)
    surface_mod.write_surface_csv(opts["out"] or sys.stdout, grid)
    if grid.has_failures:
        print("# warning: some grid points failed to evaluate (NaN markers)", file=sys.stderr)
        return 2
    return 0


def _cmd_analyze_memory(args) -> int:
    opts = _resolve_options(args)
    _print_resolved(opts, "analyze-memory")
    schedule = _build_schedule(opts)
    pmf = optim.memory_length_pmf(schedule, args.t)
    out = open(opts["out"], "w") if opts["out"] else sys.stdout
    try:
        out.write("length,probability\n")
        for length, prob in enumerate(pmf):
            out.write(f"{length},{float(prob)!r}\n")
    finally:
        if opts["out"]:
            out.close()
    if args.simulate:
        rng = RngStream(int(opts["seed"]), "reinforcement")
        empirical = optim.simulate_memory_length(schedule, args.t, args.simulate, rng)
        tv = 0.5 * float(np.abs(empirical - pmf).sum())
        print(f"# simulated {args.simulate} runs: total-variation distance {tv:.5f}",
              file=sys.stderr)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="rsgd-lab",
                     description="Train feedforward networks with reinforced SGD and baselines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a teacher-network dataset")
    p.add_argument("--n-in", type=int, required=True)
    p.add_argument("--n-out", type=int, required=True)
    p.add_argument("--count", type=int, required=True, help="total examples (half train, half test)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="run one training experiment")
    _add_train_options(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("suite", help="multi-seed aggregation across optimizers")
    _add_train_options(p)
    p.add_argument("--optimizers", help="comma-separated optimizer list")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_suite)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    _add_train_options(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("scan-surface", help="bilinear-interpolation error surface scan")
    _add_train_options(p)
    p.add_argument("--checkpoints", required=True, help="4 comma-separated checkpoint paths")
    p.add_argument("--resolution", type=int, default=41)
    p.set_defaults(func=_cmd_scan_surface)

    p = sub.add_parser("analyze-memory", help="memory-length distribution of the reinforced rule")
    _add_train_options(p)
    p.add_argument("--t", type=int, required=True, help="step at which to evaluate the distribution")
    p.add_argument("--simulate", type=int, default=0,
                   help="also simulate this many coin-process runs and report TV distance")
    p.set_defaults(func=_cmd_analyze_memory)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
