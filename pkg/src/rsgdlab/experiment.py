"""Training runs: the epoch loop, metric evaluation, and multi-seed suites.

One run is fully described by a TrainConfig.  All randomness derives from the
config seed through purpose-labeled streams, so two configs differing only in
the optimizer consume identical initial weights, data, and shuffle order (the
reinforcement coins live on their own stream).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import data as data_mod
from . import network as net
from .core import RngStream
from .optim import (Adam, Nag, Rsgd, Schedule, Sgdm, VanillaSgd)

OPTIMIZERS = ("backprop", "rsgd", "sgdm", "nag", "adam")
METRICS = ("mse", "classification_error")

METRICS_CSV_HEADER = ["epoch", "train_error", "test_error", "eta", "gamma", "wall_time_s"]
AGGREGATE_CSV_HEADER = ["config_id", "metric_mean", "metric_std", "n_runs", "n_diverged"]


class DivergenceError(RuntimeError):
    """Training produced non-finite loss or weights."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class TrainConfig:
    architecture: net.Architecture
    optimizer: str = "backprop"
    schedule: Schedule | None = None          # rsgd, or adaptive sgdm/nag
    rho: float | str | None = None            # sgdm/nag: momentum value or "adaptive"
    eta0: float = 0.8
    beta: float = 0.999
    eta_floor: float = 0.02
    batch_size: int = 100
    epochs: int = 100
    train_count: int = 1000
    test_count: int = 1000
    seed: int = 0
    dataset_source: tuple = ("teacher",)      # ("teacher",) | ("mnist", imgs, lbls) | ("files", train, test)
    checkpoint_epochs: tuple = ()
    metric: str = "mse"

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if not (self.eta0 > 0 and self.eta_floor > 0):
            raise ValueError("eta0 and eta_floor must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.train_count % self.batch_size != 0:
            raise ValueError(
                f"batch size {self.batch_size} must divide train count {self.train_count}")
        if self.optimizer == "rsgd" and self.schedule is None:
            raise ValueError("rsgd needs a reinforcement schedule")
        if self.optimizer in ("sgdm", "nag"):
            if self.rho is None:
                raise ValueError(f"{self.optimizer} needs rho (a value or 'adaptive')")
            if self.rho == "adaptive" and self.schedule is None:
                raise ValueError("adaptive momentum needs a schedule")
        if self.dataset_source[0] not in ("teacher", "mnist", "files"):
            raise ValueError(f"unknown dataset source {self.dataset_source[0]!r}")
        if self.dataset_source[0] == "teacher" and self.train_count != self.test_count:
            raise ValueError("teacher datasets are split in half: train_count must equal test_count")


@dataclass
class MetricsRecord:
    epoch: int
    train_error: float
    test_error: float
    eta: float
    gamma: float
    wall_time_s: float


@dataclass
class TrainResult:
    config: TrainConfig
    history: list[MetricsRecord]
    params: list[np.ndarray]
    checkpoints: dict[int, list[np.ndarray]] = field(default_factory=dict)
    oracle_calls: int = 0

    @property
    def final_test_error(self) -> float:
        return self.history[-1].test_error


def evaluate(params, arch: net.Architecture, dataset: data_mod.LabeledDataset,
             metric: str, chunk: int = 2000) -> float:
    """Mean error over a dataset; forward passes chunked to bound memory."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    n = len(dataset)
    total = 0.0
    for start in range(0, n, chunk):
        x = dataset.inputs[start:start + chunk].T
        y_true = dataset.targets[start:start + chunk].T
        y = net.forward(params, arch, x).output
        if metric == "mse":
            eps = y_true - y
            total += 0.5 * float(np.sum(eps * eps))
        else:
            total += float(np.count_nonzero(np.argmax(y, axis=0) != np.argmax(y_true, axis=0)))
    return total / n


def build_datasets(config: TrainConfig) -> tuple[data_mod.LabeledDataset, data_mod.LabeledDataset]:
    source = config.dataset_source
    if source[0] == "teacher":
        rng = RngStream(config.seed, "data-gen")
        return data_mod.generate_teacher_dataset(
            config.architecture.n_in, config.architecture.n_out,
            2 * config.train_count, rng)
    if source[0] == "mnist":
        pool = data_mod.load_mnist_idx(source[1], source[2])
        rng = RngStream(config.seed, "data-gen")
        return data_mod.subsample(pool, config.train_count, config.test_count, rng)
    train = data_mod.load_dataset(source[1])
    test = data_mod.load_dataset(source[2])
    return train, test


def _batch_gradient(params, arch, x, y_true):
    trace = net.forward(params, arch, x)
    return net.backward(params, arch, trace, y_true)


def _make_optimizer(config: TrainConfig, params):
    if config.optimizer == "backprop":
        return VanillaSgd(params)
    if config.optimizer == "rsgd":
        rng = RngStream(config.seed, "reinforcement")
        return Rsgd(params, config.schedule, rng)
    if config.optimizer == "sgdm":
        return Sgdm(params, config.rho, config.schedule)
    if config.optimizer == "nag":
        return Nag(params, config.rho, config.schedule)
    return Adam(params)


def train(config: TrainConfig,
          datasets: tuple[data_mod.LabeledDataset, data_mod.LabeledDataset] | None = None,
          ) -> TrainResult:
    """Run the full epoch loop; raises DivergenceError on non-finite state."""
    arch = config.architecture
    if datasets is None:
        datasets = build_datasets(config)
    train_set, test_set = datasets
    if train_set.n_in != arch.n_in or train_set.n_out != arch.n_out:
        raise ValueError(
            f"dataset dimensions ({train_set.n_in}->{train_set.n_out}) do not match "
            f"architecture ({arch.n_in}->{arch.n_out})")

    params = net.init_params(arch, RngStream(config.seed, "weight-init"))
    optimizer = _make_optimizer(config, params)
    plan = data_mod.BatchPlan(len(train_set), config.batch_size,
                              RngStream(config.seed, "shuffle"))
    eta = max(config.eta0, config.eta_floor)

    def gamma_now(t, t_ep):
        return config.schedule.gamma(t, t_ep) if config.schedule is not None else 0.0

    checkpoints: dict[int, list[np.ndarray]] = {}
    if 0 in config.checkpoint_epochs:
        checkpoints[0] = [w.copy() for w in params]

    history = [MetricsRecord(
        epoch=0,
        train_error=evaluate(params, arch, train_set, config.metric),
        test_error=evaluate(params, arch, test_set, config.metric),
        eta=eta, gamma=gamma_now(0, 0), wall_time_s=0.0)]

    t = 0
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        t_ep = epoch - 1  # completed epochs while this one runs
        for idx in plan.epoch_batches():
            x = train_set.inputs[idx].T
            y_true = train_set.targets[idx].T
            if config.optimizer == "nag":
                deltas = optimizer.step(
                    params, eta,
                    lambda shifted: _batch_gradient(shifted, arch, x, y_true),
                    t_ep=t_ep)
            else:
                grads = _batch_gradient(params, arch, x, y_true)
                deltas = optimizer.step(grads, eta, t_ep=t_ep)
            params = [w + d for w, d in zip(params, deltas)]
            t += 1

        gamma_logged = gamma_now(t, t_ep)
        # epoch-boundary refresh: eta compounds by beta^epoch, floored
        eta = max(eta * config.beta ** epoch, config.eta_floor)

        train_error = evaluate(params, arch, train_set, config.metric)
        test_error = evaluate(params, arch, test_set, config.metric)
        record = MetricsRecord(epoch=epoch, train_error=train_error,
                               test_error=test_error, eta=eta,
                               gamma=gamma_logged,
                               wall_time_s=time.perf_counter() - started)
        history.append(record)
        if not (np.isfinite(train_error) and np.isfinite(test_error)
                and all(np.isfinite(w).all() for w in params)):
            raise DivergenceError(
                f"non-finite loss or weights at epoch {epoch}", history)
        if epoch in config.checkpoint_epochs:
            checkpoints[epoch] = [w.copy() for w in params]

    return TrainResult(config=config, history=history, params=params,
                       checkpoints=checkpoints,
                       oracle_calls=getattr(optimizer, "oracle_calls", 0))


@dataclass
class SuiteRow:
    config_id: str
    metric_mean: float
    metric_std: float
    n_runs: int
    n_diverged: int


def run_suite(configs: dict[str, TrainConfig], n_runs: int,
              jobs: int = 1) -> list[SuiteRow]:
    """Run each config n_runs times with seeds base+0..base+n-1, paired across configs."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    tasks = [(cid, replace(cfg, seed=cfg.seed + i))
             for cid, cfg in configs.items() for i in range(n_runs)]

    def one(task):
        cid, cfg = task
        try:
            return cid, train(cfg).final_test_error
        except DivergenceError:
            return cid, None

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_suite_task, tasks))
    else:
        outcomes = [one(task) for task in tasks]

    rows = []
    for cid in configs:
        values = [v for c, v in outcomes if c == cid and v is not None]
        diverged = sum(1 for c, v in outcomes if c == cid and v is None)
        if values:
            mean = float(np.mean(values))
            std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        else:
            mean, std = float("nan"), float("nan")
        rows.append(SuiteRow(config_id=cid, metric_mean=mean, metric_std=std,
                             n_runs=len(values), n_diverged=diverged))
    return rows


def _suite_task(task):
    cid, cfg = task
    try:
        return cid, train(cfg).final_test_error
    except DivergenceError:
        return cid, None


def _open_csv(dest):
    if hasattr(dest, "write"):
        return dest, False
    return open(dest, "w", newline=""), True


def write_metrics_csv(dest, history: list[MetricsRecord]) -> None:
    f, close = _open_csv(dest)
    try:
        writer = csv.writer(f)
        writer.writerow(METRICS_CSV_HEADER)
        for r in history:
            writer.writerow([r.epoch, repr(r.train_error), repr(r.test_error),
                             repr(r.eta), repr(r.gamma), f"{r.wall_time_s:.6f}"])
    finally:
        if close:
            f.close()


def write_aggregate_csv(dest, rows: list[SuiteRow]) -> None:
    f, close = _open_csv(dest)
    try:
        writer = csv.writer(f)
        writer.writerow(AGGREGATE_CSV_HEADER)
        for r in rows:
            writer.writerow([r.config_id, repr(r.metric_mean), repr(r.metric_std),
                             r.n_runs, r.n_diverged])
    finally:
        if close:
            f.close()
