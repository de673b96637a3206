"""Seeded experiment runs, aggregation and CSV records."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..discovery import (
    LinearSharedTask,
    discover_brute_force,
    discover_fixed,
    discover_relaxed,
)
from ..gaussian import GaussianTask, gen_gaussian
from ..lintasks import (
    DenoiseTaskSpec,
    ShiftTaskSpec,
    SumTaskSpec,
    evaluate,
    gen_denoise_data,
    gen_shift_data,
    gen_sum_data,
    sum_gt_partition,
    toeplitz_gt_partition,
)
from ..numerics import derive_rng
from ..partition import Partition, partition_distance

CSV_COLUMNS = ("run", "seed", "method", "metric_mse", "metric_pd", "epochs", "wall_time_s")


@dataclass(frozen=True)
class RunRecord:
    run_index: int
    seed: int
    method: str
    mse: float
    pd: int
    wall_time: float = 0.0
    epochs: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.mse) and math.isfinite(self.wall_time)):
            raise ValueError(f"non-finite metric in run {self.run_index}")


@dataclass(frozen=True)
class Stat:
    mean: float
    sd: float
    half_width: float
    n: int


@dataclass(frozen=True)
class Summary:
    """Per-method aggregate with normal-approximation 95% intervals."""

    method: str
    runs: int
    mse: Stat
    pd: Stat


def describe(values):
    """Mean, sample standard deviation and 95% half-width ``1.96 sd / sqrt(n)``."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("need at least 2 values for a confidence interval")
    sd = float(v.std(ddof=1))
    return Stat(mean=float(v.mean()), sd=sd, half_width=1.96 * sd / math.sqrt(v.size), n=v.size)


def summarize(records):
    """``{method: Summary}`` in order of first appearance."""
    by_method = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r)
    out = {}
    for method, recs in by_method.items():
        if len(recs) < 2:
            raise ValueError(f"method {method!r} has {len(recs)} record; need at least 2")
        out[method] = Summary(method=method, runs=len(recs),
                              mse=describe([r.mse for r in recs]),
                              pd=describe([r.pd for r in recs]))
    return out


# -- single runs ------------------------------------------------------------------

def _discover(method, task, gt, config, rng):
    if method == "relaxed":
        return discover_relaxed(task, config.hyperparams(), rng)
    if method == "brute":
        return discover_brute_force(task)
    if method == "no-sharing":
        return discover_fixed(task, Partition.singletons(task.K))
    if method == "oracle":
        return discover_fixed(task, gt)
    raise ValueError(f"unknown method {method!r}")


def _gaussian_problem(config, K, rng):
    gtask = GaussianTask.random(K, config.rank_gt, rng, sigma=config.sigma)
    data = gen_gaussian(gtask, config.n_total, rng)
    n_train, _ = config.split()
    task = LinearSharedTask.mean(data[:n_train], data[n_train:])

    def score(result):
        err = result.theta_final - gtask.theta_gt
        return float(err @ err)

    return task, gtask.gt_partition, score


def _regression_problem(config, K, rng):
    n_train, n_val = config.split()
    if config.experiment == "shift":
        spec = ShiftTaskSpec(K, G_len=config.kernel_len)
        X, Y = gen_shift_data(spec, config.n_total, rng)
        X_test, Y_test = gen_shift_data(spec, config.n_test, rng, with_noise=False)
        gt = toeplitz_gt_partition(K, config.kernel_len)
    elif config.experiment == "denoise":
        spec = DenoiseTaskSpec(K, noise_sigma=config.sigma)
        X, Y = gen_denoise_data(spec, config.n_total, rng)
        X_test, Y_test = gen_denoise_data(spec, config.n_test, rng)
        gt = Partition.singletons(K * K)
    elif config.experiment == "sum":
        spec = SumTaskSpec(config.seq_len, negated=config.negated)
        X, Y = gen_sum_data(spec, config.n_total, rng)
        X_test, Y_test = gen_sum_data(spec, config.n_test, rng, with_label_noise=False)
        gt = sum_gt_partition(config.seq_len, config.negated)
    else:
        raise ValueError(f"{config.experiment!r} is not a regression experiment")
    Y = Y.reshape(len(Y), -1)
    task = LinearSharedTask.regression(X[:n_train], Y[:n_train], X[n_train:], Y[n_train:])

    def score(result):
        return evaluate(result, X_test, Y_test, gt).test_loss

    return task, gt, score


def run_single(config, K, run_index):
    """All configured methods on the dataset of one run index.

    Every method sees the same dataset; the relaxed search draws its
    initialization from the same run stream after data generation.
    """
    records = []
    for method in config.methods:
        rng = derive_rng(config.base_seed, run_index)
        if config.experiment == "gaussian":
            task, gt, score = _gaussian_problem(config, K, rng)
        else:
            task, gt, score = _regression_problem(config, K, rng)
        start = time.perf_counter()
        result = _discover(method, task, gt, config, rng)
        elapsed = time.perf_counter() - start
        records.append(RunRecord(
            run_index=run_index, seed=config.base_seed, method=method,
            mse=score(result), pd=partition_distance(result.partition, gt),
            wall_time=elapsed if config.record_time else 0.0, epochs=result.epochs))
    return records


def run_experiment(config, K=None):
    """Run ``config.runs`` seeded repetitions at dimension ``K``.

    ``K`` defaults to the first entry of ``config.dims``. Records come back
    sorted by run index and method order, whatever the worker count.
    """
    config.validate()
    K = config.dims[0] if K is None else K
    if config.workers == 1:
        chunks = [run_single(config, K, i) for i in range(config.runs)]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(lambda i: run_single(config, K, i), range(config.runs)))
    order = {m: j for j, m in enumerate(config.methods)}
    records = [r for chunk in chunks for r in chunk]
    return sorted(records, key=lambda r: (r.run_index, order[r.method]))


# -- CSV ----------------------------------------------------------------------------

def write_csv(records, path):
    """Write records with a header row; floats use round-trip ``repr``."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in records:
                w.writerow([r.run_index, r.seed, r.method, repr(float(r.mse)), r.pd,
                            r.epochs, repr(float(r.wall_time))])
    except OSError as exc:
        raise OSError(f"cannot write CSV {path}: {exc.strerror}") from exc


def read_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise OSError(f"cannot read CSV {path}: {exc.strerror}") from exc
    return [RunRecord(run_index=int(row["run"]), seed=int(row["seed"]), method=row["method"],
                      mse=float(row["metric_mse"]), pd=int(row["metric_pd"]),
                      epochs=int(row["epochs"]), wall_time=float(row["wall_time_s"]))
            for row in rows]
