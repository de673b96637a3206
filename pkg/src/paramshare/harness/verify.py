"""Monte-Carlo and exhaustive checks of the theoretical guarantees."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..discovery import LinearSharedTask, discover_brute_force, discover_relaxed
from ..gaussian import (
    GaussianTask,
    chi2_tail_check,
    claim2_bound,
    claim2_curve,
    gen_gaussian,
    mc_mse,
    mse_closed_form,
)
from ..numerics import derive_rng
from ..partition import (
    MAX_ENUMERATE_K,
    CapacityError,
    enumerate_partitions,
    identity_scheme,
    partition_distance,
    random_partition,
    scheme_from_partition,
    symmetric_difference_size,
)

CLAIM3_MAX_K = 4
CLAIM2_BRUTE_MAX_K = 8


@dataclass
class VerifyReport:
    name: str
    holds: bool
    rows: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def lines(self):
        yield f"{self.name}: {'holds' if self.holds else 'FAILS'}"
        for row in self.rows:
            yield "  " + "  ".join(f"{k}={_fmt(v)}" for k, v in row.items())
        for k, v in self.details.items():
            if k != "curve":
                yield f"  {k}={_fmt(v)}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def verify_claim1(config, n_configs=20, n_se=3.0):
    """Monte-Carlo MSE of cluster averaging against its closed form.

    Draws ``n_configs`` random pairs of (fitted scheme, ground truth) at
    ``K = config.dims[0]``, plus the identity scheme as a fixed first case.
    """
    K = config.dims[0]
    rows = []
    for c in range(n_configs + 1):
        rng = derive_rng(config.base_seed, c)
        gtask = GaussianTask.random(K, int(rng.integers(1, K + 1)), rng, sigma=config.sigma)
        if c == 0:
            scheme, label = identity_scheme(K), "identity"
        else:
            P = random_partition(K, int(rng.integers(1, K + 1)), rng)
            scheme, label = scheme_from_partition(P), str(P)
        exact = mse_closed_form(scheme, gtask.theta_gt, config.sigma, config.n_total)
        mse, se = mc_mse(scheme, gtask, config.n_total, config.runs, rng)
        rows.append(dict(scheme=label, closed_form=exact, monte_carlo=mse, se=se,
                         ok=abs(mse - exact) <= n_se * se))
    return VerifyReport("claim1", all(r["ok"] for r in rows), rows)


def verify_claim2(config, method=None, ratios=None):
    """Empirical MSE gap of the validation-selected scheme against the bound.

    The gap is ``mean ||theta_val - theta_gt||^2 - mean ||theta_gtscheme - theta_gt||^2``
    where both estimators are fit on all ``n_total`` samples. Exhaustive
    search is used up to ``K = 8``; larger ``K`` uses the relaxed search.
    """
    K = config.dims[0]
    bound = claim2_bound(config.rank_gt, config.sigma, config.n_total, config.train_ratio,
                         config.alpha, K=K)
    if method is None:
        method = "brute" if K <= CLAIM2_BRUTE_MAX_K else "relaxed"
    if method == "brute" and K > MAX_ENUMERATE_K:
        raise CapacityError(f"brute force needs K <= {MAX_ENUMERATE_K}, got {K}")
    n_train, _ = config.split()
    hp = config.hyperparams()
    err_val, err_gt = [], []
    for i in range(config.runs):
        rng = derive_rng(config.base_seed, i)
        gtask = GaussianTask.random(K, config.rank_gt, rng, sigma=config.sigma)
        data = gen_gaussian(gtask, config.n_total, rng)
        task = LinearSharedTask.mean(data[:n_train], data[n_train:])
        if method == "brute":
            result = discover_brute_force(task)
        else:
            result = discover_relaxed(task, hp, rng)
        e = result.theta_final - gtask.theta_gt
        err_val.append(float(e @ e))
        labels = np.asarray(gtask.gt_partition.labels())
        per = np.bincount(labels, weights=data.mean(axis=0)) / np.bincount(labels)
        e = per[labels] - gtask.theta_gt
        err_gt.append(float(e @ e))
    gap = float(np.mean(err_val) - np.mean(err_gt))
    if ratios is None:
        ratios = np.round(np.linspace(0.05, 0.95, 19), 4)
    curve = claim2_curve(config.rank_gt, config.sigma, config.n_total, config.alpha, ratios)
    return VerifyReport(
        "claim2", gap <= bound,
        details=dict(method=method, K=K, runs=config.runs, mse_selected=float(np.mean(err_val)),
                     mse_ground_truth=float(np.mean(err_gt)), gap=gap, bound=bound,
                     curve=(list(map(float, ratios)), list(map(float, curve)))))


def verify_claim3(K=4):
    """Exhaustive check of ``PD <= |G1 ^ G2| <= (K! - 1) PD`` over distinct pairs."""
    if K > CLAIM3_MAX_K:
        raise CapacityError(f"exhaustive claim-3 check needs K <= {CLAIM3_MAX_K}, got {K}")
    parts = list(enumerate_partitions(K))
    kappa = math.factorial(K) - 1
    failures = []
    n_pairs = 0
    for P1, P2 in itertools.combinations(parts, 2):
        n_pairs += 1
        pd = partition_distance(P1, P2)
        sd = symmetric_difference_size(P1, P2)
        if not pd <= sd <= kappa * pd:
            failures.append(dict(p1=str(P1), p2=str(P2), pd=pd, sym_diff=sd))
    return VerifyReport("claim3", not failures, failures,
                        details=dict(K=K, pairs=n_pairs, kappa=kappa))


def verify_chi2(config, ts=(1, 2)):
    """Empirical chi-squared tails ``P(U >= 2tK)`` against ``exp(-tK/10)``."""
    rows = []
    for j, (K, t) in enumerate(itertools.product(config.dims, ts)):
        emp, bound = chi2_tail_check(K, t, config.runs, derive_rng(config.base_seed, j))
        rows.append(dict(K=K, t=t, empirical=emp, bound=bound, ok=emp <= bound))
    return VerifyReport("chi2", all(r["ok"] for r in rows), rows)
