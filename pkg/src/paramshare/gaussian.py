"""Gaussian vectors with a shared mean.

Samples are ``y ~ N(theta_gt, sigma^2 I)`` with ``theta_gt`` constant on
the clusters of a ground-truth partition. Sharing a mean across a cluster
of the fitted scheme means averaging over those coordinates and samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import rng_normal
from .partition import Partition, validate_scheme


@dataclass
class GaussianTask:
    gt_partition: Partition
    psi_gt: np.ndarray
    sigma: float = 1.0
    theta_gt: np.ndarray = field(init=False)

    def __post_init__(self):
        self.psi_gt = np.asarray(self.psi_gt, dtype=float)
        if self.psi_gt.shape != (self.K,):
            raise ValueError(f"psi_gt must have length K={self.K}")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        self.theta_gt = self.psi_gt[list(self.gt_partition.labels())]

    @property
    def K(self):
        return self.gt_partition.K

    @classmethod
    def random(cls, K, rank_gt, rng, sigma=1.0, low=-1.0, high=1.0):
        """Random partition with exactly ``rank_gt`` clusters and cluster
        means drawn uniformly from ``[low, high]``."""
        from .partition import random_partition

        P = random_partition(K, rank_gt, rng)
        psi = np.zeros(K)
        psi[:rank_gt] = rng.uniform(low, high, size=rank_gt)
        return cls(P, psi, sigma)


@dataclass
class MeanEstimate:
    theta_hat: np.ndarray
    psi_hat: np.ndarray
    scheme: np.ndarray


def gen_gaussian(task, n, rng):
    """``n`` i.i.d. samples as an ``(n, K)`` array."""
    if n < 1:
        raise ValueError("n must be >= 1")
    noise = rng_normal(rng, n * task.K, 0.0, task.sigma).reshape(n, task.K)
    return task.theta_gt + noise


def _check_samples(data, K):
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[None, :]
    if data.ndim != 2 or data.shape[1] != K:
        raise ValueError(f"samples must have {K} columns, got shape {data.shape}")
    if data.shape[0] < 1:
        raise ValueError("need at least one sample")
    return data


def cluster_average(labels, values, n_clusters=None):
    """Mean of ``values`` within each label; returns (per-cluster, per-element)."""
    labels = np.asarray(labels, dtype=int)
    n_clusters = labels.max() + 1 if n_clusters is None else n_clusters
    sums = np.bincount(labels, weights=values, minlength=n_clusters)
    counts = np.bincount(labels, minlength=n_clusters)
    means = np.divide(sums, counts, out=np.zeros(n_clusters), where=counts > 0)
    return means, means[labels]


def mle_shared_mean(scheme, data):
    """Maximum-likelihood mean under a binary sharing scheme."""
    A = validate_scheme(scheme)
    data = _check_samples(data, A.shape[0])
    cols = np.argmax(A, axis=1)
    per_col, theta = cluster_average(cols, data.mean(axis=0), n_clusters=A.shape[1])
    return MeanEstimate(theta_hat=theta, psi_hat=per_col, scheme=A)


def validation_loss(theta_hat, val):
    """Summed squared distance of ``theta_hat`` to every validation sample."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    val = _check_samples(val, theta_hat.shape[0])
    return float(np.sum((val - theta_hat) ** 2))


def mse_closed_form(scheme, theta_gt, sigma, n):
    """Squared bias of cluster averaging plus ``rank * sigma^2 / n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    A = validate_scheme(scheme).astype(float)
    theta_gt = np.asarray(theta_gt, dtype=float)
    col_sum = A.sum(axis=0)
    A_bar = A / np.where(col_sum > 0, col_sum, 1.0)
    bias = A @ (A_bar.T @ theta_gt) - theta_gt
    rank = int(np.count_nonzero(col_sum))
    return float(bias @ bias + rank * sigma ** 2 / n)


def mc_mse(scheme, task, n, runs, rng, chunk=2000):
    """Monte-Carlo MSE of the shared-mean MLE.

    Returns
    -------
    mse : float
    stderr : float
    """
    if runs < 2:
        raise ValueError("runs must be >= 2")
    A = validate_scheme(scheme)
    cols = np.argmax(A, axis=1)
    counts = np.bincount(cols, minlength=task.K).astype(float)
    errs = []
    done = 0
    while done < runs:
        m = min(chunk, runs - done)
        noise = rng_normal(rng, m * n * task.K, 0.0, task.sigma).reshape(m, n, task.K)
        means = (task.theta_gt + noise).mean(axis=1)  # (m, K)
        sums = np.zeros((m, task.K))
        np.add.at(sums.T, cols, means.T)
        per_col = sums / np.where(counts > 0, counts, 1.0)
        theta = per_col[:, cols]
        errs.append(np.sum((theta - task.theta_gt) ** 2, axis=1))
        done += m
    errs = np.concatenate(errs)
    return float(errs.mean()), float(errs.std(ddof=1) / math.sqrt(runs))


def claim2_bound(rank_gt, sigma, n_total, r, alpha, K=None):
    """Finite-sample upper bound on the MSE gap to the ground-truth scheme.

    ``K``, when given, enforces ``alpha < exp(-K / 10)``.
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if K is not None and not alpha < math.exp(-K / 10):
        raise ValueError(f"alpha={alpha} must be below exp(-K/10)={math.exp(-K / 10):.4g}")
    sharing = (1 - r) / (r * n_total) * (rank_gt - 1)
    confidence = -40 * math.log(alpha) / ((1 - r) * n_total)
    return sigma ** 2 * (sharing + confidence)


def claim2_curve(rank_gt, sigma, n_total, alpha, ratios):
    return np.array([claim2_bound(rank_gt, sigma, n_total, r, alpha) for r in ratios])


def chi2_tail_check(K, t, samples, rng):
    """Empirical ``P(U >= 2 t K)`` for ``U ~ chi^2_K`` against ``exp(-t K / 10)``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if samples < 10_000:
        raise ValueError("use at least 1e4 samples")
    z = rng.standard_normal((samples, K))
    u = np.sum(z * z, axis=1)
    return float(np.mean(u >= 2 * t * K)), math.exp(-t * K / 10)
