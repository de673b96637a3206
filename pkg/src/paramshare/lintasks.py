"""Synthetic linear tasks with known sharing structure.

* shift: valid-mode cross-correlation ``y[k] = sum_j x[k+j] g[j]``; the
  weight matrix is Toeplitz.
* denoise: randomly scaled and offset unit steps plus Gaussian noise.
* sum: position-weighted sums of integers, either all weights tied or
  tied separately on even and odd positions (even ones negated).

All weight vectors are ``Flatten(G)`` in row-major order with ``G`` of
shape ``(n_outputs, n_inputs)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .partition import Partition, identity_scheme, partition_distance, scheme_from_partition

SHIFT_NOISE_VAR = 0.1


def default_kernel(length):
    """Kernel growing by two per tap: 1, 3, 5, ..."""
    return np.arange(length, dtype=float) * 2 + 1


@dataclass
class ShiftTaskSpec:
    K_in: int
    kernel: np.ndarray = None
    noise_sigma: float = math.sqrt(SHIFT_NOISE_VAR)
    G_len: int = field(default=None)

    def __post_init__(self):
        if self.kernel is None:
            if self.G_len is None:
                raise ValueError("give a kernel or its length")
            self.kernel = default_kernel(self.G_len)
        self.kernel = np.asarray(self.kernel, dtype=float)
        self.G_len = len(self.kernel)
        if not 1 <= self.G_len <= self.K_in:
            raise ValueError(f"kernel length {self.G_len} must be in [1, K_in={self.K_in}]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def K_out(self):
        return self.K_in - self.G_len + 1


@dataclass
class DenoiseTaskSpec:
    K: int
    noise_sigma: float = 1.0
    scale_range: tuple = (1.0, 50.0)
    offset_range: tuple = (-5.0, 5.0)

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("signal length must be >= 2")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass
class SumTaskSpec:
    seq_len: int
    negated: bool = False
    noise_half_width: float = 0.5
    values: tuple = tuple(range(1, 11))

    def __post_init__(self):
        if self.seq_len < 1:
            raise ValueError("seq_len must be >= 1")

    def weights(self):
        w = np.ones(self.seq_len)
        if self.negated:
            w[0::2] = -1.0
        return w


@dataclass
class EvalReport:
    test_loss: float
    pd: int


# -- shift ----------------------------------------------------------------------

def crosscorr(x, g):
    """Valid-mode cross-correlation; works row-wise on 2-D ``x``."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or g.size < 1:
        raise ValueError("kernel must be a non-empty vector")
    if g.size > x.shape[-1]:
        raise ValueError(f"kernel of length {g.size} is longer than input {x.shape[-1]}")
    windows = np.lib.stride_tricks.sliding_window_view(x, g.size, axis=-1)
    return windows @ g


def toeplitz_matrix(g, K_in):
    """Matrix ``G`` with ``G @ x == crosscorr(x, g)``."""
    g = np.asarray(g, dtype=float)
    K_out = K_in - g.size + 1
    G = np.zeros((K_out, K_in))
    for k in range(K_out):
        G[k, k:k + g.size] = g
    return G


def gen_shift_data(spec, n, rng, with_noise=True):
    if n < 1:
        raise ValueError("n must be >= 1")
    X = rng.standard_normal((n, spec.K_in))
    Y = crosscorr(X, spec.kernel)
    if with_noise:
        Y = Y + spec.noise_sigma * rng.standard_normal(Y.shape)
    return X, Y


def toeplitz_gt_partition(K_in, G_len):
    """One cluster per kernel tap plus one for the structurally zero entries."""
    if not 1 <= G_len <= K_in:
        raise ValueError(f"need 1 <= G_len <= K_in, got {G_len}, {K_in}")
    K_out = K_in - G_len + 1
    labels = np.full((K_out, K_in), G_len, dtype=int)
    for k in range(K_out):
        labels[k, k:k + G_len] = np.arange(G_len)
    return Partition.from_labels(labels.ravel())


# -- denoise ----------------------------------------------------------------------

def gen_denoise_data(spec, n, rng):
    """Return (noisy inputs, clean targets), both ``(n, K)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    s = rng.uniform(*spec.scale_range, size=(n, 1))
    b = rng.uniform(*spec.offset_range, size=(n, 1))
    t = rng.integers(0, spec.K + 1, size=(n, 1))
    step = (np.arange(spec.K)[None, :] >= t).astype(float)  # U(0) = 1
    Y = s * step + b
    X = Y + spec.noise_sigma * rng.standard_normal(Y.shape)
    return X, Y


# -- sum of numbers ------------------------------------------------------------

def gen_sum_data(spec, n, rng, with_label_noise=True):
    """Integer sequences and their (possibly signed) sums, ``y`` of shape ``(n,)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    values = np.asarray(spec.values, dtype=float)
    X = values[rng.integers(0, values.size, size=(n, spec.seq_len))]
    y = X @ spec.weights()
    if with_label_noise:
        y = y + rng.uniform(-spec.noise_half_width, spec.noise_half_width, size=n)
    return X, y


def sum_gt_partition(seq_len, negated=False):
    if seq_len < 1:
        raise ValueError("seq_len must be >= 1")
    if not negated:
        return Partition.full(seq_len)
    return Partition.from_labels([i % 2 for i in range(seq_len)])


# -- baselines and evaluation -----------------------------------------------------

def baseline_scheme(kind, gt):
    """``"no-sharing"`` gives the identity, ``"oracle"`` the ground truth."""
    if kind == "no-sharing":
        return identity_scheme(gt.K)
    if kind == "oracle":
        return scheme_from_partition(gt)
    raise ValueError(f"unknown baseline {kind!r}")


def evaluate(result, X_test, Y_test, gt):
    """Mean squared test error of ``A psi`` and the partition distance to ``gt``."""
    X_test = np.asarray(X_test, dtype=float)
    Y_test = np.asarray(Y_test, dtype=float)
    if Y_test.ndim == 1:
        Y_test = Y_test[:, None]
    if X_test.ndim != 2 or X_test.shape[0] != Y_test.shape[0]:
        raise ValueError("test inputs and targets need matching row counts")
    theta = result.theta_final
    if theta.size != X_test.shape[1] * Y_test.shape[1]:
        raise ValueError(
            f"{theta.size} parameters do not fit a {Y_test.shape[1]}x{X_test.shape[1]} map")
    G = theta.reshape(Y_test.shape[1], X_test.shape[1])
    R = X_test @ G.T - Y_test
    return EvalReport(test_loss=float(np.mean(np.sum(R * R, axis=1))),
                      pd=partition_distance(result.partition, gt))
