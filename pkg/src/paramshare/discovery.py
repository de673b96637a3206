"""Learning a parameter-sharing scheme by bi-level optimization.

The model is linear, ``Y = X G^T`` with ``G`` of shape ``(Q, P)``, and its
parameters ``theta = Flatten(G)`` (row-major, length ``K = Q * P``) are tied
through ``theta = A psi``. Mean estimation is the special case ``X = 1``,
``P = 1``, ``Q = K``.

The upper level picks ``A`` to minimize the summed squared error on a
validation split; the lower level fits ``psi`` on the training split in
closed form. Two searches are provided: exhaustive enumeration of all
partitions and a relaxed gradient method over row-softmax logits.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    PINV_RTOL,
    AdamState,
    adam_step,
    as_matrix,
    entropy_penalty,
    pseudo_inverse,
    row_softmax,
    row_softmax_backward,
    solve_least_squares,
)
from .partition import (
    BELL,
    MAX_ENUMERATE_K,
    CapacityError,
    Partition,
    partition_from_scheme,
    rgs_array,
    scheme_from_partition,
    validate_scheme,
)

logger = logging.getLogger(__name__)

LOWER_SOLVERS = ("soft", "pinv")


class DiscoveryError(RuntimeError):
    pass


# -- tasks --------------------------------------------------------------------

@dataclass
class _Stats:
    """Sufficient statistics of a squared loss ``sum ||X G^T - Y||^2``."""

    xtx: np.ndarray   # (P, P)
    xty: np.ndarray   # (P, Q)
    yty: float
    n: int

    @classmethod
    def of(cls, X, Y):
        return cls(X.T @ X, X.T @ Y, float(np.sum(Y * Y)), X.shape[0])

    def loss(self, G):
        return float(np.sum((G @ self.xtx) * G) - 2 * np.sum(G * self.xty.T) + self.yty)

    def grad(self, G):
        return 2 * (G @ self.xtx - self.xty.T)


@dataclass
class LinearSharedTask:
    """Train/validation split of a linear task with ``K = Q * P`` parameters.

    Use :meth:`mean` for mean estimation and :meth:`regression` for a
    linear map. ``lower_mode`` selects how the training fit is computed
    ("two-step": least squares then projection onto the scheme; "direct":
    exact least squares over ``psi``).
    """

    kind: str
    X_train: np.ndarray
    Y_train: np.ndarray
    X_val: np.ndarray
    Y_val: np.ndarray
    lower_mode: str = "two-step"
    _target: np.ndarray = field(default=None, init=False, repr=False)
    _val_stats: _Stats = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("mean", "regression"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.lower_mode not in ("two-step", "direct"):
            raise ValueError(f"unknown lower mode {self.lower_mode!r}")
        self.X_train = as_matrix(self.X_train, "X_train")
        self.Y_train = as_matrix(self.Y_train, "Y_train")
        self.X_val = as_matrix(self.X_val, "X_val")
        self.Y_val = as_matrix(self.Y_val, "Y_val")
        for X, Y, name in ((self.X_train, self.Y_train, "train"),
                           (self.X_val, self.Y_val, "validation")):
            if X.shape[0] != Y.shape[0] or X.shape[0] < 1:
                raise ValueError(f"{name} inputs and targets need matching, non-zero row counts")
        if self.X_val.shape[1] != self.P or self.Y_val.shape[1] != self.Q:
            raise ValueError("train and validation shapes disagree")

    @classmethod
    def mean(cls, train, val):
        train = as_matrix(np.atleast_2d(train), "train")
        val = as_matrix(np.atleast_2d(val), "val")
        return cls("mean", np.ones((len(train), 1)), train, np.ones((len(val), 1)), val)

    @classmethod
    def regression(cls, X_train, Y_train, X_val, Y_val, lower_mode="two-step"):
        return cls("regression", X_train, Y_train, X_val, Y_val, lower_mode=lower_mode)

    @property
    def P(self):
        return self.X_train.shape[1]

    @property
    def Q(self):
        return self.Y_train.shape[1]

    @property
    def K(self):
        return self.P * self.Q

    @property
    def X_full(self):
        return np.vstack([self.X_train, self.X_val])

    @property
    def Y_full(self):
        return np.vstack([self.Y_train, self.Y_val])

    def target(self):
        """Unconstrained training solution ``Flatten(G*)``."""
        if self._target is None:
            W = solve_least_squares(self.X_train, self.Y_train)  # (P, Q)
            self._target = W.T.reshape(-1)
        return self._target

    def val_stats(self):
        if self._val_stats is None:
            self._val_stats = _Stats.of(self.X_val, self.Y_val)
        return self._val_stats

    def as_weights(self, theta):
        return np.asarray(theta, dtype=float).reshape(self.Q, self.P)

    def loss(self, theta, X, Y):
        """Summed squared prediction error of parameters ``theta`` on ``(X, Y)``."""
        R = X @ self.as_weights(theta).T - Y
        return float(np.sum(R * R))


# -- lower level ----------------------------------------------------------------

def _soft_project(A, m):
    """``A Abar^T m`` with ``Abar`` the column-normalized ``A``."""
    c = A.sum(axis=0)
    psi = (A.T @ m) / np.where(c > 0, c, 1.0)
    return psi


def _lower_from_target(A, m, solver):
    if solver == "soft":
        return _soft_project(A, m)
    if solver == "pinv":
        return pseudo_inverse(A) @ m
    raise ValueError(f"unknown lower solver {solver!r}; expected one of {LOWER_SOLVERS}")


def lower_solve_mean(A, train, solver="pinv"):
    """Free parameters fit to training samples: ``psi = A^+ mean(train)``.

    ``solver="soft"`` replaces ``A^+`` with the column-normalized transpose,
    which is the same matrix for any binary scheme.
    """
    A = as_matrix(A, "A")
    train = as_matrix(np.atleast_2d(train), "train")
    if A.shape != (train.shape[1], train.shape[1]):
        raise ValueError(f"A has shape {A.shape}, data has {train.shape[1]} columns")
    return _lower_from_target(A, train.mean(axis=0), solver)


def _direct_design(A, X, Q):
    """Design matrix mapping ``psi`` to stacked predictions ``vec(X G^T)``."""
    P = X.shape[1]
    A3 = A.reshape(Q, P, A.shape[1])
    Z = np.einsum("np,qpk->nqk", X, A3)
    return Z.reshape(X.shape[0] * Q, A.shape[1])


def lower_solve_regression(A, X, Y, mode="two-step", solver="pinv"):
    """Fit ``psi`` for ``theta = A psi`` on inputs ``X`` and targets ``Y``.

    ``mode="two-step"`` solves the unconstrained least squares ``G*`` and
    returns ``A^+ Flatten(G*)``; ``mode="direct"`` minimizes
    ``||X G(A psi)^T - Y||^2`` over ``psi`` exactly.
    """
    A = as_matrix(A, "A")
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y row counts differ")
    K = X.shape[1] * Y.shape[1]
    if A.shape[0] != K:
        raise ValueError(f"A has {A.shape[0]} rows, model has {K} parameters")
    if mode == "two-step":
        m = solve_least_squares(X, Y).T.reshape(-1)
        return _lower_from_target(A, m, solver)
    if mode == "direct":
        Z = _direct_design(A, X, Y.shape[1])
        return solve_least_squares(Z, Y.reshape(-1)).ravel()
    raise ValueError(f"unknown mode {mode!r}")


def fit_scheme(task, A, on="train", mode=None):
    """Fit ``psi`` for a fixed scheme on the train split or on all data."""
    mode = mode or task.lower_mode
    if on == "train":
        X, Y = task.X_train, task.Y_train
    elif on == "full":
        X, Y = task.X_full, task.Y_full
    else:
        raise ValueError(on)
    if mode == "two-step" and on == "train":
        return _lower_from_target(np.asarray(A, dtype=float), task.target(), "pinv")
    return lower_solve_regression(A, X, Y, mode=mode)


# -- results and hyperparameters -----------------------------------------------

@dataclass
class RelaxHyperparams:
    learning_rate: float = 2e-2
    weight_decay: float = 1e-4
    lambda_entropy: float = 0.01
    lambda_nuclear: float = 0.01
    max_epochs: int = 1000
    patience: int | None = None
    minibatch_fraction: float = 1.0
    init_noise: float = 0.01
    lower_solver: str = "soft"
    tol: float = 1e-8

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate must be positive, weight_decay >= 0")
        if self.lambda_entropy < 0 or self.lambda_nuclear < 0:
            raise ValueError("penalty weights must be non-negative")
        if not 0 < self.minibatch_fraction <= 1:
            raise ValueError("minibatch_fraction must lie in (0, 1]")
        if self.init_noise < 0:
            raise ValueError("init_noise must be >= 0")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1 (or None to disable early stopping)")
        if self.lower_solver not in LOWER_SOLVERS:
            raise ValueError(f"lower_solver must be one of {LOWER_SOLVERS}")


@dataclass
class RelaxedScheme:
    logits: np.ndarray

    @property
    def K(self):
        return self.logits.shape[0]

    @property
    def matrix(self):
        return row_softmax(self.logits)


@dataclass
class DiscoveryResult:
    scheme: np.ndarray
    partition: Partition
    psi_final: np.ndarray
    val_loss: float
    history: list = field(default_factory=list)
    epochs: int = 0

    @property
    def theta_final(self):
        return self.scheme @ self.psi_final


# -- upper level ------------------------------------------------------------------

def _logits_of(rs):
    return np.asarray(rs.logits if isinstance(rs, RelaxedScheme) else rs, dtype=float)


def _batch_stats(task, batch):
    if batch is None:
        return task.val_stats()
    batch = np.asarray(batch)
    if batch.size == 0:
        raise ValueError("validation batch is empty")
    return _Stats.of(task.X_val[batch], task.Y_val[batch])


def _objective_and_grad(L, task, stats, hp, need_grad=True):
    A = row_softmax(L)
    m = task.target()
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > PINV_RTOL * s[0]
    if hp.lower_solver == "soft":
        psi = _soft_project(A, m)
    else:
        A_pinv = (Vt[keep].T / s[keep]) @ U[:, keep].T
        psi = A_pinv @ m
    theta = A @ psi
    G = task.as_weights(theta)
    data = stats.loss(G)
    ent = entropy_penalty(A)
    nuc = float(s.sum())
    total = data + hp.lambda_entropy * ent + hp.lambda_nuclear * nuc
    parts = {"data": data, "entropy": ent, "nuclear": nuc}
    if not need_grad:
        return total, None, parts

    g = stats.grad(G).reshape(-1)
    if hp.lower_solver == "soft":
        c = A.sum(axis=0)
        h = (A.T @ g) / c
        grad_A = np.outer(g, psi) + (m[:, None] - psi[None, :]) * h[None, :]
    else:
        proj = A @ A_pinv
        resid_g = g - proj @ g
        resid_m = m - proj @ m
        grad_A = np.outer(resid_g, psi) + np.outer(resid_m, A_pinv @ g)
    if hp.lambda_entropy:
        grad_A = grad_A - hp.lambda_entropy * (np.log(np.maximum(A, 1e-12)) + 1.0)
    if hp.lambda_nuclear:
        grad_A = grad_A + hp.lambda_nuclear * (U[:, keep] @ Vt[keep])
    return total, row_softmax_backward(A, grad_A), parts


def upper_objective(rs, task, batch=None, hp=None):
    """Validation loss of the training fit plus the weighted penalties.

    ``batch`` holds validation row indices (all rows when ``None``).
    """
    hp = hp or RelaxHyperparams()
    total, _, _ = _objective_and_grad(_logits_of(rs), task, _batch_stats(task, batch),
                                      hp, need_grad=False)
    return total


def upper_gradient(rs, task, batch=None, hp=None):
    """Gradient of :func:`upper_objective` with respect to the logits."""
    hp = hp or RelaxHyperparams()
    _, grad, _ = _objective_and_grad(_logits_of(rs), task, _batch_stats(task, batch), hp)
    return grad


def round_scheme(A_relaxed):
    """One-hot each row at its argmax (ties go to the lowest column)."""
    A = np.asarray(A_relaxed, dtype=float)
    out = np.zeros(A.shape, dtype=int)
    out[np.arange(A.shape[0]), np.argmax(A, axis=1)] = 1
    return out


def _finish(task, partition, val_loss, history=(), epochs=0):
    scheme = scheme_from_partition(partition)
    psi = fit_scheme(task, scheme, on="full", mode="direct")
    return DiscoveryResult(scheme=scheme, partition=partition, psi_final=psi,
                           val_loss=float(val_loss), history=list(history), epochs=epochs)


def scheme_val_loss(task, scheme):
    """Validation loss of a binary scheme fit on the training split."""
    psi = fit_scheme(task, scheme, on="train")
    return task.val_stats().loss(task.as_weights(np.asarray(scheme) @ psi))


# -- exhaustive search ----------------------------------------------------------

def _rgs_val_losses(task, rgs):
    """Validation loss of every partition in a block of label strings.

    Only valid for the two-step lower level, where fitting a binary scheme
    averages the unconstrained solution within clusters.
    """
    m = task.target()
    B, K = rgs.shape
    onehot = (rgs[:, :, None] == np.arange(K)).astype(float)  # (B, K, K)
    counts = onehot.sum(axis=1)
    sums = np.einsum("bik,i->bk", onehot, m)
    means = sums / np.where(counts > 0, counts, 1.0)
    theta = np.take_along_axis(means, rgs, axis=1)  # (B, K)
    st = task.val_stats()
    G = theta.reshape(B, task.Q, task.P)
    quad = np.einsum("bqp,pr,bqr->b", G, st.xtx, G)
    lin = np.einsum("bqp,pq->b", G, st.xty)
    return quad - 2 * lin + st.yty


def brute_force_losses(task, chunk=20000):
    """Validation losses of all partitions, in lexicographic label order."""
    K = task.K
    if K > MAX_ENUMERATE_K:
        raise CapacityError(f"brute force needs K <= {MAX_ENUMERATE_K}, got {K}")
    rgs = rgs_array(K)
    if task.lower_mode == "two-step":
        losses = np.concatenate([_rgs_val_losses(task, rgs[i:i + chunk])
                                 for i in range(0, len(rgs), chunk)])
    else:
        losses = np.array([
            scheme_val_loss(task, scheme_from_partition(Partition.from_labels(r)))
            for r in rgs])
    return rgs, losses


def discover_brute_force(task):
    """Exact minimizer of the validation loss over all partitions.

    Ties go to fewer clusters, then to the lexicographically first label
    string. The winner is refit on train and validation data together.
    """
    rgs, losses = brute_force_losses(task)
    best = losses.min()
    tied = np.flatnonzero(losses <= best + 1e-12 * max(1.0, abs(best)))
    n_clusters = rgs[tied].max(axis=1) + 1
    win = tied[np.argmin(n_clusters)]  # argmin keeps the first (lexicographic) on ties
    P = Partition.from_labels(rgs[win])
    return _finish(task, P, losses[win])


# -- relaxed search -------------------------------------------------------------

def discover_relaxed(task, hp=None, rng=None):
    """Gradient search over row-softmax logits with Adam, then rounding.

    Runs ``hp.max_epochs`` epochs; with ``hp.patience`` set it stops early
    once the full validation objective has not improved by ``hp.tol`` for
    that many epochs.
    """
    hp = hp or RelaxHyperparams()
    if rng is None:
        rng = np.random.default_rng()
    K = task.K
    L = hp.init_noise * rng.standard_normal((K, K))
    state = AdamState((K, K), learning_rate=hp.learning_rate, weight_decay=hp.weight_decay)
    full_stats = task.val_stats()
    n_val = task.X_val.shape[0]
    batch_size = max(1, int(math.ceil(hp.minibatch_fraction * n_val)))

    history = []
    best = math.inf
    stale = 0
    epoch = 0
    for epoch in range(1, hp.max_epochs + 1):
        if batch_size < n_val:
            idx = rng.choice(n_val, size=batch_size, replace=False)
            stats = _Stats.of(task.X_val[idx], task.Y_val[idx])
        else:
            stats = full_stats
        total, grad, parts = _objective_and_grad(L, task, stats, hp)
        if stats is not full_stats:
            total, _, parts = _objective_and_grad(L, task, full_stats, hp, need_grad=False)
        if not (math.isfinite(total) and np.all(np.isfinite(grad))):
            raise DiscoveryError(
                f"non-finite objective at epoch {epoch}: {parts}")
        history.append((epoch, parts["data"], parts["entropy"], parts["nuclear"]))
        if total < best - hp.tol:
            best = total
            stale = 0
        else:
            stale += 1
            if hp.patience is not None and stale >= hp.patience:
                break
        L = adam_step(state, L, grad)

    scheme = round_scheme(row_softmax(L))
    P = partition_from_scheme(scheme)
    canonical = scheme_from_partition(P)
    return _finish(task, P, scheme_val_loss(task, canonical), history, epoch)


def discover_fixed(task, partition):
    """Baselines: keep a given partition and fit on all data."""
    if partition.K != task.K:
        raise ValueError(f"partition K={partition.K} but task K={task.K}")
    scheme = scheme_from_partition(partition)
    return _finish(task, partition, scheme_val_loss(task, scheme))


def bell_number(K):
    return BELL[K] if K < len(BELL) else None


__all__ = [
    "DiscoveryError", "DiscoveryResult", "LinearSharedTask", "RelaxHyperparams",
    "RelaxedScheme", "discover_brute_force", "discover_fixed", "discover_relaxed",
    "fit_scheme", "lower_solve_mean", "lower_solve_regression", "round_scheme",
    "scheme_val_loss", "upper_gradient", "upper_objective", "validate_scheme",
]
