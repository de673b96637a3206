"""scikit-learn estimators that learn which parameters to tie.

Both estimators split the rows given to ``fit`` into a training part (the
first ``train_ratio`` fraction) and a validation part, search for the
sharing scheme whose training fit does best on validation, and refit the
tied parameters on all rows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, MultiOutputMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .discovery import (
    LinearSharedTask,
    RelaxHyperparams,
    discover_brute_force,
    discover_fixed,
    discover_relaxed,
)
from .partition import Partition

METHODS = ("relaxed", "brute", "fixed")


def as_generator(random_state):
    """Turn ``None``, an int or a Generator into a ``numpy`` Generator."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


def split_sizes(n, train_ratio):
    if not 0 < train_ratio < 1:
        raise ValueError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    if n < 2:
        raise ValueError(f"n_samples={n} is too few; need at least two samples to split "
                         "into train and validation")
    n_train = int(round(train_ratio * n))
    return min(max(n_train, 1), n - 1)


class _SharingSearch(BaseEstimator):
    """Parameters and search dispatch shared by the concrete estimators."""

    def __init__(self, method="relaxed", train_ratio=0.3, fixed_partition=None,
                 lambda_entropy=0.01, lambda_nuclear=0.01, learning_rate=2e-2,
                 weight_decay=1e-4, max_epochs=1000, patience=None,
                 minibatch_fraction=1.0, init_noise=0.01, lower_solver="soft",
                 random_state=None):
        self.method = method
        self.train_ratio = train_ratio
        self.fixed_partition = fixed_partition
        self.lambda_entropy = lambda_entropy
        self.lambda_nuclear = lambda_nuclear
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.patience = patience
        self.minibatch_fraction = minibatch_fraction
        self.init_noise = init_noise
        self.lower_solver = lower_solver
        self.random_state = random_state

    def _hyperparams(self):
        return RelaxHyperparams(
            learning_rate=self.learning_rate, weight_decay=self.weight_decay,
            lambda_entropy=self.lambda_entropy, lambda_nuclear=self.lambda_nuclear,
            max_epochs=self.max_epochs, patience=self.patience,
            minibatch_fraction=self.minibatch_fraction, init_noise=self.init_noise,
            lower_solver=self.lower_solver)

    def _search(self, task):
        if self.method == "relaxed":
            return discover_relaxed(task, self._hyperparams(), as_generator(self.random_state))
        if self.method == "brute":
            return discover_brute_force(task)
        if self.method == "fixed":
            P = self.fixed_partition
            if P is None:
                P = Partition.singletons(task.K)
            elif not isinstance(P, Partition):
                P = Partition.from_labels(P)
            return discover_fixed(task, P)
        raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")

    def _store(self, result):
        self.result_ = result
        self.scheme_ = result.scheme
        self.partition_ = result.partition
        self.psi_ = result.psi_final
        self.n_clusters_ = result.partition.n_clusters
        self.n_epochs_ = result.epochs


class SharedMeanEstimator(TransformerMixin, _SharingSearch):
    """Mean of a random vector with learned ties between coordinates.

    Attributes
    ----------
    mean_ : ndarray of shape (n_features,)
        Fitted mean, constant on every cluster of ``partition_``.
    partition_ : Partition
    scheme_ : ndarray of shape (n_features, n_features)
        Binary assignment matrix with ``mean_ == scheme_ @ psi_``.
    """

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=float)
        n_train = split_sizes(X.shape[0], self.train_ratio)
        self._store(self._search(LinearSharedTask.mean(X[:n_train], X[n_train:])))
        self.mean_ = self.result_.theta_final
        return self

    def transform(self, X):
        """Replace each coordinate by the average over its cluster."""
        check_is_fitted(self, "mean_")
        X = validate_data(self, X, dtype=float, reset=False)
        col_sum = self.scheme_.sum(axis=0)
        A_bar = self.scheme_ / np.where(col_sum > 0, col_sum, 1)
        return X @ A_bar @ self.scheme_.T

    def score(self, X, y=None):
        """Negative mean squared distance of the samples to ``mean_``."""
        check_is_fitted(self, "mean_")
        X = validate_data(self, X, dtype=float, reset=False)
        return -float(np.mean(np.sum((X - self.mean_) ** 2, axis=1)))


class SharedLinearRegressor(MultiOutputMixin, RegressorMixin, _SharingSearch):
    """Linear map ``y = G x`` whose weights are tied by a learned scheme.

    The tied parameters are ``Flatten(G)`` in row-major order, so for a
    ``(n_targets, n_features)`` weight matrix parameter ``q * n_features + p``
    is the weight from input ``p`` to output ``q``.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,) or (n_targets, n_features)
    """

    def __init__(self, method="relaxed", train_ratio=0.3, fixed_partition=None,
                 lambda_entropy=0.01, lambda_nuclear=0.01, learning_rate=2e-2,
                 weight_decay=1e-4, max_epochs=1000, patience=None,
                 minibatch_fraction=1.0, init_noise=0.01, lower_solver="soft",
                 lower_mode="two-step", random_state=None):
        super().__init__(
            method=method, train_ratio=train_ratio, fixed_partition=fixed_partition,
            lambda_entropy=lambda_entropy, lambda_nuclear=lambda_nuclear,
            learning_rate=learning_rate, weight_decay=weight_decay,
            max_epochs=max_epochs, patience=patience,
            minibatch_fraction=minibatch_fraction, init_noise=init_noise,
            lower_solver=lower_solver, random_state=random_state)
        self.lower_mode = lower_mode

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=float, multi_output=True, y_numeric=True)
        Y = y[:, None] if y.ndim == 1 else y
        n_train = split_sizes(X.shape[0], self.train_ratio)
        task = LinearSharedTask.regression(X[:n_train], Y[:n_train], X[n_train:], Y[n_train:],
                                           lower_mode=self.lower_mode)
        self._store(self._search(task))
        G = self.result_.theta_final.reshape(Y.shape[1], X.shape[1])
        self.coef_ = G[0] if y.ndim == 1 else G
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, dtype=float, reset=False)
        return X @ self.coef_.T
