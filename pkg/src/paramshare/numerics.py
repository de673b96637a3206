"""Small dense linear algebra, penalties, Adam and seeded random streams.

Everything here works on plain ``numpy`` arrays; matrices are 2-D float
arrays and are checked for finiteness where they enter the library.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PINV_RTOL = 1e-10
LOG_CLAMP = 1e-12


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float array (1-D input becomes a column)."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return M


def pseudo_inverse(M, rtol=PINV_RTOL):
    """Moore-Penrose pseudo-inverse through a full SVD.

    Singular values below ``rtol * s_max`` are treated as zero.
    """
    M = as_matrix(M)
    if M.size == 0:
        return np.zeros(M.T.shape)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    cutoff = rtol * (s[0] if s.size else 0.0)
    inv = np.zeros_like(s)
    keep = s > cutoff
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def solve_least_squares(X, Y):
    """Minimize ``||X W - Y||_F`` over ``W``.

    Uses the normal equations when ``X^T X`` is well conditioned and the
    minimum-norm pseudo-inverse solution otherwise.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_features)
    Y : array-like of shape (n_samples, n_targets) or (n_samples,)

    Returns
    -------
    W : ndarray of shape (n_features, n_targets)
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(
            f"X and Y row counts differ: {X.shape[0]} != {Y.shape[0]}")
    if X.shape[0] < 1:
        raise ValueError("least squares needs at least one sample")
    gram = X.T @ X
    s = np.linalg.svd(gram, compute_uv=False)
    if s.size and s[-1] > PINV_RTOL * s[0]:
        return np.linalg.solve(gram, X.T @ Y)
    return pseudo_inverse(X) @ Y


def nuclear_norm(M):
    """Sum of singular values."""
    M = as_matrix(M)
    return float(np.linalg.svd(M, compute_uv=False).sum())


def nuclear_norm_grad(M):
    """Subgradient ``U V^T`` of the nuclear norm (thin SVD, zero singular
    directions dropped)."""
    U, s, Vt = np.linalg.svd(as_matrix(M), full_matrices=False)
    keep = s > PINV_RTOL * (s[0] if s.size else 0.0)
    return U[:, keep] @ Vt[keep]


def row_softmax(L):
    """Softmax over each row, stabilized by subtracting the row maximum."""
    L = as_matrix(L, "logits")
    Z = np.exp(L - L.max(axis=1, keepdims=True))
    return Z / Z.sum(axis=1, keepdims=True)


def row_softmax_backward(A, grad_A):
    """Pull a gradient w.r.t. ``A = row_softmax(L)`` back to ``L``."""
    inner = np.sum(grad_A * A, axis=1, keepdims=True)
    return A * (grad_A - inner)


def _check_unit_interval(A, tol=1e-9):
    A = as_matrix(A)
    if A.size and (A.min() < -tol or A.max() > 1.0 + tol):
        raise ValueError("entropy penalty needs entries in [0, 1]")
    return np.clip(A, 0.0, 1.0)


def entropy_penalty(A):
    """Elementwise entropy ``-sum A log A`` with ``0 log 0 = 0``."""
    A = _check_unit_interval(A)
    return float(-np.sum(A * np.log(np.maximum(A, LOG_CLAMP))))


def entropy_penalty_grad(A):
    A = _check_unit_interval(A)
    return -(np.log(np.maximum(A, LOG_CLAMP)) + 1.0)


@dataclass
class AdamState:
    """Moments and settings of one Adam optimizer.

    Weight decay is classic L2: ``decay * variable`` is added to the
    gradient before the moment updates.
    """

    shape: tuple
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    first_moment: np.ndarray = field(default=None, repr=False)
    second_moment: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon <= 0 or self.weight_decay < 0:
            raise ValueError("epsilon must be positive, weight_decay >= 0")
        self.shape = tuple(self.shape)
        if self.first_moment is None:
            self.first_moment = np.zeros(self.shape)
        if self.second_moment is None:
            self.second_moment = np.zeros(self.shape)


def adam_step(state, variable, gradient):
    """One bias-corrected Adam update.

    Returns the new variable; ``state`` is advanced in place.
    """
    variable = np.asarray(variable, dtype=float)
    gradient = np.asarray(gradient, dtype=float)
    if variable.shape != state.shape or gradient.shape != state.shape:
        raise ValueError(
            f"shape mismatch: state {state.shape}, variable {variable.shape}, "
            f"gradient {gradient.shape}")
    g = gradient + state.weight_decay * variable
    state.step += 1
    state.first_moment = state.beta1 * state.first_moment + (1 - state.beta1) * g
    state.second_moment = (state.beta2 * state.second_moment
                           + (1 - state.beta2) * g * g)
    m_hat = state.first_moment / (1 - state.beta1 ** state.step)
    v_hat = state.second_moment / (1 - state.beta2 ** state.step)
    return variable - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


def finite_diff_gradient(f, x, h=1e-5):
    """Central-difference gradient of a scalar function of an array."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return grad


# -- random streams ---------------------------------------------------------

Rng = np.random.Generator


def make_rng(seed):
    """Counter-based (Philox) generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def derive_rng(base_seed, run_index):
    """Independent stream for run ``run_index`` of an experiment.

    The child key depends only on ``(base_seed, run_index)``, so runs can be
    executed in any order or in parallel.
    """
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(run_index),))
    return np.random.Generator(np.random.Philox(ss))


def rng_normal(rng, n, mean=0.0, stddev=1.0):
    if stddev < 0:
        raise ValueError("stddev must be non-negative")
    return mean + stddev * rng.standard_normal(n)


def rng_uniform(rng, n, lo=0.0, hi=1.0):
    if lo > hi:
        raise ValueError("need lo <= hi")
    return lo + (hi - lo) * rng.random(n)
