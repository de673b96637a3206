import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from paramshare.numerics import (
    AdamState,
    adam_step,
    as_matrix,
    derive_rng,
    entropy_penalty,
    entropy_penalty_grad,
    finite_diff_gradient,
    make_rng,
    nuclear_norm,
    nuclear_norm_grad,
    pseudo_inverse,
    rng_normal,
    rng_uniform,
    row_softmax,
    row_softmax_backward,
    solve_least_squares,
)
from paramshare.partition import column_normalize, random_partition, scheme_from_partition


def penrose_ok(M, Mp, tol=1e-9):
    """The four Moore-Penrose identities, an oracle independent of the SVD."""
    return (np.allclose(M @ Mp @ M, M, atol=tol) and np.allclose(Mp @ M @ Mp, Mp, atol=tol)
            and np.allclose((M @ Mp).T, M @ Mp, atol=tol)
            and np.allclose((Mp @ M).T, Mp @ M, atol=tol))


def test_as_matrix_rejects_nonfinite_and_promotes_vectors():
    assert as_matrix([1.0, 2.0]).shape == (2, 1)
    with pytest.raises(ValueError, match="NaN"):
        as_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        as_matrix(np.zeros((2, 2, 2)))


class TestLeastSquares:
    def test_identity_design(self):
        Y = np.array([[1.0], [-2.0], [0.5]])
        np.testing.assert_allclose(solve_least_squares(np.eye(3), Y), Y)

    def test_mean_of_constant_design_matches_grid_scan(self):
        W = solve_least_squares([[1.0], [1.0]], [[1.0], [3.0]])
        grid = np.linspace(0, 4, 4001)
        best = grid[np.argmin((grid - 1) ** 2 + (grid - 3) ** 2)]
        assert W[0, 0] == pytest.approx(2.0)
        assert W[0, 0] == pytest.approx(best, abs=1e-3)

    def test_recovers_toeplitz_system_noise_free(self):
        rng = make_rng(1)
        g = np.array([1.0, 3.0, 5.0])
        X = rng.standard_normal((20, 6))
        G = np.zeros((4, 6))
        for k in range(4):
            G[k, k:k + 3] = g
        W = solve_least_squares(X, X @ G.T)
        np.testing.assert_allclose(W.T, G, atol=1e-10)

    def test_rank_deficient_falls_back_to_min_norm(self):
        X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        Y = np.array([[2.0], [4.0], [6.0]])
        W = solve_least_squares(X, Y)
        np.testing.assert_allclose(W, np.linalg.lstsq(X, Y, rcond=None)[0], atol=1e-10)

    def test_row_mismatch(self):
        with pytest.raises(ValueError, match="row counts"):
            solve_least_squares(np.ones((3, 2)), np.ones((2, 1)))


class TestPseudoInverse:
    def test_simple_cases(self):
        np.testing.assert_allclose(pseudo_inverse(np.eye(4)), np.eye(4))
        np.testing.assert_allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))

    def test_binary_scheme_pinv_is_normalized_transpose(self):
        rng = make_rng(3)
        for _ in range(20):
            P = random_partition(6, int(rng.integers(1, 7)), rng)
            A = scheme_from_partition(P).astype(float)
            Ap = pseudo_inverse(A)
            assert penrose_ok(A, Ap)
            np.testing.assert_allclose(Ap, column_normalize(A).T, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (4, 3), elements=st.floats(-5, 5)))
    def test_penrose_identities(self, M):
        assert penrose_ok(M, pseudo_inverse(M), tol=1e-6)


class TestNuclearNorm:
    def test_examples(self):
        assert nuclear_norm(np.eye(5)) == pytest.approx(5)
        assert nuclear_norm(np.ones((2, 2))) == pytest.approx(2)
        assert nuclear_norm(np.zeros((3, 3))) == 0

    def test_gradient_matches_finite_differences(self):
        rng = make_rng(4)
        M = rng.standard_normal((4, 4))
        fd = finite_diff_gradient(nuclear_norm, M)
        np.testing.assert_allclose(nuclear_norm_grad(M), fd, atol=1e-4)


class TestSoftmaxAndEntropy:
    def test_uniform_and_saturated(self):
        np.testing.assert_allclose(row_softmax(np.zeros((2, 2))), 0.5)
        np.testing.assert_allclose(row_softmax([[10.0, -10.0]]), [[1.0, 0.0]], atol=1e-8)

    def test_shift_invariance_and_large_logits(self):
        L = np.array([[1.0, 2.0, -1.0], [0.0, 5.0, 3.0]])
        np.testing.assert_allclose(row_softmax(L + np.array([[7.0], [-3.0]])), row_softmax(L))
        A = row_softmax([[1000.0, 0.0]])
        assert np.all(np.isfinite(A))

    def test_backward_matches_finite_differences(self):
        rng = make_rng(5)
        L = rng.standard_normal((3, 3))
        W = rng.standard_normal((3, 3))

        def f(L):
            return float(np.sum(W * row_softmax(L) ** 2))

        analytic = row_softmax_backward(row_softmax(L), 2 * W * row_softmax(L))
        np.testing.assert_allclose(analytic, finite_diff_gradient(f, L), atol=1e-8)

    def test_entropy_values(self):
        assert entropy_penalty(np.eye(3)) == 0
        assert entropy_penalty(np.full((2, 2), 0.5)) == pytest.approx(2 * math.log(2))
        with pytest.raises(ValueError):
            entropy_penalty([[1.5, -0.5]])

    def test_entropy_maximized_at_uniform(self):
        ps = np.linspace(0.01, 0.99, 99)
        vals = [entropy_penalty([[p, 1 - p], [p, 1 - p]]) for p in ps]
        assert ps[int(np.argmax(vals))] == pytest.approx(0.5)

    def test_entropy_gradient(self):
        A = row_softmax(make_rng(6).standard_normal((3, 3)))
        np.testing.assert_allclose(entropy_penalty_grad(A),
                                   finite_diff_gradient(entropy_penalty, A), atol=1e-7)


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        s = AdamState((3,), learning_rate=0.01)
        x = adam_step(s, np.zeros(3), np.array([5.0, -0.2, 1e-3]))
        np.testing.assert_allclose(np.abs(x), 0.01, rtol=1e-4)
        assert s.step == 1
        assert s.first_moment.shape == (3,)

    def test_zero_gradient_is_a_no_op(self):
        s = AdamState((2, 2))
        x0 = np.arange(4.0).reshape(2, 2)
        np.testing.assert_array_equal(adam_step(s, x0, np.zeros((2, 2))), x0)

    def test_weight_decay_is_added_to_gradient(self):
        a, b = AdamState((2,), weight_decay=0.5), AdamState((2,))
        x = np.array([1.0, -2.0])
        g = np.array([0.3, 0.1])
        np.testing.assert_allclose(adam_step(a, x, g), adam_step(b, x, g + 0.5 * x))

    def test_deterministic_and_converges_on_quadratic(self):
        def run():
            s = AdamState((2,), learning_rate=0.05)
            x = np.array([3.0, -4.0])
            for _ in range(2000):
                x = adam_step(s, x, 2 * (x - [1.0, 2.0]))
            return x

        x1, x2 = run(), run()
        np.testing.assert_array_equal(x1, x2)
        np.testing.assert_allclose(x1, [1.0, 2.0], atol=1e-3)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            adam_step(AdamState((2,)), np.zeros(3), np.zeros(3))


def test_finite_diff_examples():
    g = finite_diff_gradient(lambda x: float(np.sum(x ** 2)), np.array([1.0, 2.0]))
    np.testing.assert_allclose(g, [2.0, 4.0], atol=1e-8)
    c = np.array([3.0, -1.0, 0.5])
    for h in (1e-2, 1e-4):
        np.testing.assert_allclose(finite_diff_gradient(lambda x: float(c @ x), np.ones(3), h=h),
                                   c, atol=1e-9)


class TestRng:
    def test_zero_stddev(self):
        np.testing.assert_array_equal(rng_normal(make_rng(0), 5, 2.5, 0.0), 2.5)

    def test_derived_streams_reproducible_and_distinct(self):
        a = rng_normal(derive_rng(7, 3), 10)
        np.testing.assert_array_equal(a, rng_normal(derive_rng(7, 3), 10))
        assert not np.allclose(a, rng_normal(derive_rng(7, 4), 10))
        assert not np.allclose(a, rng_normal(derive_rng(8, 3), 10))

    def test_normal_moments(self):
        x = rng_normal(make_rng(11), 100_000, 1.5, 2.0)
        assert abs(x.mean() - 1.5) <= 4 * 2.0 / math.sqrt(x.size)

    def test_uniform_range(self):
        u = rng_uniform(make_rng(2), 1000, -1, 1)
        assert u.min() >= -1 and u.max() < 1
        with pytest.raises(ValueError):
            rng_uniform(make_rng(2), 3, 1, 0)
