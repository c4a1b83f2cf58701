import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjbflow.numerics import (
    RngStream,
    clip_global_norm,
    finite_difference_gradient,
    ridge_pinv_solve,
    seeded_uniform,
)


class TestRngStream:
    def test_same_seed_same_purpose_reproduces(self):
        a = RngStream(7, "weights").generator().uniform(size=100)
        b = RngStream(7, "weights").generator().uniform(size=100)
        np.testing.assert_array_equal(a, b)

    def test_purposes_are_independent(self):
        a = RngStream(7, "weights").generator().uniform(size=100)
        b = RngStream(7, "biases").generator().uniform(size=100)
        assert not np.array_equal(a, b)

    def test_seed_changes_stream(self):
        a = RngStream(1, "sampling").generator().uniform(size=100)
        b = RngStream(2, "sampling").generator().uniform(size=100)
        assert not np.array_equal(a, b)

    def test_unknown_purpose_rejected(self):
        with pytest.raises(ValueError):
            RngStream(0, "coffee")

    def test_seeded_uniform_range_and_determinism(self):
        s = RngStream(11, "sampling")
        x = seeded_uniform(s, 1000, -2.0, 3.0)
        assert x.shape == (1000,)
        assert np.all(x >= -2.0) and np.all(x < 3.0)
        np.testing.assert_array_equal(x, seeded_uniform(s, 1000, -2.0, 3.0))

    def test_seeded_uniform_bad_interval(self):
        with pytest.raises(ValueError):
            seeded_uniform(RngStream(0, "sampling"), 10, 1.0, 1.0)


class TestRidgeSolve:
    def test_normal_equations_residual(self):
        # Oracle: the ridge solution satisfies (H'H + ridge I) b = H'T.
        rng = np.random.default_rng(0)
        H = rng.standard_normal((200, 50))
        T = rng.standard_normal(200)
        for ridge in (1e-8, 1e-4, 1.0):
            b = ridge_pinv_solve(H, T, ridge)
            lhs = H.T @ (H @ b) + ridge * b
            rhs = H.T @ T
            rel = np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)
            assert rel < 1e-10

    def test_zero_ridge_minimum_norm(self):
        # Underdetermined system: the ridge=0 answer is the pseudoinverse one.
        rng = np.random.default_rng(1)
        H = rng.standard_normal((20, 60))
        T = rng.standard_normal(20)
        b = ridge_pinv_solve(H, T, 0.0)
        np.testing.assert_allclose(b, np.linalg.pinv(H) @ T, atol=1e-10)

    def test_exactly_solvable_system(self):
        rng = np.random.default_rng(2)
        H = rng.standard_normal((50, 50)) + 5.0 * np.eye(50)
        b_true = rng.standard_normal(50)
        b = ridge_pinv_solve(H, H @ b_true, 0.0)
        np.testing.assert_allclose(b, b_true, atol=1e-8)

    def test_rank_deficient_does_not_blow_up(self):
        H = np.ones((30, 10))
        b = ridge_pinv_solve(H, np.ones(30), 0.0)
        assert np.all(np.isfinite(b))
        np.testing.assert_allclose(H @ b, np.ones(30), atol=1e-10)

    def test_negative_ridge_rejected(self):
        with pytest.raises(ValueError):
            ridge_pinv_solve(np.eye(3), np.ones(3), -1e-9)


class TestFiniteDifference:
    def test_quadratic_gradient(self):
        A = np.array([[2.0, 0.5], [0.5, 1.0]])
        f = lambda x: float(x @ A @ x)
        x = np.array([0.3, -1.2])
        np.testing.assert_allclose(
            finite_difference_gradient(f, x), 2 * A @ x, rtol=1e-7, atol=1e-9)

    def test_bad_step_rejected(self):
        with pytest.raises(ValueError):
            finite_difference_gradient(lambda x: 0.0, np.zeros(2), h=0.0)


class TestClipGlobalNorm:
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30),
           st.floats(1e-6, 1e3))
    @settings(max_examples=200, deadline=None)
    def test_norm_never_exceeds_bound(self, values, max_norm):
        g = np.array(values)
        clipped = clip_global_norm(g, max_norm)
        assert np.linalg.norm(clipped) <= max_norm * (1 + 1e-12)

    def test_short_vectors_unchanged(self):
        g = np.array([0.1, -0.2])
        assert clip_global_norm(g, 1.0) is g

    def test_direction_preserved(self):
        g = np.array([3.0, 4.0])
        clipped = clip_global_norm(g, 1.0)
        np.testing.assert_allclose(clipped, g / 5.0)

    def test_zero_vector_passthrough(self):
        np.testing.assert_array_equal(
            clip_global_norm(np.zeros(4), 1e-9), np.zeros(4))

    def test_bad_bound_rejected(self):
        with pytest.raises(ValueError):
            clip_global_norm(np.ones(3), 0.0)
