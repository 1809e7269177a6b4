"""
Property-based tests for the proximal and projection operators.
Uses Hypothesis library for property testing.

**Feature: mhdsc-prox**
"""
import os
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pipeline.errors import ValidationError
from pipeline.prox import (
    l1inf_norm,
    project_l1_ball,
    project_unit_columns,
    prox_l1inf_rows,
    prox_linf,
    prox_with_gap,
    soft_threshold,
)

ORACLE_SAMPLES = 200_000

small_vectors = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=4).map(np.array)
weights = st.floats(0.05, 4.0)


def _random_candidates(v: np.ndarray, seed: int = 0) -> np.ndarray:
    """在 v 附近和原点附近撒点，作为随机搜索的候选解"""
    rng = np.random.default_rng(seed)
    scale = max(1.0, float(np.abs(v).max()))
    near = v + rng.normal(0.0, 0.3 * scale, (ORACLE_SAMPLES // 2, v.size))
    wide = rng.uniform(-scale, scale, (ORACLE_SAMPLES // 2, v.size))
    return np.vstack([near, wide])


class TestProjectL1BallExamples:
    """
    **Feature: mhdsc-prox, Property 1: l1-ball projection hand cases**
    """

    def test_inside_ball_unchanged(self):
        np.testing.assert_array_equal(project_l1_ball(np.array([0.5, 0.2]), 1.0), [0.5, 0.2])

    def test_axis_projection(self):
        np.testing.assert_allclose(project_l1_ball(np.array([2.0, 0.0]), 1.0), [1.0, 0.0], atol=1e-15)

    def test_diagonal_projection(self):
        np.testing.assert_allclose(project_l1_ball(np.array([1.0, 1.0]), 1.0), [0.5, 0.5], atol=1e-15)

    def test_nonpositive_radius_rejected(self):
        with pytest.raises(ValidationError):
            project_l1_ball(np.array([1.0]), 0.0)


class TestProjectL1BallOracle:
    """
    **Feature: mhdsc-prox, Property 2: projection is feasible and beats random search**

    The output lies in the ball and is at least as close to v as any sampled
    feasible point.
    """

    @settings(max_examples=25, deadline=None)
    @given(v=small_vectors, radius=weights)
    def test_beats_random_feasible_points(self, v, radius):
        p = project_l1_ball(v, radius)
        assert np.abs(p).sum() <= radius + 1e-10
        cand = _random_candidates(v)
        norms = np.abs(cand).sum(axis=1)
        cand = cand / np.maximum(norms / radius, 1.0)[:, None]
        best = np.min(np.sum((cand - v) ** 2, axis=1))
        assert np.sum((p - v) ** 2) <= best + 1e-6

    @settings(max_examples=100, deadline=None)
    @given(v=small_vectors, radius=weights)
    def test_feasible_input_is_fixed_point(self, v, radius):
        if np.abs(v).sum() <= radius:
            np.testing.assert_array_equal(project_l1_ball(v, radius), v)


class TestProxLinf:
    """
    **Feature: mhdsc-prox, Property 3: l-infinity prox and the Moreau identity**
    """

    def test_zero_weight_is_identity(self):
        np.testing.assert_array_equal(prox_linf(np.array([3.0, -1.0]), 0.0), [3.0, -1.0])

    def test_inside_dual_ball_collapses(self):
        np.testing.assert_array_equal(prox_linf(np.array([0.3, -0.2]), 1.0), [0.0, 0.0])

    def test_hand_case(self):
        np.testing.assert_allclose(prox_linf(np.array([3.0, 1.0]), 1.0), [2.0, 1.0], atol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(v=small_vectors, lam=weights)
    def test_moreau_identity(self, v, lam):
        np.testing.assert_allclose(prox_linf(v, lam) + project_l1_ball(v, lam), v, atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(v=small_vectors, lam=weights)
    def test_beats_random_search(self, v, lam):
        u = prox_linf(v, lam)
        ours = 0.5 * np.sum((u - v) ** 2) + lam * np.abs(u).max()
        cand = _random_candidates(v, seed=1)
        values = 0.5 * np.sum((cand - v) ** 2, axis=1) + lam * np.abs(cand).max(axis=1)
        assert ours <= values.min() + 1e-6

    @settings(max_examples=100, deadline=None)
    @given(a=small_vectors, lam=weights, seed=st.integers(0, 1000))
    def test_nonexpansive(self, a, lam, seed):
        b = a + np.random.default_rng(seed).normal(size=a.size)
        assert np.linalg.norm(prox_linf(a, lam) - prox_linf(b, lam)) <= np.linalg.norm(a - b) + 1e-12

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError):
            prox_linf(np.array([1.0]), -0.1)


class TestProxL1InfRows:
    """
    **Feature: mhdsc-prox, Property 4: mixed-norm prox is row separable**
    """

    def test_zero_weight_is_identity(self):
        M = np.array([[3.0, 1.0], [-2.0, 0.5]])
        np.testing.assert_array_equal(prox_l1inf_rows(M, 0.0), M)

    def test_hand_case(self):
        out = prox_l1inf_rows(np.array([[3.0, 1.0], [0.0, 0.0]]), 1.0)
        np.testing.assert_allclose(out, [[2.0, 1.0], [0.0, 0.0]], atol=1e-15)

    def test_norm_definition(self):
        assert l1inf_norm(np.array([[3.0, -4.0], [1.0, 0.5]])) == 5.0

    @settings(max_examples=100, deadline=None)
    @given(rows=st.integers(1, 6), cols=st.integers(1, 5), lam=weights, seed=st.integers(0, 10_000))
    def test_matches_rowwise_prox(self, rows, cols, lam, seed):
        M = np.random.default_rng(seed).normal(0.0, 2.0, (rows, cols))
        expected = np.vstack([prox_linf(row, lam) for row in M])
        np.testing.assert_allclose(prox_l1inf_rows(M, lam), expected, atol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(rows=st.integers(2, 6), cols=st.integers(1, 5), lam=weights, seed=st.integers(0, 10_000))
    def test_commutes_with_row_permutation(self, rows, cols, lam, seed):
        rng = np.random.default_rng(seed)
        M = rng.normal(0.0, 2.0, (rows, cols))
        perm = rng.permutation(rows)
        np.testing.assert_allclose(prox_l1inf_rows(M[perm], lam), prox_l1inf_rows(M, lam)[perm], atol=1e-14)


class TestSoftThreshold:
    """
    **Feature: mhdsc-prox, Property 5: elementwise shrinkage**
    """

    def test_hand_case(self):
        np.testing.assert_array_equal(soft_threshold(np.array([2.0, -0.5]), 1.0), [1.0, 0.0])

    def test_zero_weight_is_identity(self):
        v = np.array([0.1, -3.0, 0.0])
        np.testing.assert_array_equal(soft_threshold(v, 0.0), v)

    @settings(max_examples=50, deadline=None)
    @given(v=small_vectors)
    def test_matches_scalar_grid_minimization(self, v):
        lam = 0.3
        grid = np.linspace(-6.0, 6.0, 120_001)
        values = 0.5 * (grid[None, :] - v[:, None]) ** 2 + lam * np.abs(grid)[None, :]
        brute = grid[np.argmin(values, axis=1)]
        np.testing.assert_allclose(soft_threshold(v, lam), brute, atol=1e-4)


class TestProxWithGap:
    """
    **Feature: mhdsc-prox, Property 6: exact proxes have zero primal-dual gap**
    """

    @settings(max_examples=100, deadline=None)
    @given(v=small_vectors, lam=weights, norm=st.sampled_from(["linf", "l1"]))
    def test_gap_vanishes(self, v, lam, norm):
        result = prox_with_gap(v, lam, norm)
        assert abs(result.objective_gap) <= 1e-9
        assert np.all(np.isfinite(result.values))

    def test_unknown_norm_rejected(self):
        with pytest.raises(ValidationError):
            prox_with_gap(np.array([1.0]), 1.0, "l2")


class TestProjectUnitColumns:
    """
    **Feature: mhdsc-prox, Property 7: dictionary column constraint**
    """

    def test_examples(self):
        D = np.array([[3.0, 0.1, 0.0], [4.0, 0.1, 0.0]])
        np.testing.assert_allclose(project_unit_columns(D), [[0.6, 0.1, 0.0], [0.8, 0.1, 0.0]], atol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(rows=st.integers(1, 6), cols=st.integers(1, 6), seed=st.integers(0, 10_000))
    def test_norms_bounded_and_short_columns_kept(self, rows, cols, seed):
        D = np.random.default_rng(seed).normal(0.0, 1.0, (rows, cols))
        out = project_unit_columns(D)
        assert np.all(np.linalg.norm(out, axis=0) <= 1.0 + 1e-12)
        short = np.linalg.norm(D, axis=0) <= 1.0
        np.testing.assert_array_equal(out[:, short], D[:, short])
