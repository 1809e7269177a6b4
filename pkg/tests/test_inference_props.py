"""
Property-based tests for encoding and label prediction.
Uses Hypothesis library for property testing.

**Feature: mhdsc-inference**
"""
import os
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pipeline.dataset import SynthSpec, synth_multiview
from pipeline.errors import NumericalError, ValidationError
from pipeline.inference import (
    EncodeConfig,
    LabelScores,
    binarize,
    encode,
    encode_batch,
    predict_batch,
    predict_labels,
    predict_ls,
    train_ls_head,
)
from pipeline.prox import soft_threshold

TIGHT = EncodeConfig(gamma1_infer=0.0, max_iters=2000, tol=1e-12)


def _lasso_value(x, D, w, gamma):
    target, D1 = np.concatenate(x), np.vstack(D)
    return 0.5 * np.sum((target - D1 @ w) ** 2) + gamma * np.abs(w).sum()


class TestEncode:
    """
    **Feature: mhdsc-inference, Property 1: encoding solves the stacked lasso**
    """

    def test_orthonormal_least_squares(self):
        Q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))
        x = [np.array([0.3, -1.2]), np.array([2.0])]
        w = encode(x, [Q[:2], Q[2:]], TIGHT)
        np.testing.assert_allclose(w, Q.T @ np.concatenate(x), atol=1e-6)

    def test_step_uses_largest_singular_value(self):
        # all-ones is an eigenvector of DᵀD for the smaller value 1; a step from it would diverge
        D = np.array([[2.0, -1.0], [-1.0, 2.0]])
        x = np.array([1.0, 0.5])
        w = encode([x], [D], TIGHT)
        np.testing.assert_allclose(w, np.linalg.solve(D, x), atol=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(x=st.lists(st.floats(-3, 3), min_size=1, max_size=5), gamma=st.floats(0.0, 1.0))
    def test_identity_dictionary_is_soft_threshold(self, x, gamma):
        x = np.array(x)
        w = encode([x], [np.eye(x.size)], EncodeConfig(gamma1_infer=gamma, max_iters=500, tol=1e-12))
        np.testing.assert_allclose(w, soft_threshold(x, gamma), atol=1e-6)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_random_search_oracle(self, seed):
        rng = np.random.default_rng(seed)
        D = [rng.normal(size=(2, 2)), rng.normal(size=(1, 2))]
        x = [rng.normal(size=2), rng.normal(size=1)]
        w = encode(x, D, EncodeConfig(gamma1_infer=0.2, max_iters=5000, tol=1e-14))
        samples = w[None, :] + rng.normal(0.0, 1.0, (100_000, 2))
        target, D1 = np.concatenate(x), np.vstack(D)
        values = 0.5 * np.sum((target[None, :] - samples @ D1.T) ** 2, axis=1) + 0.2 * np.abs(samples).sum(axis=1)
        assert _lasso_value(x, D, w, 0.2) <= values.min() + 1e-6

    def test_planted_supports_recovered(self):
        spec = SynthSpec(views=3, dims=(8,), n_samples=50, n_atoms_true=10, sparsity=1, noise_sigma=0.0, seed=1)
        data, truth = synth_multiview(spec)
        codes = encode_batch([view.values for view in data.views], truth.dictionaries,
                             EncodeConfig(gamma1_infer=0.01, max_iters=2000, tol=1e-12))
        hits = sum(np.array_equal(np.flatnonzero(np.abs(codes[:, j]) > 1e-3), truth.supports[j]) for j in range(50))
        assert hits >= 45

    def test_batch_matches_single_and_workers(self):
        rng = np.random.default_rng(2)
        D = [rng.normal(size=(4, 3)), rng.normal(size=(2, 3))]
        views = [rng.normal(size=(4, 6)), rng.normal(size=(2, 6))]
        cfg = EncodeConfig(gamma1_infer=0.05)
        batch = encode_batch(views, D, cfg)
        assert batch.shape == (3, 6)
        np.testing.assert_array_equal(batch[:, 2], encode([views[0][:, 2], views[1][:, 2]], D, cfg))
        np.testing.assert_array_equal(encode_batch(views, D, cfg, workers=3), batch)

    def test_dimension_mismatch(self):
        D = [np.eye(2), np.eye(3)[:, :2]]
        with pytest.raises(ValidationError, match="dimension mismatch"):
            encode([np.zeros(2), np.zeros(2)], D, EncodeConfig())
        with pytest.raises(ValidationError, match="dimension mismatch"):
            encode([np.zeros(2)], D, EncodeConfig())

    def test_invalid_config(self):
        with pytest.raises(ValidationError):
            EncodeConfig(gamma1_infer=-1.0).validate()
        with pytest.raises(ValidationError):
            EncodeConfig(max_iters=0).validate()


class TestPredict:
    """
    **Feature: mhdsc-inference, Property 2: scores are the label-dictionary product**
    """

    def test_zero_code(self):
        np.testing.assert_array_equal(predict_labels(np.zeros(3), np.ones((2, 3))).values, [0.0, 0.0])

    def test_basis_code(self):
        scores = predict_labels(np.eye(4)[2], np.eye(4)).values
        np.testing.assert_array_equal(scores, np.eye(4)[2])

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_matches_product(self, seed):
        rng = np.random.default_rng(seed)
        D, W = rng.normal(size=(3, 5)), rng.normal(size=(5, 4))
        np.testing.assert_allclose(predict_batch(W, D), np.einsum("ij,jk->ik", D, W), atol=1e-12)

    def test_mismatch_and_non_finite(self):
        with pytest.raises(ValidationError):
            predict_labels(np.zeros(2), np.ones((2, 3)))
        with pytest.raises(NumericalError):
            LabelScores(values=np.array([np.inf]))

    def test_binarize(self):
        np.testing.assert_array_equal(binarize(np.array([0.2, 0.5, 0.9]), 0.5), [0.0, 1.0, 1.0])


class TestLeastSquaresHead:
    """
    **Feature: mhdsc-inference, Property 3: ridge least-squares head**
    """

    def test_identity_codes(self):
        Y = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        np.testing.assert_allclose(train_ls_head(np.eye(3), Y, ridge=0.0), Y, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_planted_linear_map(self, seed):
        rng = np.random.default_rng(seed)
        W_L, M = rng.normal(size=(4, 12)), rng.normal(size=(3, 4))
        A = train_ls_head(W_L, M @ W_L, ridge=0.0)
        np.testing.assert_allclose(A, M, atol=1e-8)
        np.testing.assert_allclose(predict_ls(A, W_L), M @ W_L, atol=1e-8)

    def test_large_ridge_shrinks_to_zero(self):
        rng = np.random.default_rng(1)
        A = train_ls_head(rng.normal(size=(3, 10)), rng.uniform(size=(2, 10)), ridge=1e12)
        assert np.abs(A).max() < 1e-9

    def test_singular_without_ridge(self):
        W_L = np.vstack([np.ones(5), np.ones(5)])
        with pytest.raises(NumericalError, match="ridge"):
            train_ls_head(W_L, np.ones((1, 5)), ridge=0.0)
        assert np.all(np.isfinite(train_ls_head(W_L, np.ones((1, 5)), ridge=1e-3)))

    def test_negative_ridge(self):
        with pytest.raises(ValidationError):
            train_ls_head(np.eye(2), np.eye(2), ridge=-1.0)
