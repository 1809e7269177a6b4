"""
Property-based tests for datasets: file format, synthetic generator, normalization and splits.
Uses Hypothesis library for property testing.

**Feature: mhdsc-dataset**
"""
import os
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import pdist

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pipeline.dataset import (
    MultiviewDataset,
    SynthSpec,
    concatenate_views,
    holdout_indices,
    load_dataset,
    load_ground_truth,
    normalize_views,
    save_dataset,
    save_ground_truth,
    select_view,
    split_holdout,
    split_labelled,
    synth_multiview,
)
from pipeline.errors import DatasetFormatError, ValidationError

GOOD_FILE = """MVDS v1 V=2 N=4 l=2 Pc=2 P=3,2
1 2 3 4
0 0 0 0
-1 0.5 2.5 1e-3
4 3 2 1
1 1 1 1
1 0
0 1
"""


def _write(tmp_path, text: str, name: str = "d.mvds") -> str:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestLoadDataset:
    """
    **Feature: mhdsc-dataset, Property 1: the text format is validated with a location**
    """

    def test_shapes_follow_header(self, tmp_path):
        d = load_dataset(_write(tmp_path, GOOD_FILE))
        assert d.n_views == 2 and d.dims == [3, 2]
        assert d.total_count == 4 and d.labelled_count == 2 and d.n_classes == 2
        np.testing.assert_array_equal(d.Y, [[1, 0], [0, 1]])
        assert d.X_U(1).shape == (2, 2)

    def test_fractional_label_rejected(self, tmp_path):
        text = GOOD_FILE.replace("1 0\n0 1\n", "1 0\n0 0.5\n")
        with pytest.raises(DatasetFormatError, match=r"label not in \{0,1\}") as info:
            load_dataset(_write(tmp_path, text))
        assert info.value.line == 8 and info.value.column == 2

    def test_too_many_columns(self, tmp_path):
        text = GOOD_FILE.replace("1 2 3 4\n", "1 2 3 4 5\n")
        with pytest.raises(DatasetFormatError, match="dimension mismatch") as info:
            load_dataset(_write(tmp_path, text))
        assert info.value.line == 2

    def test_non_finite_value(self, tmp_path):
        text = GOOD_FILE.replace("4 3 2 1\n", "4 nan 2 1\n")
        with pytest.raises(DatasetFormatError, match="non-finite") as info:
            load_dataset(_write(tmp_path, text))
        assert (info.value.line, info.value.column) == (5, 2)

    def test_missing_rows(self, tmp_path):
        text = GOOD_FILE.replace("0 1\n", "")
        with pytest.raises(DatasetFormatError, match="dimension mismatch"):
            load_dataset(_write(tmp_path, text))

    @pytest.mark.parametrize("head", ["MVDX v1 V=2 N=4 l=2 Pc=2 P=3,2", "MVDS v2 V=2 N=4 l=2 Pc=2 P=3,2",
                                      "MVDS v1 V=2 N=4 l=5 Pc=2 P=3,2", "MVDS v1 V=3 N=4 l=2 Pc=2 P=3,2"])
    def test_malformed_header(self, tmp_path, head):
        text = head + GOOD_FILE[GOOD_FILE.index("\n"):]
        with pytest.raises(DatasetFormatError) as info:
            load_dataset(_write(tmp_path, text))
        assert info.value.line == 1

    def test_save_load_is_exact(self, tmp_path):
        data, _ = synth_multiview(SynthSpec(views=2, dims=(5, 3), n_samples=30, seed=4))
        data = split_labelled(data, 0.4, seed=1)
        path = save_dataset(data, str(tmp_path / "out" / "d.mvds"))
        back = load_dataset(path)
        for v in range(2):
            np.testing.assert_array_equal(back.X(v), data.X(v))
        np.testing.assert_array_equal(back.Y, data.Y)
        assert back.labelled_count == 12


class TestDatasetInvariants:
    """
    **Feature: mhdsc-dataset, Property 2: shapes agree and arrays are read-only**
    """

    def test_label_values_checked(self):
        with pytest.raises(ValidationError, match="label not in"):
            MultiviewDataset.from_arrays([np.zeros((2, 3))], np.array([[0.5, 1.0, 0.0]]))

    def test_column_counts_checked(self):
        with pytest.raises(ValidationError, match="dimension mismatch"):
            MultiviewDataset.from_arrays([np.zeros((2, 3)), np.zeros((2, 4))], np.ones((1, 3)))

    def test_arrays_are_read_only(self):
        d = MultiviewDataset.from_arrays([np.zeros((2, 3))], np.ones((1, 2)), 2)
        with pytest.raises(ValueError):
            d.X(0)[0, 0] = 1.0

    def test_view_selection_and_concatenation(self):
        data, _ = synth_multiview(SynthSpec(views=3, dims=(4, 2, 3), n_samples=10, seed=0))
        assert select_view(data, 1).dims == [2]
        assert concatenate_views(data).dims == [9]
        with pytest.raises(ValidationError):
            select_view(data, 3)


class TestSynthMultiview:
    """
    **Feature: mhdsc-dataset, Property 3: planted model is deterministic and exact without noise**
    """

    def test_noiseless_one_sparse_columns_are_atoms(self):
        spec = SynthSpec(views=2, dims=(6, 4), n_samples=40, n_atoms_true=5, sparsity=1, noise_sigma=0.0, seed=2)
        data, truth = synth_multiview(spec)
        for j in range(40):
            (atom,) = truth.supports[j]
            c = truth.codes[atom, j]
            assert 0.5 <= abs(c) <= 1.5
            for v in range(2):
                np.testing.assert_allclose(data.X(v)[:, j], c * truth.dictionaries[v][:, atom], atol=1e-15)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2 ** 31 - 1), manifold=st.sampled_from(["none", "grid2d", "swiss_roll"]))
    def test_same_seed_is_bit_identical(self, seed, manifold):
        spec = dict(views=2, dims=(5, 3), n_samples=25, sparsity=3, manifold=manifold, seed=seed)
        a, ta = synth_multiview(SynthSpec(**spec))
        b, tb = synth_multiview(SynthSpec(**spec))
        for v in range(2):
            np.testing.assert_array_equal(a.X(v), b.X(v))
        np.testing.assert_array_equal(a.Y, b.Y)
        np.testing.assert_array_equal(ta.codes, tb.codes)

    def test_dictionary_columns_have_unit_norm(self):
        _, truth = synth_multiview(SynthSpec(seed=5))
        for d in truth.dictionaries:
            np.testing.assert_allclose(np.linalg.norm(d, axis=0), 1.0, atol=1e-12)

    def test_grid_codes_preserve_grid_distances(self):
        spec = SynthSpec(views=2, dims=(6, 6), n_samples=100, n_atoms_true=8, sparsity=2, noise_sigma=0.0,
                         manifold="grid2d", seed=3)
        _, truth = synth_multiview(spec)
        support = truth.supports[0]
        assert all(np.array_equal(s, support) for s in truth.supports)
        np.testing.assert_allclose(pdist(truth.codes[support].T), pdist(truth.manifold_coords.T), atol=1e-12)
        assert np.all(truth.codes[support] != 0)

    def test_labels_cover_both_values(self):
        data, _ = synth_multiview(SynthSpec(n_samples=60, seed=8))
        assert np.all(data.Y.sum(axis=1) > 0) and np.all(data.Y.sum(axis=1) < 60)

    @pytest.mark.parametrize("bad", [dict(sparsity=11), dict(dims=(8, 8)), dict(noise_sigma=-1.0),
                                     dict(manifold="sphere"), dict(manifold="swiss_roll", sparsity=2)])
    def test_invalid_synth_parameters(self, bad):
        with pytest.raises(ValidationError):
            synth_multiview(SynthSpec(**bad))

    def test_ground_truth_round_trip(self, tmp_path):
        _, truth = synth_multiview(SynthSpec(views=2, dims=(4, 3), n_samples=20, manifold="grid2d", seed=1))
        back = load_ground_truth(save_ground_truth(truth, str(tmp_path / "g.truth")))
        for a, b in zip(truth.dictionaries, back.dictionaries):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(back.codes, truth.codes)
        np.testing.assert_array_equal(back.thresholds, truth.thresholds)
        np.testing.assert_array_equal(back.manifold_coords, truth.manifold_coords)
        assert all(np.array_equal(a, b) for a, b in zip(truth.supports, back.supports))


class TestNormalizeViews:
    """
    **Feature: mhdsc-dataset, Property 4: unit normalization is idempotent**
    """

    def test_examples(self):
        d = MultiviewDataset.from_arrays([np.array([[3.0, 0.0, 1.0], [4.0, 0.0, 0.0]])], np.ones((1, 3)))
        np.testing.assert_allclose(normalize_views(d).X(0), [[0.6, 0.0, 1.0], [0.8, 0.0, 0.0]], atol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        d = MultiviewDataset.from_arrays([rng.normal(size=(4, 6)), rng.normal(size=(2, 6))], np.ones((1, 6)))
        once = normalize_views(d)
        twice = normalize_views(once)
        for v in range(2):
            np.testing.assert_allclose(np.linalg.norm(once.X(v), axis=0), 1.0, atol=1e-12)
            np.testing.assert_allclose(twice.X(v), once.X(v), atol=1e-15)

    def test_zscore_and_none(self):
        rng = np.random.default_rng(0)
        d = MultiviewDataset.from_arrays([rng.normal(3.0, 2.0, (3, 10))], np.ones((1, 10)))
        z = normalize_views(d, "zscore").X(0)
        np.testing.assert_allclose(z.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(z.std(axis=1), 1.0, atol=1e-12)
        assert normalize_views(d, "none") is d
        with pytest.raises(ValidationError):
            normalize_views(d, "l1")


class TestSplits:
    """
    **Feature: mhdsc-dataset, Property 5: labelled and hold-out splits are seeded partitions**
    """

    def _full(self, n: int = 100) -> MultiviewDataset:
        data, _ = synth_multiview(SynthSpec(views=2, dims=(3, 3), n_samples=n, seed=0))
        return data

    def test_full_fraction(self):
        d = split_labelled(self._full(), 1.0, seed=0)
        assert d.labelled_count == d.total_count == 100

    def test_half_fraction(self):
        assert split_labelled(self._full(), 0.5, seed=0).labelled_count == 50

    def test_same_seed_same_partition(self):
        a = split_labelled(self._full(), 0.3, seed=5)
        b = split_labelled(self._full(), 0.3, seed=5)
        np.testing.assert_array_equal(a.X(0), b.X(0))
        np.testing.assert_array_equal(a.Y, b.Y)

    def test_labels_follow_their_columns(self):
        full = self._full()
        d = split_labelled(full, 0.2, seed=3)
        for j in range(d.labelled_count):
            src = np.flatnonzero(np.all(full.X(0) == d.X(0)[:, [j]], axis=0))[0]
            np.testing.assert_array_equal(d.Y[:, j], full.Y[:, src])

    @pytest.mark.parametrize("fraction", [0.0, 0.001, 1.5])
    def test_bad_fraction(self, fraction):
        with pytest.raises(ValidationError):
            split_labelled(self._full(), fraction)

    def test_cannot_ask_for_more_labels_than_available(self):
        half = split_labelled(self._full(), 0.5, seed=0)
        with pytest.raises(ValidationError):
            split_labelled(half, 0.8)

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(2, 50), data=st.data())
    def test_holdout_partitions_columns(self, n, data):
        n_test = data.draw(st.integers(1, n - 1))
        train, test = holdout_indices(n, n_test, seed=data.draw(st.integers(0, 1000)))
        assert test.size == n_test
        assert sorted(np.concatenate([train, test]).tolist()) == list(range(n))

    def test_holdout_needs_full_labels(self):
        with pytest.raises(ValidationError):
            split_holdout(split_labelled(self._full(), 0.5), 10)
