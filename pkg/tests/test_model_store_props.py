"""
Property-based tests for the binary model file.
Uses Hypothesis library for property testing.

**Feature: mhdsc-model-store**
"""
import os
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pipeline.errors import ModelFormatError, UnsupportedVersionError
from pipeline.model_store import MAGIC, load_model, save_model
from pipeline.solver import Hyperparams, ModelState


def _state(seed: int, dims=(3, 2), n_classes: int = 2, n_atoms: int = 4, n: int = 7, l: int = 3,
           hp: Hyperparams = None) -> ModelState:
    rng = np.random.default_rng(seed)
    dicts = [rng.normal(size=(p, n_atoms)) for p in list(dims) + [n_classes]]
    alpha = rng.uniform(size=len(dims) + 1)
    return ModelState(dictionaries=dicts, codes=rng.normal(size=(n_atoms, n)), alpha=alpha / alpha.sum(),
                      labelled_count=l, hyperparams=hp)


def _assert_same(a: ModelState, b: ModelState):
    assert len(a.dictionaries) == len(b.dictionaries)
    for x, y in zip(a.dictionaries, b.dictionaries):
        np.testing.assert_array_equal(x, y)
    np.testing.assert_array_equal(a.codes, b.codes)
    np.testing.assert_array_equal(a.alpha, b.alpha)
    assert a.labelled_count == b.labelled_count
    assert a.hyperparams == b.hyperparams


class TestRoundTrip:
    """
    **Feature: mhdsc-model-store, Property 1: save/load is bit-exact**
    """

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), dims=st.lists(st.integers(1, 5), min_size=1, max_size=3),
           n_atoms=st.integers(1, 6), n=st.integers(1, 9), data=st.data())
    def test_arrays_survive(self, tmp_path_factory, seed, dims, n_atoms, n, data):
        l = data.draw(st.integers(1, n))
        state = _state(seed, dims=dims, n_atoms=n_atoms, n=n, l=l)
        path = str(tmp_path_factory.mktemp("m") / "model.bin")
        _assert_same(load_model(save_model(state, path)), state)

    def test_hyperparams_survive(self, tmp_path):
        hp = Hyperparams(gamma1=0.1 + 0.2, gamma3=1e-17, r=1.5, regularizer="laplacian", neighbors=7,
                         include_label_view=False, laplacian_weighting="heat", heat_sigma=2.5)
        state = _state(1, hp=hp)
        back = load_model(save_model(state, str(tmp_path / "m.bin")))
        _assert_same(back, state)
        assert back.hyperparams.include_label_view is False

    def test_identical_state_gives_identical_bytes(self, tmp_path):
        state = _state(2, hp=Hyperparams())
        a = save_model(state, str(tmp_path / "a.bin"))
        b = save_model(state, str(tmp_path / "b.bin"))
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()


class TestCorruption:
    """
    **Feature: mhdsc-model-store, Property 2: damaged files are rejected**
    """

    def _bytes(self, tmp_path) -> bytes:
        path = save_model(_state(3, hp=Hyperparams()), str(tmp_path / "m.bin"))
        with open(path, "rb") as fh:
            return fh.read()

    def _load(self, tmp_path, blob: bytes):
        path = tmp_path / "bad.bin"
        path.write_bytes(blob)
        return load_model(str(path))

    def test_bad_magic(self, tmp_path):
        blob = self._bytes(tmp_path)
        with pytest.raises(ModelFormatError, match="magic"):
            self._load(tmp_path, b"XXXXXX" + blob[len(MAGIC):])

    def test_newer_version(self, tmp_path):
        blob = self._bytes(tmp_path)
        with pytest.raises(UnsupportedVersionError):
            self._load(tmp_path, b"MHDSC2" + blob[len(MAGIC):])

    @pytest.mark.parametrize("keep", [0, 3, 10, 40, -1])
    def test_truncated(self, tmp_path, keep):
        blob = self._bytes(tmp_path)
        with pytest.raises(ModelFormatError):
            self._load(tmp_path, blob[:keep] if keep >= 0 else blob[:-1])

    def test_trailing_bytes(self, tmp_path):
        with pytest.raises(ModelFormatError, match="trailing"):
            self._load(tmp_path, self._bytes(tmp_path) + b"\x00")

    def test_unsupported_version_is_a_format_error(self):
        assert issubclass(UnsupportedVersionError, ModelFormatError)
