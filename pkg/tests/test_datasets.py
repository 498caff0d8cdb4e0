"""Synthetic generators, CSV/FASTA ingestion, k-mer vectorizer."""

import numpy as np
import pytest

from confmix.core import FormatError
from confmix.datasets import (
    BLOBS_PRESET_CENTERS,
    BLOBS_PRESET_N,
    BLOBS_PRESET_STDS,
    BLOBS_PRESET_WEIGHTS,
    Preprocessor,
    kmer_counts,
    load_csv,
    make_blobs,
    make_circles,
    make_moons,
    read_fasta,
    save_csv,
)
from confmix.core import FeatureMatrix


class TestMoons:
    def test_noise_zero_on_circles(self):
        ds = make_moons(100, noise=0.0)
        pts = ds.features.values
        lab = ds.labels.labels
        outer = pts[lab == 1]
        inner = pts[lab == 2]
        assert np.allclose(np.linalg.norm(outer, axis=1), 1.0)
        assert np.allclose(np.linalg.norm(inner - [1.0, 0.5], axis=1), 1.0)

    def test_balance(self):
        ds = make_moons(1000)
        assert list(np.bincount(ds.labels.labels)[1:]) == [500, 500]

    def test_deterministic(self):
        a = make_moons(50, seed=4).features.values
        b = make_moons(50, seed=4).features.values
        assert np.array_equal(a, b)

    def test_validation(self):
        with pytest.raises(ValueError):
            make_moons(3)
        with pytest.raises(ValueError):
            make_moons(10, noise=-0.1)


class TestBlobs:
    def test_preset_shape(self):
        ds = make_blobs(BLOBS_PRESET_N, seed=0)
        assert ds.features.values.shape == (BLOBS_PRESET_N, len(BLOBS_PRESET_CENTERS[0]))
        counts = np.bincount(ds.labels.labels)[1:]
        assert list(counts) == list(BLOBS_PRESET_WEIGHTS)

    def test_zero_std_degenerate(self):
        ds = make_blobs(6, centers=[(1.0, 2.0)], stds=[0.0])
        assert np.allclose(ds.features.values, [1.0, 2.0])

    def test_balanced_split_without_weights(self):
        ds = make_blobs(10, centers=[(0.0,), (5.0,), (9.0,)], stds=[0.1] * 3)
        assert sorted(np.bincount(ds.labels.labels)[1:]) == [3, 3, 4]

    def test_arity_mismatch(self):
        with pytest.raises(ValueError):
            make_blobs(10, centers=[(0.0,), (1.0,)], stds=[0.1])

    def test_deterministic(self):
        a = make_blobs(40, seed=1).features.values
        b = make_blobs(40, seed=1).features.values
        assert np.array_equal(a, b)

    def test_preset_is_three_collinear_blobs(self):
        c = np.asarray(BLOBS_PRESET_CENTERS)
        assert c.shape[0] == 3 and len(BLOBS_PRESET_STDS) == 3
        assert np.allclose(c[:, 1:], 0.0)  # collinear along the first axis


class TestCircles:
    def test_radii(self):
        ds = make_circles(100, noise=0.0, factor=0.4)
        pts = ds.features.values
        lab = ds.labels.labels
        assert np.allclose(np.linalg.norm(pts[lab == 1], axis=1), 1.0)
        assert np.allclose(np.linalg.norm(pts[lab == 2], axis=1), 0.4)

    def test_factor_range(self):
        with pytest.raises(ValueError):
            make_circles(10, factor=1.5)


class TestKmer:
    def test_length(self):
        assert kmer_counts("ACGTACGTAC", k=7).size == 4 ** 7

    def test_sliding_window(self):
        counts = kmer_counts("AAAA", k=2)
        assert counts[0] == 3  # "AA" -> index 0
        assert counts.sum() == 3

    def test_encoding_msb_first(self):
        counts = kmer_counts("CT", k=2)
        # C=1, T=3 -> 1*4 + 3 = 7
        assert counts[7] == 1 and counts.sum() == 1

    def test_window_sum(self):
        seq = "ACGTACGTACGT"
        assert kmer_counts(seq, k=3).sum() == len(seq) - 3 + 1

    def test_ambiguous_skipped(self):
        with pytest.warns(UserWarning):
            counts = kmer_counts("AANAA", k=2)
        assert counts.sum() == 2  # windows (0,1) and (3,4)

    def test_validation(self):
        with pytest.raises(ValueError):
            kmer_counts("ACGT", k=0)
        with pytest.raises(ValueError):
            kmer_counts("AC", k=3)


class TestFasta:
    def test_parse(self, tmp_path):
        p = tmp_path / "x.fasta"
        p.write_text(">seq1\nACGT\nACGT\n>seq2\nTTTT\n")
        recs = read_fasta(p)
        assert recs == [("seq1", "ACGTACGT"), ("seq2", "TTTT")]

    def test_data_before_header(self, tmp_path):
        p = tmp_path / "bad.fasta"
        p.write_text("ACGT\n>seq1\nACGT\n")
        with pytest.raises(FormatError):
            read_fasta(p)


class TestCsv:
    def test_roundtrip(self, tmp_path):
        ds = make_moons(20, seed=0)
        p = tmp_path / "m.csv"
        save_csv(ds, p)
        back = load_csv(p, label_column=-1)
        assert np.array_equal(back.features.values, ds.features.values)
        assert np.array_equal(back.labels.labels, ds.labels.labels)

    def test_header_skipped(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("a,b\n1.0,2.0\n3.0,4.0\n")
        ds = load_csv(p, has_header=True)
        assert ds.features.values.tolist() == [[1.0, 2.0], [3.0, 4.0]]

    def test_error_positions(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1.0,2.0\n3.0,oops\n")
        with pytest.raises(FormatError, match="row 2, column 2"):
            load_csv(p)

    def test_ragged(self, tmp_path):
        p = tmp_path / "ragged.csv"
        p.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(FormatError):
            load_csv(p)

    def test_non_integer_labels(self, tmp_path):
        p = tmp_path / "fl.csv"
        p.write_text("1.0,1.5\n2.0,2.0\n")
        with pytest.raises(FormatError):
            load_csv(p, label_column=-1)


class TestPreprocessor:
    def test_fit_on_train_only(self):
        rng = np.random.default_rng(0)
        train = FeatureMatrix(rng.normal(size=(50, 4)) * [1.0, 5.0, 0.0001, 2.0])
        test = FeatureMatrix(rng.normal(size=(20, 4)) * [1.0, 5.0, 0.0001, 2.0])
        pre = Preprocessor(top_k=2).fit(train)
        out_train = pre.transform(train)
        out_test = pre.transform(test)
        assert out_train.n_features == 2
        assert out_test.n_features == 2

    def test_requires_fit(self):
        with pytest.raises(ValueError):
            Preprocessor().transform(FeatureMatrix([[0.0], [1.0]]))

    def test_params_roundtrip_shape(self):
        pre = Preprocessor().fit(FeatureMatrix([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]))
        params = pre.params()
        assert len(params["center"]) == 2 and len(params["keep"]) == 2
