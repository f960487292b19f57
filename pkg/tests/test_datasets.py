"""Synthetic domain generation and the dataset file format."""

import numpy as np
import pytest

import shiftlab as sl
from shiftlab.datasets import load_domain, save_domain
from shiftlab.losses import MmdConfig, mmd_value
from shiftlab.numeric import Rng


def spec(**kw) -> sl.ShiftSpec:
    base = dict(num_classes=3, dim=2, per_class_count=100, rotation_deg=0.0, noise_sigma=0.4, seed=7)
    base.update(kw)
    return sl.ShiftSpec(**base)


class TestGeneratePair:
    def test_counts_and_balance(self):
        source, target = sl.generate_pair(spec())
        assert source.features.shape == (300, 2)
        assert target.features.shape == (300, 2)
        assert np.bincount(source.labels).tolist() == [100, 100, 100]
        assert np.bincount(target.hidden_labels).tolist() == [100, 100, 100]

    def test_pure_function_of_spec(self):
        a_src, a_tgt = sl.generate_pair(spec(rotation_deg=30.0, seed=123))
        b_src, b_tgt = sl.generate_pair(spec(rotation_deg=30.0, seed=123))
        assert np.array_equal(a_src.features, b_src.features)
        assert np.array_equal(a_src.labels, b_src.labels)
        assert np.array_equal(a_tgt.features, b_tgt.features)
        assert np.array_equal(a_tgt.hidden_labels, b_tgt.hidden_labels)

    def test_antipodal_means_swap_under_half_turn(self):
        source, target = sl.generate_pair(
            spec(num_classes=2, per_class_count=50, rotation_deg=180.0, noise_sigma=1e-6)
        )
        src_mean_0 = source.features[source.labels == 0].mean(axis=0)
        src_mean_1 = source.features[source.labels == 1].mean(axis=0)
        tgt_mean_0 = target.features[target.hidden_labels == 0].mean(axis=0)
        tgt_mean_1 = target.features[target.hidden_labels == 1].mean(axis=0)
        assert np.allclose(tgt_mean_0, src_mean_1, atol=1e-5)
        assert np.allclose(tgt_mean_1, src_mean_0, atol=1e-5)

    def test_translation_moves_target_only(self):
        shifted = spec(dim=3, translation=np.array([10.0, 0.0, -1.0]))
        plain = spec(dim=3)
        s1, t1 = sl.generate_pair(shifted)
        s0, t0 = sl.generate_pair(plain)
        assert np.array_equal(s1.features, s0.features)
        assert np.allclose(t1.features - t0.features, [10.0, 0.0, -1.0])

    def test_extra_dims_are_zero_mean_noise(self):
        source, _ = sl.generate_pair(spec(dim=5, per_class_count=400))
        tail = source.features[:, 2:]
        assert np.abs(tail.mean(axis=0)).max() < 0.05
        assert abs(tail.std() - 0.4) < 0.02

    @pytest.mark.parametrize(
        "bad",
        [
            dict(noise_sigma=0.0),
            dict(num_classes=1),
            dict(num_classes=17),
            dict(dim=1),
            dict(per_class_count=0),
            dict(translation=np.array([1.0])),
        ],
    )
    def test_invalid_spec_rejected(self, bad):
        with pytest.raises(ValueError):
            spec(**bad)

    def test_zero_shift_passes_permutation_null_test(self):
        # With no shift, the two-sample MMD should look like a draw from its
        # permutation null: below the 95th percentile in >= 90% of seeds.
        cfg = MmdConfig()
        passes = 0
        n_seeds = 20
        for trial in range(n_seeds):
            source, target = sl.generate_pair(
                spec(per_class_count=20, noise_sigma=0.5, seed=1000 + trial)
            )
            observed = mmd_value(source.features, target.features, cfg)
            pooled = np.concatenate([source.features, target.features], axis=0)
            half = len(source.features)
            perm_rng = Rng(555 + trial)
            null = []
            for _ in range(99):
                perm = perm_rng.permutation(len(pooled))
                null.append(
                    mmd_value(pooled[perm[:half]], pooled[perm[half:]], cfg)
                )
            if observed < np.quantile(null, 0.95):
                passes += 1
        assert passes >= 18

    def test_rotated_pair_fails_permutation_null_test(self):
        cfg = MmdConfig()
        source, target = sl.generate_pair(spec(per_class_count=20, rotation_deg=45.0, seed=4))
        observed = mmd_value(source.features, target.features, cfg)
        pooled = np.concatenate([source.features, target.features], axis=0)
        perm_rng = Rng(9)
        null = [
            mmd_value(pooled[p[:60]], pooled[p[60:]], cfg)
            for p in (perm_rng.permutation(120) for _ in range(99))
        ]
        assert observed > np.quantile(null, 0.95)


class TestDomainTypes:
    def test_label_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="labels must lie"):
            sl.LabeledDomain(np.zeros((4, 2)), [0, 1, 2, 3], num_classes=3)

    def test_label_count_mismatch_rejected(self):
        with pytest.raises(ValueError, match="labels"):
            sl.LabeledDomain(np.zeros((4, 2)), [0, 1], num_classes=2)

    def test_non_finite_features_rejected(self):
        feats = np.zeros((2, 2))
        feats[0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            sl.UnlabeledDomain(feats, num_classes=2)

    def test_without_hidden_labels(self):
        _, target = sl.generate_pair(spec())
        stripped = target.without_hidden_labels()
        assert stripped.hidden_labels is None
        assert np.array_equal(stripped.features, target.features)
        assert target.hidden_labels is not None


class TestFileFormat:
    def test_labeled_round_trip_is_bit_exact(self, tmp_path):
        source, _ = sl.generate_pair(spec(seed=31))
        path = tmp_path / "source.txt"
        save_domain(source, path)
        loaded = load_domain(path)
        assert isinstance(loaded, sl.LabeledDomain)
        assert np.array_equal(loaded.features, source.features)
        assert np.array_equal(loaded.labels, source.labels)
        assert loaded.num_classes == source.num_classes

    def test_unlabeled_round_trip_drops_hidden_labels(self, tmp_path):
        _, target = sl.generate_pair(spec(seed=31))
        path = tmp_path / "target.txt"
        save_domain(target, path)
        loaded = load_domain(path)
        assert isinstance(loaded, sl.UnlabeledDomain)
        assert np.array_equal(loaded.features, target.features)
        assert loaded.hidden_labels is None

    def test_header_shape(self, tmp_path):
        source, _ = sl.generate_pair(spec(per_class_count=2, seed=1))
        path = tmp_path / "d.txt"
        save_domain(source, path)
        header = path.read_text().splitlines()[0]
        assert header == "6 2 3 1"

    def test_non_numeric_cell_names_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 2 2 0\n1.0 2.0\n1.0 oops\n")
        with pytest.raises(ValueError, match="line 3"):
            load_domain(path)

    def test_label_out_of_range_names_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 1 3 1\n0.5 0\n0.5 5\n")
        with pytest.raises(ValueError, match="line 3.*label 5 out of range"):
            load_domain(path)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3 2 2 0\n1.0 2.0\n")
        with pytest.raises(ValueError, match="expected 3 sample lines"):
            load_domain(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 2 2\n")
        with pytest.raises(ValueError, match="line 1"):
            load_domain(path)
