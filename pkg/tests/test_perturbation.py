"""Mask generation, kernel weighting, mask application and grid segmentation."""

import numpy as np
import pytest

from eblime import (
    FeatureSpace,
    InvalidInputError,
    KernelConfig,
    PerturbationSet,
    apply_mask,
    generate_masks,
    grid_segment,
    kernel_weights,
    make_mean_mask_model,
)
from eblime.perturbation import (
    build_perturbation_set,
    default_theta,
    read_image,
    read_pgm,
    write_pgm,
    write_segment_csv,
)


class TestGenerateMasks:
    def test_forced_all_ones_row(self):
        masks = generate_masks(3, 1, seed=0, include_z0=True)
        np.testing.assert_array_equal(masks, [[1.0, 1.0, 1.0]])

    def test_column_means_near_half(self):
        masks = generate_masks(8, 4096, seed=7, include_z0=False)
        means = masks.mean(axis=0)
        assert np.all(np.abs(means - 0.5) < 0.03)

    def test_deterministic(self):
        a = generate_masks(6, 128, seed=123)
        b = generate_masks(6, 128, seed=123)
        np.testing.assert_array_equal(a, b)
        c = generate_masks(6, 128, seed=124)
        assert not np.array_equal(a, c)

    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            generate_masks(0, 5, seed=0)
        with pytest.raises(InvalidInputError):
            generate_masks(5, 0, seed=0)

    def test_binary_entries(self):
        masks = generate_masks(5, 200, seed=11)
        assert set(np.unique(masks)) <= {0.0, 1.0}


class TestKernelWeights:
    def test_all_ones_has_weight_one(self):
        for theta in (0.3, 1.0, 5.0):
            w = kernel_weights(np.ones((1, 6)), KernelConfig(theta=theta))
            assert w[0] == 1.0

    def test_euclidean_closed_form(self):
        mask = np.array([[1, 0, 0, 1, 0, 0, 1, 1]], dtype=float)  # 4 zeros
        w = kernel_weights(mask, KernelConfig(theta=2.0))
        assert w[0] == pytest.approx(np.exp(-1.0), rel=1e-15)

    def test_full_enumeration_matches_direct_recomputation(self):
        p = 4
        masks = np.array([[(i >> j) & 1 for j in range(p)] for i in range(16)], dtype=float)
        cfg = KernelConfig(theta=1.0)
        got = kernel_weights(masks, cfg)
        for i in range(16):
            zeros = sum(1 for j in range(p) if masks[i, j] == 0)
            assert got[i] == np.exp(-zeros / 1.0**2)

    def test_cosine_distance(self):
        p = 4
        cfg = KernelConfig(theta=0.5, distance="cosine")
        masks = np.array([[1, 1, 1, 1], [1, 1, 0, 0], [0, 0, 0, 0]], dtype=float)
        w = kernel_weights(masks, cfg)
        assert w[0] == 1.0
        d_half = 1.0 - np.sqrt(2.0 / p)
        assert w[1] == pytest.approx(np.exp(-(d_half**2) / 0.25), rel=1e-12)
        assert w[2] == pytest.approx(np.exp(-1.0 / 0.25), rel=1e-12)

    def test_weights_in_unit_interval(self):
        masks = generate_masks(9, 500, seed=5)
        w = kernel_weights(masks, KernelConfig(theta=default_theta(9)))
        assert np.all(w > 0) and np.all(w <= 1.0)


class TestApplyMask:
    def test_abstract_returns_mask(self):
        space = FeatureSpace.abstract(4)
        mask = np.array([1.0, 0.0, 1.0, 0.0])
        np.testing.assert_array_equal(apply_mask(space, np.ones(4), mask), mask)

    def test_all_ones_identity(self):
        labels = grid_segment(4, 4, 2, 2)
        space = FeatureSpace.image(labels)
        img = np.arange(16, dtype=float).reshape(4, 4) / 16.0
        np.testing.assert_array_equal(apply_mask(space, img, np.ones(4)), img)

    def test_all_zeros_baseline_fill(self):
        labels = grid_segment(4, 4, 2, 2)
        space = FeatureSpace.image(labels, baseline=0.5)
        img = np.arange(16, dtype=float).reshape(4, 4) / 16.0
        np.testing.assert_array_equal(apply_mask(space, img, np.zeros(4)), np.full((4, 4), 0.5))

    def test_two_segment_hand_oracle(self):
        # segments: left column = 0, right column = 1
        labels = np.array([[0, 1], [0, 1]])
        space = FeatureSpace.image(labels)
        img = np.array([[0.1, 0.2], [0.3, 0.4]])
        out = apply_mask(space, img, np.array([1.0, 0.0]))
        np.testing.assert_array_equal(out, [[0.1, 0.0], [0.3, 0.0]])

    def test_dim_mismatch_rejected(self):
        space = FeatureSpace.image(grid_segment(4, 4, 2, 2))
        with pytest.raises(InvalidInputError):
            apply_mask(space, np.ones((3, 3)), np.ones(4))
        with pytest.raises(InvalidInputError):
            apply_mask(space, np.ones((4, 4)), np.ones(5))


class TestGridSegment:
    def test_exact_division(self):
        labels = grid_segment(4, 4, 2, 2)
        expected = np.array(
            [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]]
        )
        np.testing.assert_array_equal(labels, expected)

    def test_uneven_rows(self):
        labels = grid_segment(5, 4, 2, 2)
        row_sizes = sorted(np.sum(np.any(labels == lab, axis=1)) for lab in (0, 2))
        assert row_sizes == [2, 3]
        # first block takes the extra pixel
        assert np.all(labels[0:3, 0:2] == 0)

    def test_degenerate(self):
        np.testing.assert_array_equal(grid_segment(1, 1, 1, 1), [[0]])

    def test_surjective_labels(self):
        for h, w, r, c in [(7, 5, 3, 2), (10, 10, 4, 4), (13, 9, 5, 3)]:
            labels = grid_segment(h, w, r, c)
            assert set(np.unique(labels)) == set(range(r * c))

    def test_rejects_oversized_grid(self):
        with pytest.raises(InvalidInputError):
            grid_segment(2, 2, 3, 1)


class TestPerturbationSet:
    def test_pure_function_of_inputs(self):
        space = FeatureSpace.abstract(6)
        model = make_mean_mask_model(6)
        a = build_perturbation_set(space, np.ones(6), model, 40, seed=9)
        b = build_perturbation_set(space, np.ones(6), model, 40, seed=9)
        np.testing.assert_array_equal(a.masks, b.masks)
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.responses, b.responses)

    def test_weights_recomputable_after_round_trip(self):
        space = FeatureSpace.abstract(5)
        model = make_mean_mask_model(5)
        pset = build_perturbation_set(space, np.ones(5), model, 30, seed=4)
        restored = PerturbationSet.from_json_dict(pset.to_json_dict())
        recomputed = kernel_weights(restored.masks, restored.kernel)
        np.testing.assert_array_equal(restored.weights, recomputed)

    def test_z0_row_present_by_default(self):
        space = FeatureSpace.abstract(7)
        pset = build_perturbation_set(space, np.ones(7), make_mean_mask_model(7), 20, seed=1)
        np.testing.assert_array_equal(pset.masks[0], np.ones(7))
        assert pset.weights[0] == 1.0


class TestImageIO:
    def test_pgm_round_trip(self, tmp_path):
        img = np.linspace(0, 1, 24).reshape(4, 6)
        path = tmp_path / "img.pgm"
        write_pgm(img, path)
        back = read_pgm(path)
        assert back.shape == (4, 6)
        assert np.max(np.abs(back - img)) <= 1.0 / 255.0

    def test_read_image_dispatches(self, tmp_path):
        img = np.zeros((3, 3))
        path = tmp_path / "img.pgm"
        write_pgm(img, path)
        np.testing.assert_array_equal(read_image(path), img)
        with pytest.raises(InvalidInputError):
            read_image(tmp_path / "img.bmp")

    def test_segment_csv(self, tmp_path):
        labels = grid_segment(2, 3, 1, 3)
        path = tmp_path / "labels.csv"
        write_segment_csv(labels, path)
        assert path.read_text() == "0,1,2\n0,1,2\n"
