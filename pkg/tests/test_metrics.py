"""Quality metric identities."""

import numpy as np
import pytest

from semsplat.errors import InvalidParameterError
from semsplat.metrics import (PSNR_CAP_DB, iou_per_class,
                              localization_accuracy, mask_miou, mean_iou,
                              psnr)


class TestPSNR:
    def test_identical_images_hit_cap(self, rng):
        img = rng.uniform(0, 1, (8, 8, 3))
        assert psnr(img, img) == PSNR_CAP_DB

    def test_uniform_difference_is_twenty_db(self):
        a = np.full((8, 8, 3), 0.1)
        b = np.zeros((8, 8, 3))
        assert abs(psnr(a, b) - 20.0) < 1e-9

    def test_matches_direct_mse_computation(self, rng):
        a = rng.uniform(0, 1, (12, 12, 3))
        b = rng.uniform(0, 1, (12, 12, 3))
        mse = np.mean((a - b) ** 2)
        assert psnr(a, b) == pytest.approx(10.0 * np.log10(1.0 / mse), rel=1e-12)

    def test_monotone_in_noise_amplitude(self, rng):
        img = rng.uniform(0.3, 0.7, (16, 16, 3))
        noise = rng.standard_normal(img.shape)
        values = [psnr(img + amp * noise, img) for amp in (0.01, 0.05, 0.2)]
        assert values[0] > values[1] > values[2]

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidParameterError):
            psnr(np.zeros((4, 4)), np.zeros((5, 4)))


class TestLabelIoU:
    def test_half_overlap_is_exactly_one_third(self):
        # two masks of equal area overlapping on half of each:
        # |I| = A, |U| = 3A
        pred = np.zeros((4, 4), dtype=int)
        gt = np.zeros((4, 4), dtype=int)
        pred[0:2] = 1
        gt[1:3] = 1
        assert iou_per_class(pred, gt, 2)[1] == 1.0 / 3.0

    def test_identical_maps_score_one(self, rng):
        labels = rng.integers(0, 4, (10, 10))
        assert mean_iou(labels, labels, 4) == 1.0

    def test_absent_class_is_nan_and_skipped(self):
        pred = np.ones((4, 4), dtype=int)
        gt = np.ones((4, 4), dtype=int)
        ious = iou_per_class(pred, gt, 3)
        assert np.isnan(ious[2]) and ious[1] == 1.0
        assert mean_iou(pred, gt, 3) == 1.0

    def test_skip_undetected_excludes_class_zero(self):
        pred = np.zeros((4, 4), dtype=int)
        gt = np.zeros((4, 4), dtype=int)
        pred[0, 0] = 1
        gt[0, 0] = 1
        gt[1, 1] = 0
        pred[1, 1] = 0
        assert mean_iou(pred, gt, 2, skip_undetected=True) == 1.0
        assert mean_iou(pred, gt, 2, skip_undetected=False) == 1.0

    def test_disjoint_masks_score_zero(self):
        pred = np.zeros((4, 4), dtype=int)
        gt = np.zeros((4, 4), dtype=int)
        pred[0] = 1
        gt[3] = 1
        assert iou_per_class(pred, gt, 2)[1] == 0.0


class TestMaskMIoU:
    def test_query_order_permutation_invariant(self, rng):
        pred = rng.random((5, 8, 8)) > 0.5
        gt = rng.random((5, 8, 8)) > 0.5
        perm = rng.permutation(5)
        assert mask_miou(pred, gt) == pytest.approx(
            mask_miou(pred[perm], gt[perm]), abs=1e-12)

    def test_both_empty_counts_as_perfect(self):
        pred = np.zeros((2, 4, 4), dtype=bool)
        gt = np.zeros((2, 4, 4), dtype=bool)
        pred[0, 0, 0] = gt[0, 0, 0] = True
        assert mask_miou(pred, gt) == 1.0

    def test_hand_computed_average(self):
        pred = np.zeros((2, 2, 2), dtype=bool)
        gt = np.zeros((2, 2, 2), dtype=bool)
        pred[0, 0] = True           # query 0: pred row0, gt row0 -> 1.0
        gt[0, 0] = True
        pred[1, :, 0] = True        # query 1: pred col0, gt row0 -> 1/3
        gt[1, 0, :] = True
        assert mask_miou(pred, gt) == pytest.approx((1.0 + 1.0 / 3.0) / 2.0)


class TestLocalizationAccuracy:
    def test_peak_inside_and_outside(self):
        maps = np.zeros((2, 4, 4))
        gt = np.zeros((2, 4, 4), dtype=bool)
        maps[0, 1, 1] = 1.0
        gt[0, 1, 1] = True          # hit
        maps[1, 0, 0] = 1.0
        gt[1, 3, 3] = True          # miss
        assert localization_accuracy(maps, gt) == 0.5

    def test_relevancy_equal_to_mask_counts_correct(self, rng):
        gt = rng.random((3, 6, 6)) > 0.6
        gt[:, 2, 2] = True  # keep every mask nonempty
        assert localization_accuracy(gt.astype(float), gt) == 1.0

    def test_empty_mask_skipped(self, caplog):
        maps = np.ones((2, 4, 4))
        gt = np.zeros((2, 4, 4), dtype=bool)
        gt[0, 0, 0] = True
        maps[0] = 0.0
        maps[0, 0, 0] = 1.0
        assert localization_accuracy(maps, gt) == 1.0  # only query 0 counted

    def test_all_empty_returns_nan(self):
        assert np.isnan(localization_accuracy(np.ones((1, 4, 4)),
                                              np.zeros((1, 4, 4), dtype=bool)))
