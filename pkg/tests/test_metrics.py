import numpy as np
import pytest

from flowseg.metrics import (EvalReport, contour_accuracy, default_tolerance,
                             evaluate_sequence, mask_boundary, region_jaccard)


def square_mask(h, w, y0, x0, size):
    m = np.zeros((h, w), dtype=bool)
    m[y0:y0 + size, x0:x0 + size] = True
    return m


class TestRegionJaccard:
    def test_identical_masks(self):
        m = square_mask(20, 20, 4, 4, 8)
        assert region_jaccard(m, m) == 1.0

    def test_disjoint_masks(self):
        a = square_mask(20, 20, 0, 0, 5)
        b = square_mask(20, 20, 10, 10, 5)
        assert region_jaccard(a, b) == 0.0

    def test_half_overlap_equal_areas(self):
        # pred covers half of gt with equal areas: |I| = A/2, |U| = 3A/2
        a = square_mask(20, 40, 0, 0, 10)        # 10x10 at x 0..9
        b = np.zeros((20, 40), dtype=bool)
        b[0:10, 5:15] = True                     # shifted by half its width
        assert region_jaccard(a, b) == pytest.approx(1.0 / 3.0)

    def test_both_empty(self):
        e = np.zeros((5, 5), dtype=bool)
        assert region_jaccard(e, e) == 1.0

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        a = rng.random((15, 15)) > 0.5
        b = rng.random((15, 15)) > 0.5
        assert region_jaccard(a, b) == region_jaccard(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            region_jaccard(np.zeros((2, 2), dtype=bool), np.zeros((3, 3), dtype=bool))


class TestMaskBoundary:
    def test_square_boundary_is_perimeter(self):
        m = square_mask(12, 12, 3, 3, 5)
        b = mask_boundary(m)
        assert b.sum() == 4 * 5 - 4
        inner = square_mask(12, 12, 4, 4, 3)
        assert not b[inner].any()

    def test_frame_border_counts_as_boundary(self):
        m = np.ones((6, 6), dtype=bool)
        b = mask_boundary(m)
        assert b.sum() == 20  # the outer ring
        assert not b[2:4, 2:4].any()


class TestContourAccuracy:
    def test_identical_masks(self):
        m = square_mask(30, 30, 8, 8, 10)
        assert contour_accuracy(m, m) == 1.0

    def test_one_pixel_shift_within_tolerance(self):
        a = square_mask(30, 30, 8, 8, 10)
        b = square_mask(30, 30, 8, 9, 10)
        assert contour_accuracy(a, b, tolerance_radius=1.0) == 1.0

    def test_large_shift_fails_tight_tolerance(self):
        a = square_mask(40, 40, 5, 5, 8)
        b = square_mask(40, 40, 5, 25, 8)
        assert contour_accuracy(a, b, tolerance_radius=1.0) < 0.2

    def test_empty_pred_nonempty_gt(self):
        gt = square_mask(20, 20, 5, 5, 6)
        assert contour_accuracy(np.zeros((20, 20), dtype=bool), gt) == 0.0

    def test_both_empty(self):
        e = np.zeros((9, 9), dtype=bool)
        assert contour_accuracy(e, e) == 1.0

    def test_default_tolerance_scaling(self):
        assert default_tolerance((64, 64)) == 1   # ceil(0.008 * 90.5)
        assert default_tolerance((480, 854)) == 8  # ceil(0.008 * 979.7)


class TestEvaluateSequence:
    def masks_with_scores(self, scores):
        """Frame pairs engineered to hit an exact per-frame Jaccard score."""
        preds, gts = [], []
        for s in scores:
            gt = np.zeros((10, 100), dtype=bool)
            gt[:, :50] = True
            pred = np.zeros((10, 100), dtype=bool)
            # |I|/|U| = s when pred covers k of gt's 50 columns: k/50... use
            # pred inside gt: J = k/50
            k = int(round(s * 50))
            pred[:, :k] = True
            preds.append(pred)
            gts.append(gt)
        return preds, gts

    def test_perfect_sequence(self):
        preds, gts = self.masks_with_scores([1.0, 1.0, 1.0, 1.0])
        rep = evaluate_sequence(preds, gts)
        assert rep.j_mean == 1.0
        assert rep.j_recall == 1.0
        assert rep.j_decay == 0.0

    def test_mean_recall_decay_arithmetic(self):
        rep = EvalReport("x", np.array([0.8, 0.8, 0.4, 0.4]),
                         np.array([0.8, 0.8, 0.4, 0.4]))
        assert rep.j_mean == pytest.approx(0.6)
        assert rep.j_recall == pytest.approx(0.5)
        assert rep.j_decay == pytest.approx(0.4)

    def test_recall_is_strict(self):
        rep = EvalReport("x", np.full(8, 0.5), np.full(8, 0.5))
        assert rep.j_recall == 0.0

    def test_constant_decay_zero(self):
        rep = EvalReport("x", np.full(9, 0.77), np.full(9, 0.77))
        assert rep.j_decay == 0.0
        assert rep.f_decay == 0.0

    def test_length_mismatch(self):
        preds, gts = self.masks_with_scores([1.0, 1.0])
        with pytest.raises(ValueError):
            evaluate_sequence(preds, gts[:1])

    def test_csv_round_trip(self, tmp_path):
        preds, gts = self.masks_with_scores([1.0, 0.8, 0.6, 0.4])
        rep = evaluate_sequence(preds, gts, sequence="demo")
        path = tmp_path / "report.csv"
        rep.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "frame,jaccard,contour"
        assert len(lines) == 1 + 4 + 3  # header, frames, mean/recall/decay
        assert lines[5].startswith("mean,")
        assert lines[6].startswith("recall,")
        assert lines[7].startswith("decay,")
        mean = float(lines[5].split(",")[1])
        assert mean == pytest.approx(rep.j_mean, abs=1e-6)

    def test_table_format_mentions_scores(self):
        preds, gts = self.masks_with_scores([1.0, 1.0])
        rep = evaluate_sequence(preds, gts, sequence="seq1")
        table = rep.format_table()
        assert "seq1" in table and "mean" in table and "decay" in table
