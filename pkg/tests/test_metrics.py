import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from diffwalker import (
    EvalReport,
    SeedSet,
    ValidationError,
    arand,
    error_map,
    evaluate,
    seeded_watershed,
    voi,
)


def half_split(height=8, width=8):
    gt = np.zeros((height, width), dtype=np.int64)
    gt[:, width // 2 :] = 1
    return gt


class TestVoi:
    def test_identical_partitions(self):
        gt = half_split()
        assert voi(gt, gt, tolerance=0) == (0.0, 0.0)

    def test_single_segment_against_half_split(self):
        gt = half_split()
        pred = np.zeros_like(gt)
        split, merge = voi(pred, gt, tolerance=0)
        assert split == pytest.approx(0.0, abs=1e-12)
        assert merge == pytest.approx(np.log(2.0), abs=1e-10)

    def test_id_permutation_invariance(self):
        gt = half_split()
        pred = half_split()
        permuted = np.where(pred == 0, 7, 3)
        assert voi(permuted, gt, tolerance=0) == voi(pred, gt, tolerance=0)

    def test_symmetry_swaps_split_and_merge(self):
        rng = np.random.default_rng(0)
        a = rng.integers(0, 3, size=(12, 12))
        b = rng.integers(0, 4, size=(12, 12))
        s1, m1 = voi(a, b, tolerance=0)
        s2, m2 = voi(b, a, tolerance=0)
        assert s1 == pytest.approx(m2) and m1 == pytest.approx(s2)

    def test_empty_evaluation_region_rejected(self):
        gt = np.array([[0, 1], [1, 0]])
        with pytest.raises(ValidationError):
            voi(gt, gt, tolerance=2)


class TestArand:
    def test_identical_partitions(self):
        gt = half_split()
        assert arand(gt, gt, tolerance=0) == pytest.approx(0.0, abs=1e-12)

    def test_random_shuffle_scores_near_one(self):
        rng = np.random.default_rng(123)
        gt = np.repeat(np.arange(8), 512).reshape(64, 64)
        pred = rng.permuted(gt.ravel()).reshape(gt.shape)
        assert arand(pred, gt, tolerance=0) == pytest.approx(1.0, abs=0.05)

    def test_id_permutation_invariance(self):
        gt = half_split()
        permuted = np.where(gt == 0, 11, 4)
        assert arand(permuted, gt, tolerance=0) == pytest.approx(0.0, abs=1e-12)

    def test_matches_sklearn_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            a = rng.integers(0, 4, size=(10, 10))
            b = rng.integers(0, 3, size=(10, 10))
            ours = arand(a, b, tolerance=0)
            reference = 1.0 - adjusted_rand_score(b.ravel(), a.ravel())
            assert ours == pytest.approx(reference, abs=1e-12)

    def test_tolerance_erodes_boundary_mistakes(self):
        gt = half_split(8, 8)
        pred = np.zeros_like(gt)
        pred[:, 3:] = 1  # boundary off by one pixel
        assert arand(pred, gt, tolerance=0) > 0.0
        assert arand(pred, gt, tolerance=2) == pytest.approx(0.0, abs=1e-12)


class TestToleranceBand:
    @staticmethod
    def naive_kept_mask(gt, tol):
        h, w = gt.shape
        kept = np.ones_like(gt, dtype=bool)
        for r in range(h):
            for c in range(w):
                for dr in range(-tol, tol + 1):
                    for dc in range(-tol, tol + 1):
                        rr, cc = r + dr, c + dc
                        if 0 <= rr < h and 0 <= cc < w and gt[rr, cc] != gt[r, c]:
                            kept[r, c] = False
        return kept

    def test_monotone_disagreements_and_exclusion_count(self):
        gt = half_split(10, 10)
        pred = np.zeros_like(gt)
        pred[:, 4:] = 1
        disagreements = []
        for tol in (0, 1, 2, 3):
            kept = self.naive_kept_mask(gt, tol)
            report = evaluate(pred, gt, tolerance=tol)
            assert report.excluded_pixels == int((~kept).sum())
            disagreements.append(int((pred[kept] != gt[kept]).sum()))
        assert all(
            later <= earlier for earlier, later in zip(disagreements, disagreements[1:])
        )
        assert disagreements[0] > 0 and disagreements[-1] == 0


class TestErrorMap:
    def test_identical_gives_all_false(self):
        gt = half_split()
        assert not error_map(gt, gt).any()

    def test_single_flipped_pixel(self):
        gt = half_split()
        pred = gt.copy()
        pred[0, 0] = 1
        errs = error_map(pred, gt)
        assert errs.sum() == 1 and errs[0, 0]

    def test_swapped_equal_segments_resolve(self):
        gt = half_split()
        swapped = 1 - gt
        assert not error_map(swapped, gt).any()


class TestEvalReport:
    def test_json_round_trip(self):
        gt = half_split()
        report = evaluate(gt, gt, tolerance=1)
        clone = EvalReport.from_json(report.to_json())
        assert clone == report
        payload = json.loads(report.to_json())
        assert set(payload) == {
            "voi_split", "voi_merge", "voi_total", "arand", "excluded_pixels",
        }

    def test_total_is_sum_and_floored(self):
        rng = np.random.default_rng(3)
        pred = rng.integers(0, 3, size=(9, 9))
        gt = rng.integers(0, 3, size=(9, 9))
        report = evaluate(pred, gt, tolerance=0)
        assert report.voi_total == pytest.approx(report.voi_split + report.voi_merge)
        for value in (report.voi_split, report.voi_merge, report.voi_total, report.arand):
            assert value >= -1e-12


class TestSeededWatershed:
    def test_barrier_split_goes_to_earlier_popped_side(self):
        boundary = np.array([[0.0, 0.0, 1.0, 0.0, 0.0]])
        seeds = SeedSet.from_pairs([(0, 0), (4, 1)])
        labels = seeded_watershed(boundary, seeds)
        assert np.array_equal(labels, [[0, 0, 0, 1, 1]])

    def test_zero_map_is_deterministic_flood(self):
        boundary = np.zeros((5, 5))
        seeds = SeedSet.from_pairs([(0, 0), (24, 1)])
        a = seeded_watershed(boundary, seeds)
        b = seeded_watershed(boundary, seeds)
        assert np.array_equal(a, b)
        assert a[0, 0] == 0 and a[4, 4] == 1
        assert set(np.unique(a)) == {0, 1}

    def test_perfect_boundary_map_recovers_ground_truth(self):
        gt = half_split(8, 8)
        boundary = np.zeros_like(gt, dtype=float)
        boundary[:, 3:5] = 1.0  # ridge straddling the true divide
        boundary[:, 4] = 0.5
        seeds = SeedSet.from_pairs([(0, 0), (8 * 8 - 1, 1)])
        labels = seeded_watershed(boundary, seeds)
        inner = np.s_[:, [0, 1, 2, 5, 6, 7]]
        assert np.array_equal(labels[inner], gt[inner])

    def test_every_pixel_reached_on_connected_grid(self):
        # The grid is fully connected, so the unlabeled (-1) report path is
        # purely defensive; here everything must be claimed.
        boundary = np.zeros((1, 3))
        seeds = SeedSet.from_pairs([(0, 0)], n_labels=1)
        labels = seeded_watershed(boundary, seeds)
        assert (labels >= 0).all()

    def test_nonfinite_boundary_rejected(self):
        seeds = SeedSet.from_pairs([(0, 0)], n_labels=1)
        with pytest.raises(ValidationError):
            seeded_watershed(np.array([[0.0, np.inf]]), seeds)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_voi_arand_invariant_under_random_relabeling(seed):
    rng = np.random.default_rng(seed)
    gt = rng.integers(0, 4, size=(8, 8))
    pred = rng.integers(0, 3, size=(8, 8))
    perm = rng.permutation(16)
    relabeled = perm[pred]
    assert voi(relabeled, gt, tolerance=0) == pytest.approx(voi(pred, gt, tolerance=0))
    assert arand(relabeled, gt, tolerance=0) == pytest.approx(
        arand(pred, gt, tolerance=0)
    )
