import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from flimsod.evalpp import (
    connected_components,
    estimate_seeds,
    evaluate_pairs,
    mae,
    seeded_delineation,
    size_filter,
    weighted_fmeasure,
)

binary_maps = hnp.arrays(
    bool, st.tuples(st.integers(1, 10), st.integers(1, 10))
)


def flood_fill_components(mask):
    """Plain stack-based 8-connected flood fill oracle."""
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=int)
    nxt = 0
    for si in range(h):
        for sj in range(w):
            if not mask[si, sj] or labels[si, sj]:
                continue
            nxt += 1
            stack = [(si, sj)]
            labels[si, sj] = nxt
            while stack:
                i, j = stack.pop()
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        ni, nj = i + di, j + dj
                        if 0 <= ni < h and 0 <= nj < w and mask[ni, nj] and not labels[ni, nj]:
                            labels[ni, nj] = nxt
                            stack.append((ni, nj))
    return labels, nxt


class TestConnectedComponents:
    def test_two_diagonal_pixels_connect(self):
        mask = np.zeros((3, 3), bool)
        mask[0, 0] = mask[1, 1] = True
        comp = connected_components(mask)
        assert comp.n_components == 1
        assert comp.areas.tolist() == [2]

    def test_separated_blobs(self):
        mask = np.zeros((5, 5), bool)
        mask[0, 0] = True
        mask[4, 4] = True
        comp = connected_components(mask)
        assert comp.n_components == 2

    def test_float_map_is_binarized_at_half(self):
        sal = np.zeros((3, 3, 1))
        sal[1, 1, 0] = 0.6
        sal[0, 0, 0] = 0.5  # not strictly above threshold
        comp = connected_components(sal)
        assert comp.n_components == 1

    @given(binary_maps)
    def test_matches_flood_fill_oracle(self, mask):
        comp = connected_components(mask)
        oracle_labels, oracle_n = flood_fill_components(mask)
        assert comp.n_components == oracle_n
        # same partition regardless of label numbering
        for l in range(1, oracle_n + 1):
            got = comp.labels[oracle_labels == l]
            assert len(set(got.tolist())) == 1 and got[0] != 0
        assert sorted(comp.areas.tolist()) == sorted(
            np.bincount(oracle_labels.ravel())[1:].tolist()
        )


class TestSizeFilter:
    def test_small_component_removed(self):
        sal = np.zeros((5, 5, 1))
        sal[0, 0, 0] = 0.9
        sal[2:5, 2:5, 0] = 0.8
        out = size_filter(sal, min_area=2)
        assert out[0, 0, 0] == 0.0
        assert (out[2:5, 2:5, 0] == 0.8).all()

    def test_max_area_cap(self):
        sal = np.zeros((5, 5, 1))
        sal[0, 0, 0] = 0.9
        sal[2:5, 2:5, 0] = 0.8
        out = size_filter(sal, max_area=2)
        assert out[0, 0, 0] == 0.9
        assert (out[2:5, 2:5, 0] == 0.0).all()

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            size_filter(np.zeros((3, 3, 1)), min_area=5, max_area=2)

    def test_survivors_keep_values(self, rng):
        sal = rng.uniform(size=(8, 8, 1))
        out = size_filter(sal, min_area=1)
        changed = out[:, :, 0] != sal[:, :, 0]
        assert (out[:, :, 0][changed] == 0.0).all()

    @given(binary_maps, st.integers(0, 20))
    @settings(max_examples=40)
    def test_idempotent(self, mask, min_area):
        sal = mask.astype(float)[:, :, None]
        once = size_filter(sal, min_area=min_area)
        twice = size_filter(once, min_area=min_area)
        np.testing.assert_array_equal(once, twice)


class TestEstimateSeeds:
    def test_square_yields_interior_and_far_outside(self):
        sal = np.zeros((20, 20, 1))
        sal[5:12, 5:12, 0] = 1.0
        obj, bg = estimate_seeds(sal, erosion_radius=1.0, dilation_radius=3.0)
        assert (8, 8) in obj  # deep interior survives erosion
        assert all(5 <= i < 12 and 5 <= j < 12 for i, j in obj)
        assert (0, 0) in bg  # corner is beyond the dilation band
        assert (5, 4) not in bg  # adjacent ring is inside the band

    def test_empty_map_yields_no_object_seeds(self):
        obj, bg = estimate_seeds(np.zeros((10, 10, 1)), dilation_radius=2.0)
        assert obj == set()
        assert (0, 0) in bg

    def test_full_map_yields_no_background_seeds(self):
        obj, bg = estimate_seeds(np.ones((10, 10, 1)))
        assert bg == set()
        assert (5, 5) in obj


class TestSeededDelineation:
    def test_seeds_keep_their_class_on_contrasting_image(self):
        img = np.zeros((5, 5, 1))
        img[:, 3:] = 1.0  # sharp vertical edge
        out = seeded_delineation(img, {(2, 4)}, {(2, 0)})
        assert out[2, 4, 0] == 1.0
        assert out[2, 0, 0] == 0.0
        # the cheap side of the edge adopts each seed's class
        assert (out[:, :3, 0] == 0.0).all()
        assert (out[:, 3:, 0] == 1.0).all()

    def test_constant_image_ties_resolve_to_background(self):
        out = seeded_delineation(np.zeros((4, 4, 1)), {(0, 0)}, {(3, 3)})
        np.testing.assert_array_equal(out, 0.0)

    def test_empty_seed_set_returns_binarized_input(self):
        img = np.zeros((4, 4, 1))
        img[1, 1, 0] = 0.9
        out = seeded_delineation(img, set(), {(0, 0)})
        np.testing.assert_array_equal(out[:, :, 0], img[:, :, 0] > 0.5)

    def test_multichannel_features(self, rng):
        img = np.zeros((6, 6, 3))
        img[:, :3] = [0, 0, 0]
        img[:, 3:] = [1, 1, 1]
        out = seeded_delineation(img, {(0, 5)}, {(0, 0)})
        assert (out[:, 3:, 0] == 1.0).all()
        assert (out[:, :3, 0] == 0.0).all()


def classic_f1(sal_bin, gt):
    tp = float(np.logical_and(sal_bin, gt).sum())
    fp = float(np.logical_and(sal_bin, ~gt).sum())
    fn = float(np.logical_and(~sal_bin, gt).sum())
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


class TestWeightedFMeasure:
    def test_perfect_prediction(self):
        gt = np.zeros((10, 10, 1))
        gt[3:7, 3:7, 0] = 1.0
        assert weighted_fmeasure(gt, gt) == pytest.approx(1.0, abs=1e-9)

    def test_complement_prediction(self):
        gt = np.zeros((10, 10, 1))
        gt[3:7, 3:7, 0] = 1.0
        assert weighted_fmeasure(1.0 - gt, gt) == pytest.approx(0.0, abs=1e-9)

    def test_empty_gt_conventions(self):
        gt = np.zeros((6, 6, 1))
        assert weighted_fmeasure(np.zeros((6, 6, 1)), gt) == 1.0
        assert weighted_fmeasure(np.ones((6, 6, 1)), gt) == 0.0

    def test_dims_must_match(self):
        with pytest.raises(ValueError, match="dims differ"):
            weighted_fmeasure(np.zeros((4, 4, 1)), np.zeros((5, 5, 1)))

    def test_far_false_positive_weighs_more(self):
        gt = np.zeros((20, 20, 1))
        gt[8:12, 8:12, 0] = 1.0
        near = gt.copy()
        near[8, 12, 0] = 1.0  # false positive adjacent to the object
        far = gt.copy()
        far[0, 0, 0] = 1.0  # false positive far from the object
        assert weighted_fmeasure(near, gt) > weighted_fmeasure(far, gt)

    @given(binary_maps, st.integers(0, 2**31 - 1))
    @settings(max_examples=40)
    def test_without_dependency_weights_is_classic_f1(self, gt, seed):
        rng = np.random.default_rng(seed)
        sal_bin = rng.uniform(size=gt.shape) > 0.5
        sal = sal_bin.astype(float)[:, :, None]
        gtm = gt[:, :, None].astype(float)
        got = weighted_fmeasure(sal, gtm, use_dependency_weights=False)
        if not gt.any():
            expected = 1.0 if not sal_bin.any() else 0.0
        else:
            expected = classic_f1(sal_bin, gt)
        assert got == pytest.approx(expected, abs=1e-9)


class TestMae:
    def test_identical_maps(self):
        sal = np.full((5, 5, 1), 0.3)
        assert mae(sal, sal) == 0.0

    def test_scaling_factor(self):
        a = np.zeros((4, 4, 1))
        b = np.full((4, 4, 1), 0.25)
        assert mae(a, b) == pytest.approx(25.0)
        assert mae(a, b, scaled=False) == pytest.approx(0.25)

    def test_dims_must_match(self):
        with pytest.raises(ValueError, match="dims differ"):
            mae(np.zeros((3, 3, 1)), np.zeros((4, 4, 1)))


class TestEvaluatePairs:
    def test_empty_errors(self):
        with pytest.raises(ValueError, match="no image pairs"):
            evaluate_pairs([])

    def test_aggregates_means(self):
        gt = np.zeros((8, 8, 1))
        gt[2:6, 2:6, 0] = 1.0
        report = evaluate_pairs([("a", gt, gt), ("b", 1.0 - gt, gt)])
        assert len(report.per_image) == 2
        assert report.fbw == pytest.approx(
            np.mean([f for _, f, _ in report.per_image])
        )
        assert report.mae == pytest.approx(
            np.mean([m for _, _, m in report.per_image])
        )
        assert report.per_image[0][1] == pytest.approx(1.0, abs=1e-9)
        assert report.per_image[0][2] == 0.0
        obj = report.to_json()
        assert set(obj) == {"fbw", "mae", "per_image"}
        assert obj["per_image"][0]["name"] == "a"
