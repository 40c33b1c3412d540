import numpy as np
import pytest

from gslda_cascade.cascade import CascadeModel, NodeClassifier
from gslda_cascade.detect import (
    DetectionWindow,
    GroundTruthBox,
    MatchResult,
    ScanProfile,
    avg_features_per_window,
    match_detections,
    merge_detections,
    overlap_ratio,
    roc_curve,
    scan_image,
)
from gslda_cascade.features import build_integral, enumerate_haar
from gslda_cascade.stumps import DecisionStump


def oracle_windows(h, w, base, factor, step):
    """Direct enumeration of the scan grid."""
    out = []
    s = 0
    while True:
        scale = factor**s
        side = int(np.floor(base * scale + 0.5))
        if side > min(h, w):
            break
        shift = max(1, int(np.floor(step * scale + 0.5)))
        for y in range(0, h - side + 1, shift):
            for x in range(0, w - side + 1, shift):
                out.append((x, y, side, scale))
        s += 1
    return out


def empty_model(base=8, feats=None):
    feats = feats if feats is not None else enumerate_haar(base, stride=2, min_size=2)
    return CascadeModel(nodes=[], stage_rates=[], cumulative=[], feature_pool=feats,
                        f_target=0.5, base_window=base)


def hand_model(base=8, thresholds=(0.0,), node_thresholds=None, feats=None):
    """Single-feature nodes with controllable node thresholds."""
    feats = feats if feats is not None else enumerate_haar(base, stride=2, min_size=2)
    nodes = []
    node_thresholds = node_thresholds or [0.5] * len(thresholds)
    for t, nt in zip(thresholds, node_thresholds):
        nodes.append(NodeClassifier([DecisionStump(5, t, 1)], [1.0], nt, "adaboost"))
    return CascadeModel(nodes=nodes, stage_rates=[], cumulative=[], feature_pool=feats,
                        f_target=0.5, base_window=base)


class TestScanImage:
    def test_exact_base_window_single_scan(self):
        model = empty_model(base=8)
        rng = np.random.default_rng(0)
        wins = scan_image(model, rng.integers(0, 256, size=(8, 8)))
        assert len(wins) == 1
        assert (wins[0].x, wins[0].y, wins[0].side) == (0, 0, 8)

    def test_window_count_matches_enumeration_oracle(self):
        model = empty_model(base=24, feats=[])
        rng = np.random.default_rng(1)
        image = rng.integers(0, 256, size=(100, 100))
        profile = ScanProfile()
        wins = scan_image(model, image, scale_factor=1.2, step=1.0, profile=profile)
        oracle = oracle_windows(100, 100, 24, 1.2, 1.0)
        assert len(wins) == len(oracle)
        assert profile.windows_scanned == len(oracle)
        got = {(w.x, w.y, w.side) for w in wins}
        assert got == {(x, y, side) for x, y, side, _ in oracle}

    def test_small_image_empty_result(self):
        model = empty_model(base=24, feats=[])
        assert scan_image(model, np.zeros((10, 10), dtype=int)) == []

    def test_empty_model_accepts_everything(self):
        model = empty_model(base=8, feats=[])
        rng = np.random.default_rng(2)
        wins = scan_image(model, rng.integers(0, 256, size=(20, 20)))
        assert len(wins) == len(oracle_windows(20, 20, 8, 1.2, 1.0))
        assert all(w.stages_passed == 0 for w in wins)

    def test_vectorized_matches_scalar_evaluation(self):
        rng = np.random.default_rng(3)
        image = rng.integers(0, 256, size=(30, 30))
        model = hand_model(base=8, thresholds=(2.0, -3.0), node_thresholds=[0.5, 0.5])
        accepted = {(w.x, w.y, w.side) for w in scan_image(model, image)}
        ii = build_integral(image)
        for x, y, side, scale in oracle_windows(30, 30, 8, 1.2, 1.0):
            ok, _, _, _ = model.decide_window(ii, x, y, scale)
            assert ok == ((x, y, side) in accepted)

    def test_early_exit_matches_full_evaluation(self):
        rng = np.random.default_rng(4)
        image = rng.integers(0, 256, size=(40, 40))
        model = hand_model(base=8, thresholds=(1.0, -1.0, 4.0), node_thresholds=[0.5] * 3)
        fast = scan_image(model, image, early_exit=True)
        slow = scan_image(model, image, early_exit=False)
        assert [(w.x, w.y, w.side) for w in fast] == [(w.x, w.y, w.side) for w in slow]
        assert [w.stages_passed for w in fast] == [w.stages_passed for w in slow]

    def test_profile_counts_stump_evaluations(self):
        rng = np.random.default_rng(5)
        image = rng.integers(0, 256, size=(8, 8))
        feats = enumerate_haar(8, stride=2, min_size=2)
        stumps_ = [DecisionStump(i, 0.0, 1) for i in (1, 4, 9)]
        reject = NodeClassifier(stumps_, [1.0, 1.0, 1.0], -1e18, "adaboost")
        model = CascadeModel(nodes=[reject], stage_rates=[], cumulative=[],
                             feature_pool=feats, f_target=0.5, base_window=8)
        profile = ScanProfile()
        wins = scan_image(model, image, profile=profile)
        assert wins == []
        assert profile.windows_scanned == 1
        assert profile.feature_evals == 3
        assert avg_features_per_window(profile) == 3.0

    def test_profile_merge_accounting(self):
        a = ScanProfile(10, 25)
        b = ScanProfile(5, 7)
        a.merge(b)
        assert (a.windows_scanned, a.feature_evals) == (15, 32)
        with pytest.raises(ValueError):
            avg_features_per_window(ScanProfile())


class TestOverlapRatio:
    def test_identical_is_one(self):
        assert overlap_ratio(2, 3, 10, 10, 2, 3, 10, 10) == 1.0

    def test_disjoint_is_zero(self):
        assert overlap_ratio(0, 0, 5, 5, 10, 10, 5, 5) == 0.0

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            a = rng.integers(0, 20, size=2).tolist() + rng.integers(1, 15, size=2).tolist()
            b = rng.integers(0, 20, size=2).tolist() + rng.integers(1, 15, size=2).tolist()
            r1 = overlap_ratio(*a, *b)
            r2 = overlap_ratio(*b, *a)
            assert r1 == r2
            assert 0.0 <= r1 <= 1.0


class TestMergeDetections:
    def test_single_window_kept_with_min_neighbors_one(self):
        win = DetectionWindow(3, 4, 10, 1.5, 2)
        assert merge_detections([win], min_neighbors=1) == [win]

    def test_two_disjoint_windows(self):
        a = DetectionWindow(0, 0, 10, 1.0, 1)
        b = DetectionWindow(30, 30, 10, 2.0, 1)
        assert len(merge_detections([a, b], min_neighbors=1)) == 2

    def test_five_identical_collapse_to_same(self):
        wins = [DetectionWindow(5, 6, 12, float(i), 1) for i in range(5)]
        merged = merge_detections(wins, min_neighbors=2)
        assert len(merged) == 1
        out = merged[0]
        assert (out.x, out.y, out.side) == (5, 6, 12)
        assert out.score == 4.0

    def test_min_neighbors_filters_singletons(self):
        a = DetectionWindow(0, 0, 10, 1.0, 1)
        b = DetectionWindow(1, 1, 10, 2.0, 1)
        c = DetectionWindow(40, 40, 10, 3.0, 1)
        merged = merge_detections([a, b, c], min_neighbors=2)
        assert len(merged) == 1
        assert merged[0].x in (0, 1)  # averaged pair, singleton dropped

    def test_transitive_chaining(self):
        # a~b and b~c overlap, a~c barely do not: one chained group.
        a = DetectionWindow(0, 0, 12, 1.0, 1)
        b = DetectionWindow(3, 0, 12, 1.0, 1)
        c = DetectionWindow(6, 0, 12, 1.0, 1)
        assert overlap_ratio(0, 0, 12, 12, 6, 0, 12, 12) < 0.5
        merged = merge_detections([a, b, c], min_neighbors=3)
        assert len(merged) == 1


class TestMatchDetections:
    def test_identical_detection_is_tp(self):
        truth = GroundTruthBox("im0", 10, 10, 16, 16)
        det = [("im0", DetectionWindow(10, 10, 16, 1.0, 1))]
        res = match_detections(det, [truth])
        assert (res.true_positives, res.false_positives, res.missed) == (1, 0, 0)

    def test_double_detection_counts_one_fp(self):
        truth = GroundTruthBox("im0", 10, 10, 16, 16)
        det = [
            ("im0", DetectionWindow(10, 10, 16, 2.0, 1)),
            ("im0", DetectionWindow(11, 10, 16, 1.0, 1)),
        ]
        res = match_detections(det, [truth])
        assert (res.true_positives, res.false_positives, res.missed) == (1, 1, 0)

    def test_disjoint_detection_is_fp(self):
        truth = GroundTruthBox("im0", 0, 0, 10, 10)
        det = [("im0", DetectionWindow(50, 50, 10, 1.0, 1))]
        res = match_detections(det, [truth])
        assert (res.true_positives, res.false_positives, res.missed) == (0, 1, 1)

    def test_image_id_separation(self):
        truth = GroundTruthBox("im1", 10, 10, 16, 16)
        det = [("im0", DetectionWindow(10, 10, 16, 1.0, 1))]
        res = match_detections(det, [truth])
        assert (res.true_positives, res.false_positives, res.missed) == (0, 1, 1)

    def test_conservation_identities(self):
        rng = np.random.default_rng(7)
        truths = [
            GroundTruthBox(f"im{i % 3}", int(rng.integers(0, 40)), int(rng.integers(0, 40)), 12, 12)
            for i in range(8)
        ]
        detections = [
            (f"im{int(rng.integers(0, 3))}",
             DetectionWindow(int(rng.integers(0, 48)), int(rng.integers(0, 48)), 12,
                             float(rng.random()), 1))
            for _ in range(15)
        ]
        res = match_detections(detections, truths)
        assert res.true_positives + res.missed == len(truths)
        assert res.true_positives + res.false_positives == len(detections)


class TestRocCurve:
    def _scene(self, rng):
        return [("scene0", rng.integers(0, 256, size=(40, 40)))]

    def test_depth_mode_point_count_and_monotone_fp(self):
        rng = np.random.default_rng(8)
        images = self._scene(rng)
        truths = [GroundTruthBox("scene0", 0, 0, 8, 8)]
        model = hand_model(base=8, thresholds=(0.0, 1.0, 2.0), node_thresholds=[0.2, 0.2, 0.2])
        points = roc_curve(model, images, truths, mode="depth", min_neighbors=1)
        assert len(points) == 3
        by_depth = sorted(points, key=lambda p: p.operating_point)
        fps = [p.false_positives for p in sorted(points, key=lambda p: int(p.operating_point.split("=")[1]))]
        assert fps == sorted(fps, reverse=True)
        assert all(p.false_positives >= 0 for p in by_depth)

    def test_threshold_mode_includes_infinite_cutoff(self):
        rng = np.random.default_rng(9)
        images = self._scene(rng)
        truths = [GroundTruthBox("scene0", 0, 0, 8, 8)]
        model = hand_model(base=8, thresholds=(0.0,), node_thresholds=[0.5])
        points = roc_curve(model, images, truths, mode="threshold", min_neighbors=1)
        inf_points = [p for p in points if p.operating_point == "threshold=inf"]
        assert len(inf_points) == 1
        assert inf_points[0].false_positives == 0
        assert inf_points[0].detection_rate == 0.0

    def test_points_sorted_by_false_positives(self):
        rng = np.random.default_rng(10)
        images = self._scene(rng)
        truths = [GroundTruthBox("scene0", 5, 5, 8, 8)]
        model = hand_model(base=8, thresholds=(0.0, 0.5), node_thresholds=[0.3, 0.3])
        points = roc_curve(model, images, truths, mode="depth", min_neighbors=1)
        fps = [p.false_positives for p in points]
        assert fps == sorted(fps)

    def test_empty_test_set_rejected(self):
        model = hand_model(base=8)
        with pytest.raises(ValueError, match="empty test set"):
            roc_curve(model, [], [GroundTruthBox("x", 0, 0, 4, 4)])
        with pytest.raises(ValueError, match="empty test set"):
            roc_curve(model, [("a", np.zeros((10, 10)))], [])
