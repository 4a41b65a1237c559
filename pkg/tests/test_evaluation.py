import numpy as np
import pytest

from wedgealign.errors import KeyMismatch
from wedgealign.evaluation import (
    Annotation,
    annotation_from_dict,
    annotation_from_skeleton,
    annotation_to_dict,
    evaluate_corpus,
    load_annotation,
    match_keypoints,
    save_annotation,
)
from wedgealign.geometry import Point


def points(*xys):
    return [Point(x, y) for x, y in xys]


def sparse_grid(n=8, spacing=80.0):
    return [Point(40 + spacing * (i % 4), 40 + spacing * (i // 4)) for i in range(n)]


class TestMatchKeypoints:
    def test_perfect_predictions(self):
        gt = sparse_grid()
        for t in (1.0, 20.0, 40.0):
            c = match_keypoints(gt, gt, t)
            assert (c.tp, c.fp, c.fn) == (len(gt), 0, 0)

    def test_empty_predictions(self):
        gt = sparse_grid()
        c = match_keypoints([], gt, 20.0)
        assert (c.tp, c.fp, c.fn) == (0, 0, len(gt))

    def test_one_to_one_rule(self):
        gt = points((100, 100))
        pred = points((104, 100), (97, 100))
        c = match_keypoints(pred, gt, 20.0)
        assert (c.tp, c.fp, c.fn) == (1, 1, 0)

    def test_closest_pair_wins(self):
        gt = points((0, 0), (10, 0))
        pred = points((1, 0))
        c = match_keypoints(pred, gt, 20.0)
        assert (c.tp, c.fp, c.fn) == (1, 0, 1)

    def test_swap_symmetry(self):
        rng = np.random.default_rng(0)
        pred = points(*rng.uniform(0, 512, size=(7, 2)))
        gt = points(*rng.uniform(0, 512, size=(9, 2)))
        a = match_keypoints(pred, gt, 30.0)
        b = match_keypoints(gt, pred, 30.0)
        assert a.tp == b.tp
        assert (a.fp, a.fn) == (b.fn, b.fp)

    def test_greedy_equals_optimal_when_sparse(self):
        # every point has at most one candidate within the threshold
        gt = sparse_grid()
        rng = np.random.default_rng(1)
        pred = [Point(p.x + rng.uniform(-5, 5), p.y + rng.uniform(-5, 5)) for p in gt]
        c = match_keypoints(pred, gt, 15.0)
        assert (c.tp, c.fp, c.fn) == (len(gt), 0, 0)

    def test_metrics_zero_when_empty(self):
        c = match_keypoints([], [], 10.0)
        assert (c.precision, c.recall, c.f1) == (0.0, 0.0, 0.0)


class TestEvaluateCorpus:
    def _annotation(self, pts, sign="s"):
        return Annotation(sign_name=sign, keypoints=tuple(pts), image_size=(512, 512))

    def test_gt_vs_gt_is_one(self):
        gts = {
            f"img{i}": self._annotation(sparse_grid(), sign=f"sign{i % 2}")
            for i in range(4)
        }
        report = evaluate_corpus(gts, gts, (20.0, 30.0, 40.0))
        for t in report.thresholds:
            assert report.overall[t].f1 == 1.0
        for rows in report.per_sign.values():
            assert rows[20.0].f1 == 1.0

    def test_shift_construction(self):
        # spacing > 75px so a 35px shift matches only at threshold 40
        gt_pts = sparse_grid(spacing=80.0)
        shifted = [Point(p.x + 35.0, p.y) for p in gt_pts]
        gts = {"a": self._annotation(gt_pts)}
        preds = {"a": self._annotation(shifted)}
        report = evaluate_corpus(preds, gts, (20.0, 30.0, 40.0))
        assert report.overall[20.0].f1 == 0.0
        assert report.overall[30.0].f1 == 0.0
        assert report.overall[40.0].f1 == 1.0

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(2)
        gts, preds = {}, {}
        for i in range(5):
            gt_pts = sparse_grid()
            noisy = [
                Point(p.x + rng.normal(0, 15), p.y + rng.normal(0, 15)) for p in gt_pts
            ]
            gts[f"i{i}"] = self._annotation(gt_pts)
            preds[f"i{i}"] = self._annotation(noisy)
        thresholds = (5.0, 10.0, 20.0, 30.0, 40.0, 80.0)
        report = evaluate_corpus(preds, gts, thresholds)
        f1s = [report.overall[t].f1 for t in thresholds]
        assert all(a <= b + 1e-12 for a, b in zip(f1s, f1s[1:]))

    def test_key_mismatch(self):
        a = {"x": self._annotation(sparse_grid())}
        b = {"y": self._annotation(sparse_grid())}
        with pytest.raises(KeyMismatch):
            evaluate_corpus(a, b)

    def test_micro_averaging_pools_counts(self):
        good = sparse_grid()
        bad = [Point(p.x + 300, p.y) for p in good[:4]] + list(good[4:])
        gts = {"g": self._annotation(good), "b": self._annotation(good)}
        preds = {"g": self._annotation(good), "b": self._annotation(bad)}
        report = evaluate_corpus(preds, gts, (20.0,))
        c = report.overall[20.0]
        assert c.tp == 12 and c.fp == 4 and c.fn == 4
        assert c.f1 == pytest.approx(2 * 0.75 * 0.75 / 1.5)

    def test_report_serialization(self):
        gts = {"x": self._annotation(sparse_grid())}
        report = evaluate_corpus(gts, gts, (20.0,))
        d = report.to_jsonable()
        assert d["overall"]["20.0"]["f1"] == 1.0
        table = report.to_table()
        assert "ALL" in table and "F1@20" in table


class TestAnnotationIO:
    def test_roundtrip(self, tmp_path, proto_skeleton):
        ann = annotation_from_skeleton(proto_skeleton, (512, 512))
        path = tmp_path / "a.json"
        save_annotation(ann, path)
        loaded = load_annotation(path)
        assert loaded == ann

    def test_count_divisible_by_four(self):
        with pytest.raises(ValueError):
            Annotation(sign_name="x", keypoints=tuple(points((0, 0))), image_size=(8, 8))

    def test_dict_form(self):
        ann = Annotation(
            sign_name="d", keypoints=tuple(sparse_grid()), image_size=(512, 512)
        )
        d = annotation_to_dict(ann)
        assert d["sign"] == "d"
        assert annotation_from_dict(d) == ann
