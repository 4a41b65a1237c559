"""Keypoint-localization metrics: precision/recall/F1 at pixel thresholds."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import KeyMismatch
from .geometry import Point, Skeleton

DEFAULT_THRESHOLDS = (20.0, 30.0, 40.0)


@dataclass(frozen=True)
class Annotation:
    """Flat keypoint list for one sign image, four keypoints per stroke."""

    sign_name: str
    keypoints: tuple[Point, ...]
    image_size: tuple[int, int]

    def __post_init__(self):
        if len(self.keypoints) % 4 != 0:
            raise ValueError("keypoint count must be divisible by 4")
        object.__setattr__(self, "keypoints", tuple(self.keypoints))


@dataclass(frozen=True)
class Counts:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) else 0.0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class MetricReport:
    """Micro-averaged metrics per threshold, plus a per-sign breakdown."""

    thresholds: tuple[float, ...]
    overall: dict[float, Counts]
    per_sign: dict[str, dict[float, Counts]]

    def to_jsonable(self) -> dict:
        def row(c: Counts) -> dict:
            return {
                "tp": c.tp,
                "fp": c.fp,
                "fn": c.fn,
                "precision": c.precision,
                "recall": c.recall,
                "f1": c.f1,
            }

        return {
            "thresholds": list(self.thresholds),
            "overall": {str(t): row(self.overall[t]) for t in self.thresholds},
            "per_sign": {
                sign: {str(t): row(cs[t]) for t in self.thresholds}
                for sign, cs in sorted(self.per_sign.items())
            },
        }

    def to_table(self) -> str:
        header = f"{'sign':<14}" + "".join(
            f"  F1@{t:g}  P@{t:g}  R@{t:g}" for t in self.thresholds
        )
        lines = [header, "-" * len(header)]

        def cells(cs: dict[float, Counts]) -> str:
            return "".join(
                f"  {cs[t].f1:5.3f}  {cs[t].precision:4.2f}  {cs[t].recall:4.2f}"
                for t in self.thresholds
            )

        for sign in sorted(self.per_sign):
            lines.append(f"{sign:<14}" + cells(self.per_sign[sign]))
        lines.append(f"{'ALL':<14}" + cells(self.overall))
        return "\n".join(lines)


def match_keypoints(
    pred: Sequence[Point], gt: Sequence[Point], threshold: float
) -> Counts:
    """Greedy one-to-one matching by ascending distance.

    Candidate (pred, gt) pairs within the threshold are sorted by distance
    (index order breaks exact ties) and accepted when both endpoints are
    still unmatched. One-to-one matching keeps precision meaningful: a
    single ground-truth point cannot absolve several predictions.
    """
    candidates = []
    for pi, p in enumerate(pred):
        for gi, q in enumerate(gt):
            d = float(np.hypot(p.x - q.x, p.y - q.y))
            if d <= threshold:
                candidates.append((d, pi, gi))
    candidates.sort()
    pred_used = [False] * len(pred)
    gt_used = [False] * len(gt)
    tp = 0
    for _, pi, gi in candidates:
        if not pred_used[pi] and not gt_used[gi]:
            pred_used[pi] = True
            gt_used[gi] = True
            tp += 1
    return Counts(tp=tp, fp=len(pred) - tp, fn=len(gt) - tp)


def evaluate_corpus(
    pred_annotations: Mapping[str, Annotation],
    gt_annotations: Mapping[str, Annotation],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> MetricReport:
    """Micro-averaged metrics over a corpus keyed by image identifier.

    Counts are summed over all images before computing precision/recall/F1;
    per-sign rows micro-average within each ground-truth sign name.

    Raises:
        KeyMismatch: prediction and ground-truth keys differ.
    """
    pred_keys, gt_keys = set(pred_annotations), set(gt_annotations)
    if pred_keys != gt_keys:
        missing = sorted(gt_keys - pred_keys)
        extra = sorted(pred_keys - gt_keys)
        raise KeyMismatch(f"missing predictions: {missing}; unmatched: {extra}")

    thresholds = tuple(float(t) for t in thresholds)
    overall = {t: Counts(0, 0, 0) for t in thresholds}
    per_sign: dict[str, dict[float, Counts]] = {}
    for key in sorted(gt_annotations):
        pred = pred_annotations[key]
        gt = gt_annotations[key]
        sign = gt.sign_name
        rows = per_sign.setdefault(sign, {t: Counts(0, 0, 0) for t in thresholds})
        for t in thresholds:
            c = match_keypoints(pred.keypoints, gt.keypoints, t)
            overall[t] = overall[t] + c
            rows[t] = rows[t] + c
    return MetricReport(thresholds=thresholds, overall=overall, per_sign=per_sign)


# ---------------------------------------------------------------------------
# Annotation JSON format (shared by synthetic ground truth and predictions):
#   {"sign": str, "image_size": [h, w], "keypoints": [[x, y], ...]}
# ---------------------------------------------------------------------------


def annotation_from_skeleton(s: Skeleton, image_size: tuple[int, int]) -> Annotation:
    return Annotation(
        sign_name=s.sign_name,
        keypoints=tuple(s.all_keypoints()),
        image_size=(int(image_size[0]), int(image_size[1])),
    )


def annotation_to_dict(a: Annotation) -> dict:
    return {
        "sign": a.sign_name,
        "image_size": [a.image_size[0], a.image_size[1]],
        "keypoints": [[p.x, p.y] for p in a.keypoints],
    }


def annotation_from_dict(d: dict) -> Annotation:
    return Annotation(
        sign_name=str(d.get("sign", "")),
        keypoints=tuple(Point(float(x), float(y)) for x, y in d["keypoints"]),
        image_size=(int(d["image_size"][0]), int(d["image_size"][1])),
    )


def load_annotation(path: str | Path) -> Annotation:
    with open(path, "r", encoding="utf-8") as fh:
        return annotation_from_dict(json.load(fh))


def save_annotation(a: Annotation, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(annotation_to_dict(a), fh, indent=2, sort_keys=True)
        fh.write("\n")
