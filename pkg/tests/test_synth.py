import math

import numpy as np
import pytest

from wedgealign.errors import CannotFitCanvas, OutOfCanvas
from wedgealign.geometry import Point, Skeleton, Stroke, transform_skeleton
from wedgealign.synth import (
    PerturbSpec,
    _tail_quad,
    demo_skeleton,
    make_case,
    render_skeleton,
)


def axis_aligned_stroke():
    # head apex points right, tail well clear of the head
    return Stroke(Point(100, 100), Point(100, 140), Point(134, 120), Point(300, 120))


class TestPerturbSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            PerturbSpec(scale_range=(1.1, 0.9))
        with pytest.raises(ValueError):
            PerturbSpec(rotation_max_deg=-1.0)


class TestRenderSkeleton:
    def test_deterministic_without_noise(self, proto_skeleton):
        a = render_skeleton(proto_skeleton, noise_sigma=0.0)
        b = render_skeleton(proto_skeleton, noise_sigma=0.0)
        np.testing.assert_array_equal(a, b)

    def test_deterministic_with_seeded_noise(self, proto_skeleton):
        a = render_skeleton(proto_skeleton, rng=np.random.default_rng(3))
        b = render_skeleton(proto_skeleton, rng=np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)
        c = render_skeleton(proto_skeleton)  # default generator is seeded too
        d = render_skeleton(proto_skeleton)
        np.testing.assert_array_equal(c, d)

    def test_foreground_area_matches_analytic(self):
        stroke = axis_aligned_stroke()
        s = Skeleton("area", (stroke,))
        width = 12.0
        img = render_skeleton(s, stroke_width=width, noise_sigma=0.0)
        fg = int((img < 128).sum())

        head_area = 0.5 * abs(stroke.head_area())
        quad = _tail_quad(stroke, width)
        xs = [p[0] for p in quad]
        ys = [p[1] for p in quad]
        quad_area = 0.5 * abs(
            sum(
                xs[i] * ys[(i + 1) % 4] - xs[(i + 1) % 4] * ys[i]
                for i in range(4)
            )
        )
        expected = head_area + quad_area
        assert abs(fg - expected) / expected < 0.10

    def test_out_of_canvas(self, proto_skeleton):
        shifted = transform_skeleton(
            proto_skeleton,
            __import__("wedgealign.geometry", fromlist=["AffineTransform"]).AffineTransform.translation(400, 0),
        )
        with pytest.raises(OutOfCanvas):
            render_skeleton(shifted, noise_sigma=0.0)

    def test_intensity_poles(self, proto_image):
        assert proto_image.min() == 30
        assert proto_image.max() == 230


class TestMakeCase:
    def test_zero_maxima_is_identity(self, proto_skeleton):
        spec = PerturbSpec(
            rotation_max_deg=0.0,
            scale_range=(1.0, 1.0),
            translation_max=0.0,
            per_stroke_jitter_max=0.0,
            rng_seed=4,
        )
        case = make_case(proto_skeleton, spec)
        ident = case.planted_transform
        assert (ident.g11, ident.g12, ident.g13) == (1.0, 0.0, 0.0)
        assert (ident.g21, ident.g22, ident.g23) == (0.0, 1.0, 0.0)
        np.testing.assert_array_equal(case.planted_jitter, 0.0)
        for p, q in zip(case.gt_skeleton.all_keypoints(), proto_skeleton.all_keypoints()):
            assert (p.x, p.y) == (q.x, q.y)

    def test_seed_reproducibility(self, proto_skeleton):
        a = make_case(proto_skeleton, PerturbSpec(rng_seed=9))
        b = make_case(proto_skeleton, PerturbSpec(rng_seed=9))
        np.testing.assert_array_equal(a.target_image, b.target_image)
        assert a.planted_transform == b.planted_transform
        np.testing.assert_array_equal(a.planted_jitter, b.planted_jitter)

    def test_ground_truth_is_exact_transform(self, proto_skeleton):
        case = make_case(
            proto_skeleton, PerturbSpec(per_stroke_jitter_max=0.0, rng_seed=2)
        )
        analytic = transform_skeleton(proto_skeleton, case.planted_transform)
        for p, q in zip(case.gt_skeleton.all_keypoints(), analytic.all_keypoints()):
            assert abs(p.x - q.x) < 1e-9 and abs(p.y - q.y) < 1e-9

    def test_displacement_statistics(self, proto_skeleton):
        spec_kwargs = dict(
            rotation_max_deg=10.0,
            scale_range=(0.9, 1.1),
            translation_max=20.0,
            per_stroke_jitter_max=5.0,
        )
        disps = []
        for seed in range(100):
            case = make_case(proto_skeleton, PerturbSpec(rng_seed=seed, **spec_kwargs))
            for p, q in zip(case.gt_skeleton.all_keypoints(), proto_skeleton.all_keypoints()):
                disps.append(math.hypot(p.x - q.x, p.y - q.y))
        mean = float(np.mean(disps))
        # bounded by r_max * |s*e^(i*theta) - 1| + translation + jitter
        assert 0.0 < mean < 100.0

    def test_cannot_fit_canvas(self, proto_skeleton):
        spec = PerturbSpec(
            rotation_max_deg=0.0,
            scale_range=(4.0, 4.0),
            translation_max=0.0,
            per_stroke_jitter_max=0.0,
            rng_seed=0,
        )
        with pytest.raises(CannotFitCanvas):
            make_case(proto_skeleton, spec)

    def test_jitter_bounded(self, proto_skeleton):
        case = make_case(proto_skeleton, PerturbSpec(per_stroke_jitter_max=5.0, rng_seed=6))
        assert np.abs(case.planted_jitter).max() <= 5.0


def test_demo_skeleton_shape():
    s = demo_skeleton()
    assert s.n_strokes == 4
    assert all(0 <= p.x <= 512 and 0 <= p.y <= 512 for p in s.all_keypoints())
    scaled = demo_skeleton(canvas=(256, 256))
    assert all(0 <= p.x <= 256 and 0 <= p.y <= 256 for p in scaled.all_keypoints())
