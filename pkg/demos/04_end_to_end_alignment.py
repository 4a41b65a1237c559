"""Full pipeline on one synthetic case: global alignment, then refinement.

Run:  python demos/04_end_to_end_alignment.py
"""

from pathlib import Path

import numpy as np

from wedgealign import (
    PerturbSpec,
    PipelineConfig,
    align_sign,
    demo_skeleton,
    make_case,
    render_skeleton,
)
from wedgealign.render import PALETTE, render_overlay_png, skeleton_svg_group, svg_document

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

skeleton = demo_skeleton()
proto = render_skeleton(skeleton, noise_sigma=0.0)
case = make_case(skeleton, PerturbSpec(rng_seed=4))

result = align_sign(proto, skeleton, case.target_image, PipelineConfig().with_seed(4))

gt = np.array([[p.x, p.y] for p in case.gt_skeleton.all_keypoints()])
for name, skel in (("global", result.global_skeleton), ("refined", result.final_skeleton)):
    pred = np.array([[p.x, p.y] for p in skel.all_keypoints()])
    err = np.linalg.norm(pred - gt, axis=1)
    print(f"{name:>8}: mean keypoint error {err.mean():5.2f}px, max {err.max():5.2f}px")
print(f"global stage: {len(result.global_alignment.inliers)} inliers, "
      f"spread score {result.global_alignment.spread_score:.3f}")

render_overlay_png(case.target_image, [result.final_skeleton]).save(out / "04_overlay.png")
groups = [
    skeleton_svg_group(case.gt_skeleton, PALETTE[1], label="ground-truth"),
    skeleton_svg_group(result.final_skeleton, PALETTE[0], label="aligned"),
]
(out / "04_alignment.svg").write_text(svg_document((512, 512), groups))
print("wrote", out / "04_overlay.png", "and", out / "04_alignment.svg")
