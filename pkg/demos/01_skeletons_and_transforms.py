"""Build a stroke skeleton, transform it, and render it as an image + SVG.

Run:  python demos/01_skeletons_and_transforms.py
Outputs land in demos/output/.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from wedgealign import (
    AffineTransform,
    Point,
    StrokeTransform,
    demo_skeleton,
    render_skeleton,
    save_skeleton,
    transform_skeleton,
)
from wedgealign.render import PALETTE, skeleton_svg_group, svg_document

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

# A sign is an ordered list of strokes; each stroke is a triangular head
# (three keypoints) plus a tail endpoint.
skeleton = demo_skeleton()
print(f"sign '{skeleton.sign_name}': {skeleton.n_strokes} strokes, "
      f"{len(skeleton.edges)} drawn edges")

image = render_skeleton(skeleton, noise_sigma=0.0)
Image.fromarray(image).save(out / "01_prototype.png")
save_skeleton(skeleton, out / "01_prototype.json")

# Global placement is a plain affine; per-stroke refinement composes a
# projective perturbation on top (P.G, applied in homogeneous coordinates).
g = AffineTransform.rotation_scale_about(
    center=Point(256, 256), radians=np.radians(8), scale=1.05
)
warped = transform_skeleton(skeleton, g)

tilted = [StrokeTransform.zero()] * skeleton.n_strokes
tilted[0] = StrokeTransform(p13=14.0, p23=-6.0)  # nudge the first stroke only
warped_local = transform_skeleton(skeleton, g, tilted)

groups = [
    skeleton_svg_group(skeleton, PALETTE[0], label="prototype"),
    skeleton_svg_group(warped, PALETTE[1], label="affine"),
    skeleton_svg_group(warped_local, PALETTE[2], label="affine+local"),
]
(out / "01_transforms.svg").write_text(svg_document((512, 512), groups))
print("wrote", out / "01_prototype.png", "and", out / "01_transforms.svg")
