"""Dense features, the 4-D similarity volume, and best-buddy matches.

Run:  python demos/02_features_and_best_buddies.py
"""

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from wedgealign import (
    PerturbSpec,
    best_buddies,
    demo_skeleton,
    extract_builtin_features,
    filter_foreground,
    make_case,
    render_skeleton,
    similarity_volume,
)

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

skeleton = demo_skeleton()
proto = render_skeleton(skeleton, noise_sigma=0.0)
case = make_case(skeleton, PerturbSpec(rng_seed=1))

proto_fm = extract_builtin_features(proto)
target_fm = extract_builtin_features(case.target_image)
print(f"feature maps: C={proto_fm.channels}, grid={proto_fm.grid_shape}")

volume = similarity_volume(proto_fm, target_fm)
print(f"similarity volume shape {volume.data.shape}, "
      f"range [{volume.data.min():.2f}, {volume.data.max():.2f}]")

matches = filter_foreground(best_buddies(volume), proto)
print(f"{len(matches)} foreground best-buddy correspondences")

# Side-by-side visualization with match lines.
canvas = Image.new("RGB", (1024, 512), "white")
canvas.paste(Image.fromarray(proto).convert("RGB"), (0, 0))
canvas.paste(Image.fromarray(case.target_image).convert("RGB"), (512, 0))
draw = ImageDraw.Draw(canvas)
for m in matches[::2]:
    color = tuple(int(c) for c in np.random.default_rng(int(m.proto.x)).integers(40, 220, 3))
    draw.line(
        [(m.proto.x, m.proto.y), (m.target.x + 512, m.target.y)], fill=color, width=1
    )
canvas.save(out / "02_best_buddies.png")
print("wrote", out / "02_best_buddies.png")
