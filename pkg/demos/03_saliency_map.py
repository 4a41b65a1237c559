"""Saliency: where in the target does the sign appear to be written?

Run:  python demos/03_saliency_map.py
"""

from pathlib import Path

import numpy as np
from PIL import Image

from wedgealign import (
    PerturbSpec,
    compute_saliency,
    demo_skeleton,
    extract_builtin_features,
    make_case,
    render_skeleton,
    similarity_volume,
)
from wedgealign.saliency import saliency_to_image

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

skeleton = demo_skeleton()
proto = render_skeleton(skeleton, noise_sigma=0.0)
case = make_case(skeleton, PerturbSpec(rng_seed=2))

volume = similarity_volume(
    extract_builtin_features(proto), extract_builtin_features(case.target_image)
)
sal = compute_saliency(volume, proto)
nonzero = float((sal.values > 0).mean())
print(f"saliency grid {sal.values.shape}, {nonzero:.0%} of cells non-zero")

side_by_side = np.concatenate(
    [np.asarray(Image.fromarray(case.target_image).convert("L")), saliency_to_image(sal)],
    axis=1,
)
Image.fromarray(side_by_side).save(out / "03_saliency.png")
print("wrote", out / "03_saliency.png  (target | saliency)")
