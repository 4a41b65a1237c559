"""Small benchmark: generate cases, align them, and score keypoint F1.

Run:  python demos/05_benchmark_and_metrics.py   (about a minute)
"""

from pathlib import Path

from wedgealign import (
    PerturbSpec,
    PipelineConfig,
    align_sign,
    demo_skeleton,
    evaluate_corpus,
    make_case,
    render_skeleton,
)
from wedgealign.evaluation import annotation_from_skeleton

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

skeleton = demo_skeleton()
proto = render_skeleton(skeleton, noise_sigma=0.0)
cfg = PipelineConfig()

cases = 8
gts, full_preds, glob_preds = {}, {}, {}
for i in range(cases):
    case = make_case(skeleton, PerturbSpec(rng_seed=i))
    result = align_sign(proto, skeleton, case.target_image, cfg.with_seed(i))
    key = f"case_{i}"
    gts[key] = annotation_from_skeleton(case.gt_skeleton, (512, 512))
    full_preds[key] = annotation_from_skeleton(result.final_skeleton, (512, 512))
    glob_preds[key] = annotation_from_skeleton(result.global_skeleton, (512, 512))
    print(f"aligned {key}")

for name, preds in (("global-only", glob_preds), ("full", full_preds)):
    report = evaluate_corpus(preds, gts)
    row = "  ".join(
        f"F1@{t:g}={report.overall[t].f1:.3f}" for t in report.thresholds
    )
    print(f"{name:>12}: {row}")

report = evaluate_corpus(full_preds, gts)
(out / "05_report.txt").write_text(report.to_table() + "\n")
print("wrote", out / "05_report.txt")
