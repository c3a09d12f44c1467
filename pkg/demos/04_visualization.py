"""Back-project selection scores onto the frame grid and render heatmaps.

Runs the pipeline on one video and writes one PNG per temporal segment to
demos/output/, with selected cells outlined.  Every original (frame,
location) cell is painted exactly once via provenance.
"""

from pathlib import Path

from vtprune import (
    ModelSpec,
    PruneConfig,
    SynthSpec,
    backproject,
    generate,
    init_model,
    make_question_ids,
    run_video,
)
from vtprune.viz import render_segment_heatmaps

config = PruneConfig()
model = init_model(ModelSpec())
grid, _ = generate(SynthSpec(frames=16, tokens_per_frame=64, channels=64,
                             n_scenes=4, static_fraction=0.5, seed=33))
run = run_video(grid, config, model, make_question_ids(1, 16, model.spec.vocab), "demo")

proj = backproject(run.merged, run.selection)
assert (proj.coverage == 1).all()
share = proj.selected.mean()
print(f"selected tokens cover {share:.1%} of the {grid.frames}x{grid.tokens_per_frame} cell grid")

out_dir = Path(__file__).parent / "output"
paths = render_segment_heatmaps(proj, out_dir, "demo")
for p in paths:
    print(f"wrote {p}")
