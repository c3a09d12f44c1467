"""Retained-ratio and FLOPs accounting across hyperparameters, at toy scale.

Builds a small mixed corpus, runs the full pipeline at the default
configuration, then sweeps the selection ratio alpha and the pruning layer
M and prints the resulting efficiency table.
"""

from vtprune import (
    ModelSpec,
    PruneConfig,
    SynthSpec,
    generate,
    init_model,
    make_question_ids,
    run_video,
)

model = init_model(ModelSpec())
grids = []
for v, fraction in enumerate([0.25, 0.5, 0.75]):
    grid, _ = generate(SynthSpec(frames=16, tokens_per_frame=64, channels=64,
                                 n_scenes=4, static_fraction=fraction, seed=100 + v))
    grids.append((f"video_{v}", grid))
question_len = 16


def aggregate(config):
    retained, flops = 0.0, 0.0
    for vid, grid in grids:
        ids = make_question_ids(config.seed, question_len, model.spec.vocab)
        run = run_video(grid, config, model, ids, vid)
        retained += run.report.retained_ratio
        flops += run.report.flops_multiplier
    return retained / len(grids), flops / len(grids)


base = PruneConfig()
retained, flops = aggregate(base)
print(f"defaults (tau={base.tau}, gamma={base.gamma}, beta={base.beta}, "
      f"alpha={base.alpha}, M={base.m_layer}):")
print(f"  retained ratio {retained:.3f}, FLOPs multiplier {flops:.3f}\n")

print("alpha sweep (M=10):")
print("  alpha  retained  FLOPs x")
for alpha in (0.1, 0.2, 0.4, 0.6, 0.8, 1.0):
    retained, flops = aggregate(PruneConfig(alpha=alpha))
    print(f"  {alpha:4.1f}   {retained:6.3f}   {flops:6.3f}")

print("\npruning-layer sweep (alpha=0.4):")
print("  M   retained  FLOPs x")
for m in (2, 4, 6, 8, 10):
    retained, flops = aggregate(PruneConfig(m_layer=m))
    print(f"  {m:2d}  {retained:6.3f}   {flops:6.3f}")

print("\nidentity configuration (tau>1, beta=1, alpha=1):")
retained, flops = aggregate(PruneConfig(tau=2.0, beta=1.0, alpha=1.0))
print(f"  retained ratio {retained:.3f}, FLOPs multiplier {flops:.3f}")
