"""LLM-guided selection and KV-cache compression, step by step.

Feeds merged visual tokens plus a synthetic question into the small
decoder-only transformer, pulls the question-to-visual attention block out
of layer M, keeps the top-alpha tokens, and compresses the KV caches.
Finishes by decoding a few tokens over the compressed caches and checking
them against the masked full-cache oracle.
"""

import numpy as np

from vtprune import (
    KVCaches,
    ModelSpec,
    PruneConfig,
    SynthSpec,
    attention_over_cache,
    compress_and_continue,
    decode_step,
    extract_qv_attention,
    generate,
    init_model,
    make_question_ids,
    merge_pipeline,
    prefill,
    score_visual_tokens,
    select_top_alpha,
)

config = PruneConfig()  # alpha=0.4, m_layer=10
model = init_model(ModelSpec())  # 12 layers, 4 heads, width 64
grid, _ = generate(SynthSpec(frames=16, tokens_per_frame=64, channels=64, n_scenes=4,
                             static_fraction=0.5, seed=21))
merged = merge_pipeline(grid, config)
question = make_question_ids(3, 16, model.spec.vocab)
print(f"sequence: {merged.n_merged} visual tokens + {len(question)} question tokens")

# Prefill the whole sequence, capturing head-averaged attention at layer M.
pre = prefill(model, merged.tokens, question, config.m_layer)
attn = pre.attention_at_m
print(f"attention at layer {config.m_layer}: {attn.shape}, "
      f"row sums within {np.abs(attn.sum(axis=1) - 1).max():.1e} of 1")

# Question rows scoring visual columns, max-pooled over the question.
a_qv = extract_qv_attention(attn, pre.n_visual)
scores = score_visual_tokens(a_qv)
selection = select_top_alpha(scores, config.alpha)
print(f"kept {selection.keep_count}/{pre.n_visual} visual tokens "
      f"(score range {scores.min():.2e} .. {scores.max():.2e})")

# Compress the caches and finish the remaining layers on the short sequence.
compressed, final_hidden = compress_and_continue(pre, selection, model, config.m_layer)
print(f"cache rows per layer: {pre.seq_len} -> {compressed.caches.length()}")

# Kept rows are verbatim copies of the original cache rows.
kept = np.concatenate([selection.indices, np.arange(pre.n_visual, pre.seq_len)])
assert all(
    np.array_equal(compressed.caches.layers[l].keys, pre.caches.layers[l].keys[kept])
    for l in range(config.m_layer)
)

# Decoding over the compressed cache equals attending over the full cache
# with the dropped visual positions masked to -inf.
kept_set = set(selection.indices.tolist())
mask = np.zeros(pre.seq_len)
for j in range(pre.n_visual):
    if j not in kept_set:
        mask[j] = -np.inf
worst = 0.0
for token in (5, 9, 2):
    step = decode_step(model, compressed.caches, token, record_attention=True)
    for layer in range(1, config.m_layer + 1):
        full = pre.caches.layers[layer - 1]
        extra = compressed.caches.layers[layer - 1]
        rows = slice(selection.keep_count + len(question), None)
        keys = np.vstack([full.keys, extra.keys[rows]])
        values = np.vstack([full.values, extra.values[rows]])
        pad = np.concatenate([mask, np.zeros(len(keys) - pre.seq_len)])
        oracle = attention_over_cache(model, layer, step.layer_inputs[layer - 1], keys, values, pad)
        worst = max(worst, float(np.abs(oracle - step.attn_outputs[layer - 1]).max()))
print(f"masked full-cache oracle, 3 decode steps: max diff {worst:.2e}")
