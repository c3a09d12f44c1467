"""Shared oracle helpers for the test suite."""

import numpy as np

from vtprune.model import attention_over_cache, decode_step
from vtprune.rng import SplitMix64


def coverage_grid(merged):
    """How many provenance records touch each (frame, location) cell."""
    t, n_v, _ = merged.grid_shape
    cov = np.zeros((t, n_v), dtype=np.int64)
    for p in merged.provenance:
        for f in p.source_frames:
            for loc in p.source_locations:
                cov[f, loc] += 1
    return cov


def max_mean_preservation_error(grid, merged):
    """Worst relative error between merged tokens and the flat mean of their member cells."""
    worst = 0.0
    data = grid.data.astype(np.float64)
    for token, p in zip(merged.tokens, merged.provenance):
        cells = data[np.ix_(list(p.source_frames), list(p.source_locations))]
        flat_mean = cells.reshape(-1, cells.shape[-1]).mean(axis=0)
        scale = max(1.0, np.abs(flat_mean).max())
        worst = max(worst, float(np.abs(token.astype(np.float64) - flat_mean).max() / scale))
    return worst


def blob_instance(seed, n_blobs, per_blob, spread=0.4, separation=25.0):
    """Well-separated gaussian blobs plus the exhaustive nearest-center oracle labels."""
    stream = SplitMix64(seed)
    centers = stream.normal(n_blobs * 3).reshape(n_blobs, 3) * 0.5
    centers += separation * np.eye(max(n_blobs, 3))[:n_blobs, :3] * np.arange(1, n_blobs + 1)[:, None]
    points = []
    for b in range(n_blobs):
        points.append(centers[b] + spread * stream.normal(per_blob * 3).reshape(per_blob, 3))
    pts = np.vstack(points)
    oracle = np.argmin(np.linalg.norm(pts[:, None, :] - centers[None], axis=2), axis=1)
    return pts, centers, oracle


def groups_from_labels(labels):
    return {tuple(sorted(np.flatnonzero(labels == c))) for c in np.unique(labels)}


def masked_oracle_worst_diff(model, pre, sel, compressed, token_ids):
    """Decode over compressed caches and compare every layer <= M against the
    oracle that masks non-selected visual positions to -inf over the full cache."""
    m_layer = compressed.m_layer
    n_kept = sel.keep_count + compressed.n_question
    kept = set(sel.indices.tolist())
    caches = compressed.caches
    worst = 0.0
    for tok in token_ids:
        step = decode_step(model, caches, int(tok), record_attention=True)
        for l in range(1, m_layer + 1):
            full = pre.caches.layers[l - 1]
            keys = np.vstack([full.keys, caches.layers[l - 1].keys[n_kept:]])
            values = np.vstack([full.values, caches.layers[l - 1].values[n_kept:]])
            mask = np.zeros(len(keys))
            for j in range(pre.n_visual):
                if j not in kept:
                    mask[j] = -np.inf
            oracle = attention_over_cache(model, l, step.layer_inputs[l - 1], keys, values, extra_scores=mask)
            worst = max(worst, float(np.abs(oracle - step.attn_outputs[l - 1]).max()))
    return worst
