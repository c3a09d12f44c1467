"""Attention-guided token selection and KV-cache compression.

The question rows of the captured attention matrix score each visual token
(max over question rows); the top ceil(alpha * n_visual) tokens survive.
Caches of layers up to the selection layer are row-filtered to the
surviving visual rows plus the question rows — the kept rows are verbatim
copies, nothing is recomputed — while the remaining layers rerun on the
reduced hidden states.  Generated tokens keep counting positions from the
original prompt length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import KVCaches, LayerCache, Model, PrefillResult, forward_layers


@dataclass(frozen=True)
class SelectionSet:
    """Retained visual token indices (ascending) with their attention scores."""

    indices: np.ndarray   # (keep_count,) int64, sorted ascending
    scores: np.ndarray    # (n_visual,) float64, the full score vector
    alpha: float
    keep_count: int

    @property
    def n_visual(self) -> int:
        return len(self.scores)

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "keep_count": self.keep_count,
            "indices": [int(i) for i in self.indices],
            "scores": [float(s) for s in self.scores],
        }


@dataclass(frozen=True)
class CompressedCaches:
    """Post-compression cache set: every layer holds |S| + N_q rows."""

    caches: KVCaches
    selection: SelectionSet
    n_question: int
    m_layer: int


def extract_qv_attention(attention_at_m: np.ndarray, n_visual: int) -> np.ndarray:
    """Question-to-visual block of the full attention matrix (rows n_visual.., cols ..n_visual)."""
    attn = np.asarray(attention_at_m)
    if attn.ndim != 2 or attn.shape[0] != attn.shape[1]:
        raise ValueError(f"attention matrix must be square, got {attn.shape}")
    if not 0 <= n_visual <= attn.shape[0]:
        raise ValueError(f"n_visual {n_visual} out of range for {attn.shape[0]} positions")
    return attn[n_visual:, :n_visual].copy()


def score_visual_tokens(a_qv: np.ndarray) -> np.ndarray:
    """Per-visual-token relevance: max pooling over the question rows."""
    a_qv = np.asarray(a_qv)
    if a_qv.size == 0:
        raise ValueError("cannot score an empty question-to-visual attention block")
    return a_qv.max(axis=0)


def select_top_alpha(a_v: np.ndarray, alpha: float) -> SelectionSet:
    """Keep the ceil(alpha * n) best-scoring tokens; ties go to the lower index."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    scores = np.asarray(a_v, dtype=np.float64).ravel()
    n = len(scores)
    if n == 0:
        raise ValueError("cannot select from zero visual tokens")
    keep = math.ceil(alpha * n)
    order = np.lexsort((np.arange(n), -scores))  # descending score, index breaks ties
    indices = np.sort(order[:keep])
    return SelectionSet(indices=indices.astype(np.int64), scores=scores.copy(), alpha=alpha, keep_count=keep)


def compress_and_continue(
    prefill_result: PrefillResult,
    selection: SelectionSet,
    model: Model,
    m_layer: int,
):
    """Drop unselected visual tokens after layer m_layer and finish the prefill.

    Hidden states at the m_layer boundary are restricted to the selected
    visual rows plus all question rows, the remaining layers run on that
    reduced sequence (positions keep their original encodings and relative
    order), and the caches are assembled per the compression rule: layers
    <= m_layer are row-filtered copies, later layers come from the reduced
    run.  Returns (CompressedCaches, final hidden states).
    """
    spec = model.spec
    if m_layer != prefill_result.m_layer:
        raise ValueError(f"prefill captured attention at layer {prefill_result.m_layer}, not {m_layer}")
    if not 1 <= m_layer < spec.layers:
        raise ValueError(f"m_layer must leave at least one layer to run, got {m_layer} of {spec.layers}")
    n_visual = prefill_result.n_visual
    n_question = prefill_result.n_question
    idx = np.asarray(selection.indices, dtype=np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= n_visual):
        raise IndexError(f"selection indices out of range for {n_visual} visual tokens")

    kept = np.concatenate([idx, np.arange(n_visual, n_visual + n_question, dtype=np.int64)])

    reduced_hidden = prefill_result.hidden[m_layer][kept]
    hidden, kv_rows, _ = forward_layers(model, reduced_hidden, m_layer + 1, spec.layers)

    layers: list[LayerCache] = []
    for cache in prefill_result.caches.layers[:m_layer]:
        layers.append(LayerCache(cache.keys[kept].copy(), cache.values[kept].copy()))
    for k_flat, v_flat in kv_rows:
        layers.append(LayerCache(k_flat, v_flat))

    caches = KVCaches(layers, next_pos=prefill_result.seq_len)
    compressed = CompressedCaches(
        caches=caches,
        selection=selection,
        n_question=n_question,
        m_layer=m_layer,
    )
    return compressed, hidden[-1]
