"""End-to-end per-video run: merge, prefill, select, compress, account."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import PruneConfig, TokenGrid
from .merge import MergedTokenSet, merge_pipeline
from .metrics import EfficiencyReport, build_report
from .model import Model, PrefillResult, prefill
from .rng import SplitMix64, derive_seed
from .selection import (
    CompressedCaches,
    SelectionSet,
    compress_and_continue,
    extract_qv_attention,
    score_visual_tokens,
    select_top_alpha,
)


@dataclass(frozen=True)
class VideoRun:
    video_id: str
    merged: MergedTokenSet
    prefill_result: PrefillResult
    selection: SelectionSet
    compressed: CompressedCaches
    final_hidden: np.ndarray
    report: EfficiencyReport


def make_question_ids(seed: int, n_question: int, vocab: int) -> np.ndarray:
    """Seeded synthetic question token ids (the selector consumes geometry, not semantics)."""
    return SplitMix64(derive_seed(seed, 0x9E57)).integers(n_question, vocab)


def run_video(
    grid: TokenGrid,
    config: PruneConfig,
    model: Model,
    question_ids: np.ndarray,
    video_id: str = "",
) -> VideoRun:
    """Run the full pruning pipeline on one video."""
    if not config.m_layer < model.spec.layers:
        raise ValueError(
            f"m_layer ({config.m_layer}) must be below the model's layer count ({model.spec.layers})"
        )
    merged = merge_pipeline(grid, config)
    pre = prefill(model, merged.tokens, question_ids, config.m_layer)
    a_qv = extract_qv_attention(pre.attention_at_m, pre.n_visual)
    a_v = score_visual_tokens(a_qv)
    selection = select_top_alpha(a_v, config.alpha)
    compressed, final_hidden = compress_and_continue(pre, selection, model, config.m_layer)
    report = build_report(
        video_id=video_id,
        raw=merged.n_raw,
        merged=merged.n_merged,
        selected=selection.keep_count,
        n_question=len(question_ids),
        layers=model.spec.layers,
        m_layer=config.m_layer,
        channels=model.spec.channels,
        extra_stage_counts={"after_temporal": merged.trace["after_temporal"]},
    )
    return VideoRun(
        video_id=video_id,
        merged=merged,
        prefill_result=pre,
        selection=selection,
        compressed=compressed,
        final_hidden=final_hidden,
        report=report,
    )
