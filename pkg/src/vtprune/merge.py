"""Spatio-temporal token merging.

The merge path runs in four stages: frames are grouped into contiguous
temporal segments by clustering per-frame mean features; each segment's
spatial locations are split into static and dynamic ones by mean pairwise
cosine similarity; static locations are averaged over the segment's frames;
and finally both branches are compacted by spatial clustering (static
tokens once per segment, dynamic tokens once per frame).  Every output
token carries a provenance record of the exact (frame, location) cells it
averages, and the records of a video partition the full T*N_v cell grid.

Token data stays float32; all sums are accumulated in float64 before being
cast back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import cluster_means, dpc_knn
from .grids import Provenance, PruneConfig, TokenGrid, round_half_away


@dataclass(frozen=True)
class SegmentPartition:
    """Ordered, contiguous, non-overlapping frame ranges covering [0, T)."""

    segments: tuple[tuple[int, int], ...]  # inclusive (start, end) pairs

    def __post_init__(self):
        if not self.segments:
            raise ValueError("partition needs at least one segment")
        prev_end = -1
        for start, end in self.segments:
            if start != prev_end + 1 or end < start:
                raise ValueError(f"segments must be contiguous and sorted, got {self.segments}")
            prev_end = end

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def n_frames(self) -> int:
        return self.segments[-1][1] + 1

    def lengths(self) -> list[int]:
        return [end - start + 1 for start, end in self.segments]


@dataclass(frozen=True)
class StaticMask:
    """Per-segment static/dynamic split.

    masks[b][i] is True when location i counts as static in segment b,
    i.e. its mean pairwise cosine similarity over the segment's frames is
    >= tau.  Single-frame segments get similarity 1.0 by convention.
    zero_norm_pairs counts (pair, location) combinations whose similarity
    was forced to 0 because a token vector had zero norm.
    """

    masks: tuple[np.ndarray, ...]
    mean_similarity: tuple[np.ndarray, ...]
    tau: float
    zero_norm_pairs: int = 0

    def static_count(self, segment: int) -> int:
        return int(self.masks[segment].sum())


@dataclass(frozen=True)
class SegmentTokens:
    """One segment's tokens after temporal merging, before spatial clustering."""

    segment_id: int
    frames: tuple[int, ...]
    static_locations: np.ndarray   # sorted location indices
    static_tokens: np.ndarray      # (n_static, C) float32, temporal means
    dynamic_locations: np.ndarray  # sorted location indices
    dynamic_tokens: np.ndarray     # (len(frames), n_dynamic, C) float32, unchanged rows

    @property
    def token_count(self) -> int:
        return len(self.static_locations) + len(self.frames) * len(self.dynamic_locations)


@dataclass(frozen=True)
class MergedTokenSet:
    """Compressed token sequence with full provenance.

    Tokens are ordered segment by segment; within a segment the static
    cluster tokens come first (ascending minimum source location), then the
    dynamic clusters frame by frame.
    """

    tokens: np.ndarray                 # (K, C) float32
    provenance: tuple[Provenance, ...]
    partition: SegmentPartition
    segment_spans: tuple[tuple[int, int], ...]  # half-open token index ranges per segment
    grid_shape: tuple[int, int, int]
    trace: dict = field(repr=False, default_factory=dict)

    @property
    def n_merged(self) -> int:
        return self.tokens.shape[0]

    @property
    def n_raw(self) -> int:
        return self.grid_shape[0] * self.grid_shape[1]


def segment_frames(grid: TokenGrid, gamma: float, k_knn: int) -> SegmentPartition:
    """Partition frames into contiguous segments of similar content.

    Per-frame features (token means) are clustered into max(1,
    round(gamma*T)) groups; maximal runs of consecutive frames with the
    same label become segments, so interleaved labels yield more segments
    than clusters.
    """
    t = grid.frames
    feats_64 = grid.data.astype(np.float64).sum(axis=1) / grid.tokens_per_frame
    feats = feats_64.astype(np.float32)
    n_clusters = min(max(1, round_half_away(gamma * t)), t)
    result = dpc_knn(feats, k_knn=k_knn, n_clusters=n_clusters)

    segments = []
    start = 0
    for i in range(1, t):
        if result.labels[i] != result.labels[i - 1]:
            segments.append((start, i - 1))
            start = i
    segments.append((start, t - 1))
    return SegmentPartition(tuple(segments))


def compute_static_mask(grid: TokenGrid, partition: SegmentPartition, tau: float) -> StaticMask:
    """Mark per-segment static locations by mean pairwise cosine similarity."""
    if partition.n_frames != grid.frames:
        raise ValueError("partition does not cover the grid's frames")
    n_v = grid.tokens_per_frame
    masks = []
    sims = []
    zero_pairs = 0
    for start, end in partition.segments:
        length = end - start + 1
        if length == 1:
            mean_sim = np.ones(n_v)
        else:
            block = grid.data[start:end + 1].astype(np.float64)  # (L, N_v, C)
            norms = np.linalg.norm(block, axis=2)                # (L, N_v)
            dots = np.einsum("tic,uic->tui", block, block)       # (L, L, N_v)
            ti, ui = np.triu_indices(length, k=1)
            pair_dots = dots[ti, ui]                             # (n_pairs, N_v)
            pair_norms = norms[ti] * norms[ui]
            valid = pair_norms > 0.0
            zero_pairs += int((~valid).sum())
            cos = np.zeros_like(pair_dots)
            np.divide(pair_dots, pair_norms, out=cos, where=valid)
            mean_sim = cos.sum(axis=0) / len(ti)
        masks.append(mean_sim >= tau)
        sims.append(mean_sim)
    return StaticMask(tuple(masks), tuple(sims), tau, zero_pairs)


def merge_temporal(grid: TokenGrid, partition: SegmentPartition, mask: StaticMask) -> list[SegmentTokens]:
    """Average static locations over each segment; keep dynamic rows untouched."""
    out = []
    for b, (start, end) in enumerate(partition.segments):
        frames = tuple(range(start, end + 1))
        seg_mask = mask.masks[b]
        static_locs = np.flatnonzero(seg_mask)
        dynamic_locs = np.flatnonzero(~seg_mask)
        block = grid.data[start:end + 1]
        static_tokens = (
            block[:, static_locs, :].astype(np.float64).sum(axis=0) / len(frames)
        ).astype(np.float32)
        dynamic_tokens = block[:, dynamic_locs, :].copy()
        out.append(SegmentTokens(
            segment_id=b,
            frames=frames,
            static_locations=static_locs,
            static_tokens=static_tokens,
            dynamic_locations=dynamic_locs,
            dynamic_tokens=dynamic_tokens,
        ))
    return out


def _emit_clusters(tokens, locations, n_clusters, k_knn):
    """Cluster token rows, returning (means, member-location tuples) ordered by min location."""
    result = dpc_knn(tokens, k_knn=k_knn, n_clusters=n_clusters)
    means = cluster_means(tokens, result.labels, n_clusters).astype(np.float32)
    groups = [np.sort(locations[result.labels == c]) for c in range(n_clusters)]
    order = sorted(range(n_clusters), key=lambda c: int(groups[c][0]))
    return [(means[c], tuple(int(i) for i in groups[c])) for c in order]


def merge_spatial(seg: SegmentTokens, beta: float, k_knn: int):
    """Spatially compact one segment's static and dynamic tokens.

    Static tokens are clustered once per segment, dynamic tokens once per
    frame; empty branches are skipped.  Returns the segment's token rows
    and provenance records in canonical order, plus cluster-size stats for
    the trace.
    """
    rows: list[np.ndarray] = []
    prov: list[Provenance] = []
    static_sizes: list[int] = []
    dynamic_sizes: list[list[int]] = []

    n_static = len(seg.static_locations)
    if n_static > 0:
        c_s = max(1, round_half_away(beta * n_static))
        for mean_vec, locs in _emit_clusters(seg.static_tokens, seg.static_locations, c_s, k_knn):
            rows.append(mean_vec)
            prov.append(Provenance(seg.segment_id, seg.frames, locs, "static-merged"))
            static_sizes.append(len(locs))

    n_dynamic = len(seg.dynamic_locations)
    if n_dynamic > 0:
        c_d = max(1, round_half_away(beta * n_dynamic))
        for fi, frame in enumerate(seg.frames):
            sizes = []
            for mean_vec, locs in _emit_clusters(seg.dynamic_tokens[fi], seg.dynamic_locations, c_d, k_knn):
                rows.append(mean_vec)
                prov.append(Provenance(seg.segment_id, (frame,), locs, "dynamic-merged"))
                sizes.append(len(locs))
            dynamic_sizes.append(sizes)

    return rows, prov, {"static_cluster_sizes": static_sizes, "dynamic_cluster_sizes": dynamic_sizes}


def merge_pipeline(grid: TokenGrid, config: PruneConfig) -> MergedTokenSet:
    """Full merge path: segment, split static/dynamic, average, compact."""
    partition = segment_frames(grid, config.gamma, config.k_knn)
    mask = compute_static_mask(grid, partition, config.tau)
    segments = merge_temporal(grid, partition, mask)

    all_rows: list[np.ndarray] = []
    all_prov: list[Provenance] = []
    spans = []
    seg_trace = []
    for seg in segments:
        rows, prov, stats = merge_spatial(seg, config.beta, config.k_knn)
        start = len(all_rows)
        all_rows.extend(rows)
        all_prov.extend(prov)
        spans.append((start, len(all_rows)))
        seg_trace.append({
            "frames": [seg.frames[0], seg.frames[-1]],
            "n_static": len(seg.static_locations),
            "n_dynamic": len(seg.dynamic_locations),
            "static_share": len(seg.static_locations) / grid.tokens_per_frame,
            "tokens_after_temporal": seg.token_count,
            "tokens_out": len(rows),
            **stats,
        })

    tokens = np.stack(all_rows).astype(np.float32)
    after_temporal = sum(seg.token_count for seg in segments)
    trace = {
        "raw_tokens": grid.raw_tokens,
        "after_temporal": after_temporal,
        "merged_tokens": len(all_rows),
        "zero_norm_pairs": mask.zero_norm_pairs,
        "segments": seg_trace,
    }
    return MergedTokenSet(
        tokens=tokens,
        provenance=tuple(all_prov),
        partition=partition,
        segment_spans=tuple(spans),
        grid_shape=(grid.frames, grid.tokens_per_frame, grid.channels),
        trace=trace,
    )
