"""Back-projection of token scores onto the (frame, location) grid and heatmap rendering.

Merged-token scores are mapped through provenance onto every original cell;
the provenance records of a video partition the grid, so each cell is
painted exactly once.  Scores are normalised per video (min to 0, max to 1;
a constant score vector maps to all zeros).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .merge import MergedTokenSet
from .selection import SelectionSet


@dataclass(frozen=True)
class BackProjection:
    scores: np.ndarray     # (T, N_v) normalised score per cell
    selected: np.ndarray   # (T, N_v) bool, cell belongs to a selected token
    coverage: np.ndarray   # (T, N_v) int, provenance visits per cell (1 everywhere)
    segments: tuple[tuple[int, int], ...]


def normalize_scores(scores: np.ndarray) -> np.ndarray:
    lo, hi = float(scores.min()), float(scores.max())
    if hi == lo:
        return np.zeros_like(scores, dtype=np.float64)
    return (scores - lo) / (hi - lo)


def backproject_records(
    frames: int,
    tokens_per_frame: int,
    records: list[dict],
    scores: np.ndarray,
    selected_indices: np.ndarray,
    segments: tuple[tuple[int, int], ...],
) -> BackProjection:
    """Paint per-token scores onto cells from plain provenance records.

    Each record is a dict with "frames" and "locations" lists; record k
    corresponds to merged token k.
    """
    norm = normalize_scores(np.asarray(scores, dtype=np.float64))
    score_grid = np.zeros((frames, tokens_per_frame))
    sel_grid = np.zeros((frames, tokens_per_frame), dtype=bool)
    coverage = np.zeros((frames, tokens_per_frame), dtype=np.int64)
    selected = set(int(i) for i in selected_indices)
    for k, rec in enumerate(records):
        fs = np.asarray(rec["frames"], dtype=np.int64)
        locs = np.asarray(rec["locations"], dtype=np.int64)
        score_grid[np.ix_(fs, locs)] = norm[k]
        coverage[np.ix_(fs, locs)] += 1
        if k in selected:
            sel_grid[np.ix_(fs, locs)] = True
    return BackProjection(score_grid, sel_grid, coverage, tuple(tuple(s) for s in segments))


def backproject(merged: MergedTokenSet, selection: SelectionSet) -> BackProjection:
    records = [
        {"frames": list(p.source_frames), "locations": list(p.source_locations)}
        for p in merged.provenance
    ]
    t, n_v, _ = merged.grid_shape
    return backproject_records(t, n_v, records, selection.scores, selection.indices, merged.partition.segments)


def render_segment_heatmaps(proj: BackProjection, out_dir: str | Path, video_id: str) -> list[Path]:
    """One PNG per segment: score heatmap with selected cells outlined."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for b, (start, end) in enumerate(proj.segments):
        block = proj.scores[start:end + 1]
        sel = proj.selected[start:end + 1]
        fig, ax = plt.subplots(figsize=(max(4.0, block.shape[1] / 8.0), max(2.0, block.shape[0] * 0.6)))
        ax.imshow(block, aspect="auto", cmap="viridis", vmin=0.0, vmax=1.0, interpolation="nearest")
        ys, xs = np.nonzero(sel)
        ax.scatter(xs, ys, s=6.0, marker="s", facecolors="none", edgecolors="red", linewidths=0.5)
        ax.set_xlabel("spatial location")
        ax.set_ylabel("frame")
        ax.set_yticks(range(block.shape[0]), [str(start + i) for i in range(block.shape[0])])
        ax.set_title(f"{video_id} segment {b} (frames {start}-{end})")
        path = out_dir / f"{video_id}_segment{b:02d}.png"
        fig.tight_layout()
        fig.savefig(path, dpi=110)
        plt.close(fig)
        paths.append(path)
    return paths
