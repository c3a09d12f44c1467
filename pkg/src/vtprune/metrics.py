"""Retained-ratio and analytic FLOPs accounting.

Wall-clock timing is deliberately out of scope; efficiency is reported as
exact token counts plus an analytic per-layer cost model

    cost(n) = 4*n*C^2 + 2*n^2*C + 16*n*C^2

(attention projections, score/value matmuls, and a 4x FFN).  The baseline
runs all L layers on the raw token count, the pruned pipeline runs M layers
on the merged count and the remaining L - M layers on the selected count.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

COST_MODEL = "per_layer_flops(n) = 4*n*C^2 + 2*n^2*C + 16*n*C^2; baseline = L*cost(N_q+raw); pruned = M*cost(N_q+merged) + (L-M)*cost(N_q+selected)"


@dataclass(frozen=True)
class EfficiencyReport:
    video_id: str
    raw_tokens: int
    merged_tokens: int
    selected_tokens: int
    n_question: int
    retained_ratio: float
    flops_baseline: int
    flops_pruned: int
    flops_multiplier: float
    stage_counts: dict

    def __post_init__(self):
        if not self.selected_tokens <= self.merged_tokens <= self.raw_tokens:
            raise ValueError(
                f"inconsistent counts: selected={self.selected_tokens} "
                f"merged={self.merged_tokens} raw={self.raw_tokens}"
            )

    def to_dict(self) -> dict:
        return asdict(self)


def layer_cost(n: int, channels: int) -> int:
    """Analytic FLOPs of one transformer layer over n tokens (exact integer)."""
    return 4 * n * channels ** 2 + 2 * n ** 2 * channels + 16 * n * channels ** 2


def flops_estimate(layers: int, m_layer: int, channels: int, n_question: int,
                   raw: int, merged: int, selected: int) -> tuple[int, int, float]:
    """Baseline vs pruned FLOPs and their ratio.

    m_layer may be 0 to model the limiting case of pruning before any layer
    runs; it must stay below the layer count.
    """
    if not 0 <= m_layer < layers:
        raise ValueError(f"m_layer must be in [0, {layers}), got {m_layer}")
    baseline = layers * layer_cost(n_question + raw, channels)
    pruned = (
        m_layer * layer_cost(n_question + merged, channels)
        + (layers - m_layer) * layer_cost(n_question + selected, channels)
    )
    return baseline, pruned, pruned / baseline


def retained_ratio(selected_tokens: int, raw_tokens: int) -> float:
    """Share of raw visual tokens that survive selection."""
    if raw_tokens < 1:
        raise ValueError("raw token count must be positive")
    return selected_tokens / raw_tokens


def build_report(video_id: str, raw: int, merged: int, selected: int,
                 n_question: int, layers: int, m_layer: int, channels: int,
                 extra_stage_counts: dict | None = None) -> EfficiencyReport:
    baseline, pruned, multiplier = flops_estimate(layers, m_layer, channels, n_question, raw, merged, selected)
    stages = {"raw": raw, "merged": merged, "selected": selected}
    if extra_stage_counts:
        stages.update(extra_stage_counts)
    return EfficiencyReport(
        video_id=video_id,
        raw_tokens=raw,
        merged_tokens=merged,
        selected_tokens=selected,
        n_question=n_question,
        retained_ratio=retained_ratio(selected, raw),
        flops_baseline=baseline,
        flops_pruned=pruned,
        flops_multiplier=multiplier,
        stage_counts=stages,
    )


_CSV_FIELDS = [
    "video_id", "raw_tokens", "merged_tokens", "selected_tokens", "n_question",
    "retained_ratio", "flops_baseline", "flops_pruned", "flops_multiplier",
]


def write_reports_json(reports: list[EfficiencyReport], path: str | Path) -> None:
    payload = {"cost_model": COST_MODEL, "reports": [r.to_dict() for r in reports]}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_reports_csv(reports: list[EfficiencyReport], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for r in reports:
            writer.writerow({k: getattr(r, k) for k in _CSV_FIELDS})
