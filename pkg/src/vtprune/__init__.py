"""vtprune: video token merging, attention-guided selection, and KV-cache compression.

The package is organised as a numpy library plus a thin CLI:

- grids:      token containers, pruning config, PVTG file I/O
- rng:        SplitMix64-based deterministic random streams
- clustering: density peaks clustering with kNN density estimates
- merge:      temporal segmentation, static/dynamic split, token merging
- model:      small deterministic decoder-only transformer with KV caches
- selection:  attention-guided token selection and cache compression
- metrics:    retained-ratio and analytic FLOPs accounting
- synth:      seeded synthetic corpora with planted ground truth
- pipeline:   per-video end-to-end runs
- viz:        provenance back-projection and heatmap rendering
- cli:        generate / run / visualize commands
"""

__version__ = "0.1.0"

from .clustering import ClusterResult, cluster_means, dpc_knn
from .grids import (
    BadMagicError,
    BadVersionError,
    NonFiniteValueError,
    Provenance,
    PruneConfig,
    TokenGrid,
    TokenGridError,
    TruncatedFileError,
    load_token_grid,
    round_half_away,
    save_token_grid,
)
from .merge import (
    MergedTokenSet,
    SegmentPartition,
    SegmentTokens,
    StaticMask,
    compute_static_mask,
    merge_pipeline,
    merge_spatial,
    merge_temporal,
    segment_frames,
)
from .metrics import EfficiencyReport, build_report, flops_estimate, layer_cost, retained_ratio
from .model import (
    DecodeStep,
    KVCaches,
    LayerCache,
    Model,
    ModelSpec,
    PrefillResult,
    attention_over_cache,
    decode_greedy,
    decode_step,
    init_model,
    logits,
    prefill,
)
from .pipeline import VideoRun, make_question_ids, run_video
from .rng import SplitMix64, derive_seed
from .selection import (
    CompressedCaches,
    SelectionSet,
    compress_and_continue,
    extract_qv_attention,
    score_visual_tokens,
    select_top_alpha,
)
from .synth import GroundTruth, SynthSpec, generate, load_ground_truth, write_video
from .viz import BackProjection, backproject, backproject_records, normalize_scores

__all__ = [name for name in dir() if not name.startswith("_")]
