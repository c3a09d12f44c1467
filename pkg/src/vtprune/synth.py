"""Deterministic synthetic video-token generator with planted ground truth.

Each video is built from equal-length scenes.  Per scene, a seeded subset
of spatial locations is planted static: those get a fixed base vector plus
small per-frame jitter, and the construction enforces (by deterministically
shrinking the jitter) that their within-scene pairwise cosines stay >= 0.95
whenever static_noise <= 0.05.  The remaining locations are planted
dynamic: every frame gets a fresh random direction of norm
dynamic_drift * sqrt(C), redrawn deterministically until all within-scene
pairwise cosines are <= 0.5.  Static bases additionally carry a large
scene-identity component along mutually orthogonal axes, sized from
worst-case bounds so the smallest inter-scene frame-feature distance
exceeds the largest intra-scene one by at least 5x; the generator verifies
this before returning.  With zero planted static locations there is no
scene carrier and segment recovery is not guaranteed.

Everything is drawn from per-(scene, location) SplitMix64 substreams, so
local redraws never disturb other draws and equal seeds give byte-identical
grids.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import TokenGrid, round_half_away, save_token_grid
from .rng import SplitMix64, derive_seed

STATIC_COS_FLOOR = 0.95   # enforced when static_noise <= 0.05
DYNAMIC_COS_CEIL = 0.5
SEPARATION_FACTOR = 5.0


@dataclass(frozen=True)
class SynthSpec:
    frames: int = 16
    tokens_per_frame: int = 64
    channels: int = 32
    n_scenes: int = 4
    static_fraction: float = 0.75
    static_noise: float = 0.02
    dynamic_drift: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.frames < 1 or self.tokens_per_frame < 1:
            raise ValueError("frames and tokens_per_frame must be >= 1")
        if self.n_scenes < 1 or self.frames % self.n_scenes != 0:
            raise ValueError(f"n_scenes ({self.n_scenes}) must divide frames ({self.frames})")
        if self.channels < 8:
            raise ValueError("need at least 8 channels for the cosine margins to be enforceable")
        if self.n_scenes > self.channels:
            raise ValueError("n_scenes cannot exceed channels (one identity axis per scene)")
        if not 0.0 <= self.static_fraction <= 1.0:
            raise ValueError(f"static_fraction must be in [0, 1], got {self.static_fraction}")
        if self.static_noise < 0.0 or self.dynamic_drift < 0.0:
            raise ValueError("noise levels must be non-negative")

    @property
    def scene_length(self) -> int:
        return self.frames // self.n_scenes

    @property
    def static_per_scene(self) -> int:
        return round_half_away(self.static_fraction * self.tokens_per_frame)


@dataclass(frozen=True)
class GroundTruth:
    scene_bounds: tuple[tuple[int, int], ...]
    static_masks: tuple[np.ndarray, ...]  # bool (N_v,) per scene

    def to_json_dict(self) -> dict:
        return {
            "scene_bounds": [list(b) for b in self.scene_bounds],
            "static_masks": [[bool(v) for v in m] for m in self.static_masks],
        }


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return rows / norms


def _pairwise_cos(vectors: np.ndarray) -> np.ndarray:
    unit = _unit_rows(vectors)
    return unit @ unit.T


def _min_offdiag_cos(vectors: np.ndarray) -> float:
    cos = _pairwise_cos(vectors)
    n = len(vectors)
    return float(cos[np.triu_indices(n, k=1)].min()) if n > 1 else 1.0


def _static_location(stream: SplitMix64, base: np.ndarray, length: int, sigma: float, c: int) -> np.ndarray:
    """Frames of one static location: base + jitter, shrunk until the cosine floor holds."""
    if length == 1 or sigma == 0.0:
        jitter = np.zeros((length, c))
    else:
        jitter = _unit_rows(stream.normal(length * c).reshape(length, c)) * (sigma * math.sqrt(c))
    frames = base[None, :] + jitter
    if sigma <= 0.05:
        while length > 1 and _min_offdiag_cos(frames) < STATIC_COS_FLOOR:
            jitter *= 0.5
            frames = base[None, :] + jitter
    return frames


def _dynamic_location(stream: SplitMix64, length: int, drift: float, c: int) -> np.ndarray:
    """Frames of one dynamic location: fresh directions, redrawn until the cosine ceiling holds."""
    scale = drift * math.sqrt(c)
    frames = _unit_rows(stream.normal(length * c).reshape(length, c)) * scale
    if scale == 0.0 or length == 1:
        return frames
    for _ in range(1000):
        cos = _pairwise_cos(frames)
        np.fill_diagonal(cos, 0.0)
        worst = int(np.argmax(cos.max(axis=1)))
        if cos[worst].max() <= DYNAMIC_COS_CEIL:
            return frames
        frames[worst] = _unit_rows(stream.normal(c).reshape(1, c))[0] * scale
    raise RuntimeError("could not satisfy the dynamic cosine ceiling (channels too small?)")


def _scene_amplitude(spec: SynthSpec) -> float:
    """Scene-identity amplitude from worst-case bounds so inter >= 5x intra."""
    n_s = spec.static_per_scene
    if n_s == 0 or spec.n_scenes == 1:
        return 0.0
    root_c = math.sqrt(spec.channels)
    n_d = spec.tokens_per_frame - n_s
    dev_max = root_c * (n_s * spec.static_noise + n_d * spec.dynamic_drift) / spec.tokens_per_frame
    needed = ((SEPARATION_FACTOR + 1.0) * 2.0 * dev_max + 2.0 * root_c) / math.sqrt(2.0)
    return 2.0 * needed * spec.tokens_per_frame / n_s


def generate(spec: SynthSpec) -> tuple[TokenGrid, GroundTruth]:
    """Build one video and its planted ground truth (scene bounds + static masks)."""
    t, n_v, c = spec.frames, spec.tokens_per_frame, spec.channels
    length = spec.scene_length
    amplitude = _scene_amplitude(spec)
    data = np.empty((t, n_v, c), dtype=np.float64)
    bounds = []
    masks = []

    for s in range(spec.n_scenes):
        start = s * length
        bounds.append((start, start + length - 1))

        perm = SplitMix64(derive_seed(spec.seed, 1, s)).permutation(n_v)
        static_locs = np.sort(perm[:spec.static_per_scene])
        mask = np.zeros(n_v, dtype=bool)
        mask[static_locs] = True
        masks.append(mask)

        bases = _unit_rows(
            SplitMix64(derive_seed(spec.seed, 2, s)).normal(n_v * c).reshape(n_v, c)
        ) * math.sqrt(c)
        bases[static_locs, s % c] += amplitude  # scene identity rides on the static bases

        for i in range(n_v):
            if mask[i]:
                stream = SplitMix64(derive_seed(spec.seed, 3, s, i))
                data[start:start + length, i, :] = _static_location(stream, bases[i], length, spec.static_noise, c)
            else:
                stream = SplitMix64(derive_seed(spec.seed, 4, s, i))
                data[start:start + length, i, :] = _dynamic_location(stream, length, spec.dynamic_drift, c)

    grid = TokenGrid(data.astype(np.float32))
    _verify_separation(grid, bounds, spec)
    return grid, GroundTruth(tuple(bounds), tuple(masks))


def _verify_separation(grid: TokenGrid, bounds: list[tuple[int, int]], spec: SynthSpec) -> None:
    if spec.n_scenes == 1 or spec.static_per_scene == 0:
        return
    feats = grid.data.astype(np.float64).mean(axis=1)
    diffs = np.linalg.norm(feats[:, None, :] - feats[None, :, :], axis=2)
    scene_of = np.repeat(np.arange(spec.n_scenes), spec.scene_length)
    same = scene_of[:, None] == scene_of[None, :]
    np.fill_diagonal(same, False)
    intra = diffs[same].max() if same.any() else 0.0
    inter = diffs[~same & ~np.eye(len(feats), dtype=bool)].min()
    if inter < SEPARATION_FACTOR * intra:
        raise RuntimeError(
            f"scene separation check failed: inter {inter:.3g} < {SEPARATION_FACTOR} * intra {intra:.3g}"
        )


def write_video(spec: SynthSpec, grid_path: str | Path, truth_path: str | Path) -> tuple[TokenGrid, GroundTruth]:
    """Generate and persist one video as PVTG plus a JSON ground-truth sidecar."""
    grid, truth = generate(spec)
    save_token_grid(grid, grid_path)
    payload = {
        "spec": {
            "frames": spec.frames,
            "tokens_per_frame": spec.tokens_per_frame,
            "channels": spec.channels,
            "n_scenes": spec.n_scenes,
            "static_fraction": spec.static_fraction,
            "static_noise": spec.static_noise,
            "dynamic_drift": spec.dynamic_drift,
            "seed": spec.seed,
        },
        **truth.to_json_dict(),
    }
    Path(truth_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return grid, truth


def load_ground_truth(path: str | Path) -> GroundTruth:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return GroundTruth(
        scene_bounds=tuple(tuple(b) for b in payload["scene_bounds"]),
        static_masks=tuple(np.asarray(m, dtype=bool) for m in payload["static_masks"]),
    )
