"""Core token containers, pruning configuration, and PVTG file I/O.

A token grid is the raw per-frame visual token tensor of one video:
``(frames, tokens_per_frame, channels)`` float32, frame-major.  Grids are
stored on disk in the PVTG format: magic ``PVTG``, u32 version (1), u32
frames, u32 tokens_per_frame, u32 channels (all little-endian), then the
payload as little-endian float32, frame-major.  The format is fixed so
that equal grids always produce byte-identical files.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PVTG_MAGIC = b"PVTG"
PVTG_VERSION = 1
_HEADER = struct.Struct("<4sIIII")  # magic, version, T, N_v, C


class TokenGridError(Exception):
    """Base class for token grid loading/validation failures."""


class BadMagicError(TokenGridError):
    """File does not start with the PVTG magic bytes."""


class BadVersionError(TokenGridError):
    """Unsupported PVTG format version."""


class TruncatedFileError(TokenGridError):
    """Header or payload is shorter than the declared dimensions require."""


class NonFiniteValueError(TokenGridError):
    """Grid payload contains NaN or infinity."""


def round_half_away(x: float) -> int:
    """Round with halves away from zero; used wherever a ratio produces a count."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


@dataclass(frozen=True)
class TokenGrid:
    """Per-frame visual tokens of one video, shape (T, N_v, C) float32."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise TokenGridError(f"token grid must be 3-D (T, N_v, C), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise TokenGridError(f"all grid dimensions must be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteValueError("token grid contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def tokens_per_frame(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def raw_tokens(self) -> int:
        return self.frames * self.tokens_per_frame


@dataclass(frozen=True)
class PruneConfig:
    """Pruning hyperparameters.

    tau is the static-similarity threshold (values > 1 disable temporal
    merging entirely, every location becomes dynamic).  gamma scales the
    temporal cluster count, beta the spatial cluster counts, alpha the
    post-attention keep ratio.  m_layer is the 1-based transformer layer
    whose attention drives selection and must stay below the attached
    model's layer count.
    """

    tau: float = 0.8
    gamma: float = 0.25
    beta: float = 0.5
    alpha: float = 0.4
    m_layer: int = 10
    k_knn: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.tau >= 0.0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        for name in ("gamma", "beta", "alpha"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if self.m_layer < 1:
            raise ValueError(f"m_layer must be >= 1, got {self.m_layer}")
        if self.k_knn < 1:
            raise ValueError(f"k_knn must be >= 1, got {self.k_knn}")


@dataclass(frozen=True)
class Provenance:
    """Origin record of one merged token.

    Static-merged tokens cover every frame of their segment at each member
    location; dynamic-merged tokens cover exactly one frame.  The member
    cells of the record are the cross product source_frames x
    source_locations.
    """

    segment_id: int
    source_frames: tuple[int, ...]
    source_locations: tuple[int, ...]
    kind: str  # "static-merged" | "dynamic-merged"

    def __post_init__(self):
        if len(self.source_frames) == 0:
            raise ValueError("provenance needs at least one source frame")
        if len(self.source_locations) == 0:
            raise ValueError("provenance needs at least one source location")
        if self.kind not in ("static-merged", "dynamic-merged"):
            raise ValueError(f"unknown provenance kind {self.kind!r}")
        if self.kind == "dynamic-merged" and len(self.source_frames) != 1:
            raise ValueError("dynamic-merged tokens come from exactly one frame")

    @property
    def member_count(self) -> int:
        return len(self.source_frames) * len(self.source_locations)


def save_token_grid(grid: TokenGrid, path: str | Path) -> None:
    """Write a grid as PVTG. Equal grids produce byte-identical files."""
    data = np.ascontiguousarray(grid.data, dtype=np.float32)
    if not np.isfinite(data).all():
        raise NonFiniteValueError("refusing to write non-finite token grid")
    header = _HEADER.pack(PVTG_MAGIC, PVTG_VERSION, grid.frames, grid.tokens_per_frame, grid.channels)
    payload = data.astype("<f4", copy=False).tobytes(order="C")
    Path(path).write_bytes(header + payload)


def load_token_grid(path: str | Path) -> TokenGrid:
    """Load a PVTG file, rejecting bad magic, truncation, and non-finite data."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != PVTG_MAGIC:
        raise BadMagicError(f"{path}: not a PVTG file")
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"{path}: header truncated ({len(raw)} bytes)")
    _, version, t, n_v, c = _HEADER.unpack_from(raw)
    if version != PVTG_VERSION:
        raise BadVersionError(f"{path}: unsupported PVTG version {version}")
    if min(t, n_v, c) < 1:
        raise TokenGridError(f"{path}: invalid dimensions T={t} N_v={n_v} C={c}")
    expected = t * n_v * c * 4
    body = raw[_HEADER.size:]
    if len(body) < expected:
        raise TruncatedFileError(f"{path}: payload has {len(body)} bytes, expected {expected}")
    if len(body) > expected:
        raise TokenGridError(f"{path}: {len(body) - expected} trailing bytes after payload")
    data = np.frombuffer(body, dtype="<f4").reshape(t, n_v, c)
    if not np.isfinite(data).all():
        raise NonFiniteValueError(f"{path}: payload contains non-finite values")
    return TokenGrid(data.astype(np.float32))
