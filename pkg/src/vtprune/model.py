"""A small deterministic decoder-only transformer used as the LLM stand-in.

The model is pure numpy, runs in float64, and is fully specified: seeded
uniform(-0.02, 0.02) weight matrices, parameter-free layer norm, exact GELU,
sinusoidal absolute positional encodings, pre-norm residual blocks, and
scaled dot-product attention with a causal mask (masked entries are exactly
zero after softmax).  Prefill processes visual tokens followed by question
tokens, stores per-layer KV caches, and captures the head-reduced attention
matrix at a chosen layer; decode steps append one KV row per layer.

Positions are absolute: rows retained after pruning keep their original
positional encodings, and generated tokens continue counting from the
original prompt length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .rng import SplitMix64, derive_seed

_LN_EPS = 1e-5
_NEG_INF = -np.inf


@dataclass(frozen=True)
class ModelSpec:
    layers: int = 12
    heads: int = 4
    channels: int = 64
    ffn_multiplier: int = 4
    vocab: int = 256
    max_seq: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.layers < 2:
            raise ValueError(f"need at least 2 layers, got {self.layers}")
        if self.channels % self.heads != 0:
            raise ValueError(f"channels ({self.channels}) must divide evenly over heads ({self.heads})")
        if self.vocab < 2 or self.max_seq < 1:
            raise ValueError("vocab must be >= 2 and max_seq >= 1")

    @property
    def head_dim(self) -> int:
        return self.channels // self.heads


@dataclass(frozen=True)
class LayerWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w1: np.ndarray
    w2: np.ndarray


@dataclass(frozen=True)
class Model:
    spec: ModelSpec
    embedding: np.ndarray            # (V, C)
    layers: tuple[LayerWeights, ...]
    w_out: np.ndarray                # (C, V)
    pos_encoding: np.ndarray         # (max_seq, C)
    _projectors: dict = field(default_factory=dict, repr=False)

    def visual_projector(self, c_in: int) -> np.ndarray | None:
        """Projection from input channel count to model width; identity when equal."""
        c = self.spec.channels
        if c_in == c:
            return None
        if c_in not in self._projectors:
            stream = SplitMix64(derive_seed(self.spec.seed, 0x7650, c_in))
            self._projectors[c_in] = stream.uniform(c_in * c, -0.02, 0.02).reshape(c_in, c)
        return self._projectors[c_in]


class LayerCache:
    """Per-layer key/value rows; rows are append-only during decoding."""

    def __init__(self, keys: np.ndarray, values: np.ndarray):
        if keys.shape != values.shape:
            raise ValueError("keys and values must have equal shapes")
        self.keys = keys
        self.values = values

    def __len__(self) -> int:
        return self.keys.shape[0]

    def append(self, k_row: np.ndarray, v_row: np.ndarray) -> None:
        self.keys = np.concatenate([self.keys, k_row.reshape(1, -1)])
        self.values = np.concatenate([self.values, v_row.reshape(1, -1)])

    def copy(self) -> "LayerCache":
        return LayerCache(self.keys.copy(), self.values.copy())


class KVCaches:
    """Cache set of one decoding session: L layer caches plus the next absolute position."""

    def __init__(self, layers: list[LayerCache], next_pos: int):
        self.layers = layers
        self.next_pos = next_pos

    def length(self) -> int:
        sizes = {len(layer) for layer in self.layers}
        if len(sizes) != 1:
            raise ValueError(f"cache length mismatch across layers: {sorted(sizes)}")
        return sizes.pop()

    def copy(self) -> "KVCaches":
        return KVCaches([layer.copy() for layer in self.layers], self.next_pos)

    @classmethod
    def empty(cls, model: Model) -> "KVCaches":
        c = model.spec.channels
        return cls(
            [LayerCache(np.empty((0, c)), np.empty((0, c))) for _ in range(model.spec.layers)],
            next_pos=0,
        )


@dataclass(frozen=True)
class PrefillResult:
    """Hidden states at every layer boundary, caches, and the captured attention map."""

    hidden: tuple[np.ndarray, ...]   # L+1 arrays of shape (n, C)
    caches: KVCaches
    attention_at_m: np.ndarray       # (n, n) head-reduced post-softmax attention
    n_visual: int
    n_question: int
    m_layer: int

    @property
    def seq_len(self) -> int:
        return self.n_visual + self.n_question


@dataclass(frozen=True)
class DecodeStep:
    logits: np.ndarray                       # (V,)
    position: int
    layer_inputs: tuple[np.ndarray, ...] = ()    # residual stream at each layer entry (when recorded)
    attn_outputs: tuple[np.ndarray, ...] = ()    # attention block output per layer (when recorded)


def init_model(spec: ModelSpec) -> Model:
    """Build a model with seeded uniform(-0.02, 0.02) weights; same seed, same bits."""
    c, v = spec.channels, spec.vocab
    stream = SplitMix64(derive_seed(spec.seed, 0x3117))

    def draw(rows, cols):
        return stream.uniform(rows * cols, -0.02, 0.02).reshape(rows, cols)

    embedding = draw(v, c)
    layers = []
    hidden = spec.ffn_multiplier * c
    for _ in range(spec.layers):
        layers.append(LayerWeights(
            wq=draw(c, c), wk=draw(c, c), wv=draw(c, c), wo=draw(c, c),
            w1=draw(c, hidden), w2=draw(hidden, c),
        ))
    w_out = draw(c, v)

    pos = np.arange(spec.max_seq, dtype=np.float64)[:, None]
    dim = np.arange(c, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * (dim // 2)) / c)
    pe = np.where(dim % 2 == 0, np.sin(angle), np.cos(angle))

    return Model(spec=spec, embedding=embedding, layers=tuple(layers), w_out=w_out, pos_encoding=pe)


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + _LN_EPS)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    n, c = x.shape
    return x.reshape(n, heads, c // heads).transpose(1, 0, 2)  # (H, n, dh)


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _reduce_heads(attn: np.ndarray, mode: str) -> np.ndarray:
    if mode == "mean":
        return attn.mean(axis=0)
    if mode == "max":
        return attn.max(axis=0)
    raise ValueError(f"unknown head reduction {mode!r}")


def embed_sequence(model: Model, visual_tokens: np.ndarray | None, question_ids: np.ndarray) -> np.ndarray:
    """Embed visual tokens (projected) followed by question tokens; no positions yet."""
    parts = []
    if visual_tokens is not None and len(visual_tokens) > 0:
        vis = np.asarray(visual_tokens, dtype=np.float64)
        proj = model.visual_projector(vis.shape[1])
        parts.append(vis if proj is None else vis @ proj)
    ids = np.asarray(question_ids, dtype=np.int64)
    if ids.size:
        if ids.min() < 0 or ids.max() >= model.spec.vocab:
            raise ValueError("question token id out of vocabulary range")
        parts.append(model.embedding[ids])
    if not parts:
        raise ValueError("empty input sequence")
    return np.concatenate(parts, axis=0)


def forward_layers(
    model: Model,
    x: np.ndarray,
    first_layer: int,
    last_layer: int,
    capture_layer: int = 0,
    head_reduce: str = "mean",
):
    """Run layers first_layer..last_layer (1-based, inclusive) over a full sequence.

    Returns the per-boundary hidden states, the (k, v) rows per layer, and
    the captured head-reduced attention matrix (or None).
    """
    spec = model.spec
    n = x.shape[0]
    causal = np.triu(np.full((n, n), _NEG_INF), k=1)
    scale = 1.0 / math.sqrt(spec.head_dim)

    hidden = [x]
    kv_rows = []
    captured = None
    for l in range(first_layer, last_layer + 1):
        w = model.layers[l - 1]
        attn_in = _layer_norm(x)
        q = _split_heads(attn_in @ w.wq, spec.heads)
        k_flat = attn_in @ w.wk
        v_flat = attn_in @ w.wv
        k = _split_heads(k_flat, spec.heads)
        v = _split_heads(v_flat, spec.heads)
        attn = _softmax(q @ k.transpose(0, 2, 1) * scale + causal)
        if l == capture_layer:
            captured = _reduce_heads(attn, head_reduce)
        ctx = (attn @ v).transpose(1, 0, 2).reshape(n, spec.channels)
        x = x + ctx @ w.wo
        x = x + _gelu(_layer_norm(x) @ w.w1) @ w.w2
        hidden.append(x)
        kv_rows.append((k_flat, v_flat))
    return hidden, kv_rows, captured


def prefill(
    model: Model,
    visual_tokens: np.ndarray | None,
    question_ids: np.ndarray,
    m_layer: int,
    head_reduce: str = "mean",
) -> PrefillResult:
    """Full forward pass over visual tokens then question tokens.

    Populates all L layer caches and captures the post-softmax attention at
    layer m_layer, reduced over heads ("mean" by default, "max" optional).
    """
    spec = model.spec
    if not 1 <= m_layer <= spec.layers:
        raise ValueError(f"m_layer must be in [1, {spec.layers}], got {m_layer}")
    x = embed_sequence(model, visual_tokens, question_ids)
    n = x.shape[0]
    n_question = len(question_ids)
    n_visual = n - n_question
    if n > spec.max_seq:
        raise ValueError(f"sequence length {n} exceeds max_seq {spec.max_seq}")
    x = x + model.pos_encoding[:n]

    hidden, kv_rows, captured = forward_layers(
        model, x, 1, spec.layers, capture_layer=m_layer, head_reduce=head_reduce,
    )
    caches = KVCaches([LayerCache(k, v) for k, v in kv_rows], next_pos=n)
    return PrefillResult(
        hidden=tuple(hidden),
        caches=caches,
        attention_at_m=captured,
        n_visual=n_visual,
        n_question=n_question,
        m_layer=m_layer,
    )


def attention_over_cache(model: Model, layer_index: int, x_row: np.ndarray, keys: np.ndarray,
                         values: np.ndarray, extra_scores: np.ndarray | None = None) -> np.ndarray:
    """One query row attending over cached keys/values at a given layer (1-based).

    extra_scores, when given, is added to the raw attention scores per
    cached row (used to mask positions to -inf).  Returns the attention
    block output after the output projection.
    """
    spec = model.spec
    w = model.layers[layer_index - 1]
    attn_in = _layer_norm(x_row.reshape(1, -1))
    q = _split_heads(attn_in @ w.wq, spec.heads)           # (H, 1, dh)
    k_all = _split_heads(keys, spec.heads)
    v_all = _split_heads(values, spec.heads)
    scores = q @ k_all.transpose(0, 2, 1) / math.sqrt(spec.head_dim)  # (H, 1, n)
    if extra_scores is not None:
        scores = scores + extra_scores.reshape(1, 1, -1)
    attn = _softmax(scores)
    ctx = (attn @ v_all).transpose(1, 0, 2).reshape(1, spec.channels)
    return (ctx @ w.wo).ravel()


def decode_step(model: Model, caches: KVCaches, token_id: int, record_attention: bool = False) -> DecodeStep:
    """One autoregressive step: append a KV row per layer, return next-token logits."""
    spec = model.spec
    caches.length()  # raises on inconsistent layer lengths
    pos = caches.next_pos
    if pos >= spec.max_seq:
        raise ValueError(f"decode position {pos} exceeds max_seq {spec.max_seq}")
    if not 0 <= token_id < spec.vocab:
        raise ValueError(f"token id {token_id} out of range")

    x = model.embedding[token_id] + model.pos_encoding[pos]
    layer_inputs = []
    attn_outputs = []
    for l in range(1, spec.layers + 1):
        if record_attention:
            layer_inputs.append(x.copy())
        cache = caches.layers[l - 1]
        attn_in = _layer_norm(x.reshape(1, -1))
        k_new = (attn_in @ model.layers[l - 1].wk).ravel()
        v_new = (attn_in @ model.layers[l - 1].wv).ravel()
        cache.append(k_new, v_new)
        ctx = attention_over_cache(model, l, x, cache.keys, cache.values)
        x = x + ctx
        if record_attention:
            attn_outputs.append(ctx.copy())
        x = x + (_gelu(_layer_norm(x.reshape(1, -1)) @ model.layers[l - 1].w1) @ model.layers[l - 1].w2).ravel()
    caches.next_pos = pos + 1

    return DecodeStep(
        logits=logits(model, x.reshape(1, -1)).ravel(),
        position=pos,
        layer_inputs=tuple(layer_inputs),
        attn_outputs=tuple(attn_outputs),
    )


def logits(model: Model, hidden_rows: np.ndarray) -> np.ndarray:
    """Vocabulary logits for residual-stream rows (final layer norm then unembedding)."""
    return _layer_norm(np.asarray(hidden_rows, dtype=np.float64)) @ model.w_out


def decode_greedy(model: Model, caches: KVCaches, first_token: int, steps: int) -> list[int]:
    """Greedy decoding loop; ties resolve to the lowest token id."""
    out = []
    token = first_token
    for _ in range(steps):
        step = decode_step(model, caches, token)
        token = int(np.argmax(step.logits))
        out.append(token)
    return out
