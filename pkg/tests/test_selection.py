import numpy as np
import pytest

from helpers import masked_oracle_worst_diff
from vtprune.model import attention_over_cache, prefill
from vtprune.rng import SplitMix64
from vtprune.selection import (
    compress_and_continue,
    extract_qv_attention,
    score_visual_tokens,
    select_top_alpha,
)


def _visual(seed, n, c=32):
    return SplitMix64(seed).normal(n * c).reshape(n, c).astype(np.float32)


def _prefilled(tiny_model, seed=1, n_visual=8, n_question=4, m_layer=2):
    ids = SplitMix64(seed + 100).integers(n_question, tiny_model.spec.vocab)
    return prefill(tiny_model, _visual(seed, n_visual), ids, m_layer=m_layer)


def test_extract_slice_index_arithmetic():
    attn = np.arange(9.0).reshape(3, 3)
    block = extract_qv_attention(attn, n_visual=2)
    assert block.shape == (1, 2)
    np.testing.assert_array_equal(block, [[6.0, 7.0]])


def test_extract_on_real_prefill(tiny_model):
    pre = _prefilled(tiny_model)
    block = extract_qv_attention(pre.attention_at_m, pre.n_visual)
    assert block.shape == (4, 8)
    assert (block >= 0.0).all()
    np.testing.assert_allclose(pre.attention_at_m.sum(axis=1), 1.0, atol=1e-6)


def test_extract_empty_visual():
    attn = np.eye(3)
    assert extract_qv_attention(attn, 0).shape == (3, 0)
    with pytest.raises(ValueError):
        extract_qv_attention(np.zeros((2, 3)), 1)
    with pytest.raises(ValueError):
        extract_qv_attention(np.eye(3), 4)


def test_score_is_columnwise_max():
    a_qv = np.array([[0.1, 0.7], [0.4, 0.0], [0.2, 0.3]])
    np.testing.assert_array_equal(score_visual_tokens(a_qv), [0.4, 0.7])


def test_score_single_question_row_identity():
    row = np.array([[0.3, 0.1, 0.6]])
    np.testing.assert_array_equal(score_visual_tokens(row), row[0])


def test_score_invariant_to_question_permutation():
    a_qv = SplitMix64(2).uniform(12).reshape(4, 3)
    perm = SplitMix64(3).permutation(4)
    np.testing.assert_array_equal(score_visual_tokens(a_qv), score_visual_tokens(a_qv[perm]))


def test_score_rejects_empty():
    with pytest.raises(ValueError):
        score_visual_tokens(np.empty((3, 0)))


def test_select_tie_break_by_lower_index():
    sel = select_top_alpha(np.array([0.9, 0.1, 0.5, 0.5]), alpha=0.5)
    assert sel.keep_count == 2
    assert sel.indices.tolist() == [0, 2]


def test_select_alpha_one_keeps_all():
    sel = select_top_alpha(np.array([0.2, 0.9, 0.4]), alpha=1.0)
    assert sel.indices.tolist() == [0, 1, 2]


def test_select_keep_count_default_ratio():
    sel = select_top_alpha(SplitMix64(1).uniform(10), alpha=0.4)
    assert sel.keep_count == 4
    assert len(sel.indices) == 4


def test_select_min_kept_score_dominates_dropped():
    scores = SplitMix64(5).uniform(50)
    sel = select_top_alpha(scores, alpha=0.3)
    kept = set(sel.indices.tolist())
    dropped = [scores[i] for i in range(50) if i not in kept]
    assert min(scores[i] for i in kept) >= max(dropped)


def test_select_rejects_bad_inputs():
    with pytest.raises(ValueError):
        select_top_alpha(np.array([0.1]), alpha=0.0)
    with pytest.raises(ValueError):
        select_top_alpha(np.array([]), alpha=0.5)


def test_monotone_transform_leaves_selection_unchanged():
    for seed in range(20):
        scores = SplitMix64(seed).uniform(30)
        base = select_top_alpha(scores, alpha=0.4).indices
        for transform in (lambda x: 3.0 * x + 1.0, np.exp, lambda x: x ** 3):
            same = select_top_alpha(transform(scores), alpha=0.4).indices
            assert np.array_equal(base, same)


def test_alpha_nesting():
    for seed in range(20):
        scores = SplitMix64(seed).uniform(23)
        alphas = sorted(SplitMix64(seed + 999).uniform(4, 0.05, 1.0).tolist())
        previous = set()
        for alpha in alphas:
            current = set(select_top_alpha(scores, alpha).indices.tolist())
            assert previous <= current
            previous = current


def test_compress_alpha_one_is_noop(tiny_model):
    pre = _prefilled(tiny_model, seed=7)
    sel = select_top_alpha(score_visual_tokens(extract_qv_attention(pre.attention_at_m, 8)), 1.0)
    compressed, final_hidden = compress_and_continue(pre, sel, tiny_model, 2)
    assert np.abs(final_hidden - pre.hidden[-1]).max() <= 1e-5
    assert compressed.caches.length() == pre.seq_len


def test_compress_cache_length_contract(tiny_model):
    pre = _prefilled(tiny_model, seed=8)
    sel = select_top_alpha(score_visual_tokens(extract_qv_attention(pre.attention_at_m, 8)), 0.25)
    compressed, _ = compress_and_continue(pre, sel, tiny_model, 2)
    expected = sel.keep_count + pre.n_question
    assert compressed.caches.length() == expected
    for layer in compressed.caches.layers:
        assert len(layer) == expected


def test_compressed_rows_are_bit_identical_copies(tiny_model):
    pre = _prefilled(tiny_model, seed=9)
    sel = select_top_alpha(score_visual_tokens(extract_qv_attention(pre.attention_at_m, 8)), 0.5)
    compressed, _ = compress_and_continue(pre, sel, tiny_model, 2)
    kept = np.concatenate([sel.indices, np.arange(8, 12)])
    for l in range(2):  # layers <= M
        full = pre.caches.layers[l]
        comp = compressed.caches.layers[l]
        assert np.array_equal(comp.keys, full.keys[kept])
        assert np.array_equal(comp.values, full.values[kept])


def test_compress_rejects_out_of_range_selection(tiny_model):
    pre = _prefilled(tiny_model, seed=10)
    sel = select_top_alpha(score_visual_tokens(extract_qv_attention(pre.attention_at_m, 8)), 0.5)
    bad = type(sel)(indices=np.array([99]), scores=sel.scores, alpha=sel.alpha, keep_count=1)
    with pytest.raises(IndexError):
        compress_and_continue(pre, bad, tiny_model, 2)


def test_compress_requires_matching_capture_layer(tiny_model):
    pre = _prefilled(tiny_model, seed=11, m_layer=2)
    sel = select_top_alpha(score_visual_tokens(extract_qv_attention(pre.attention_at_m, 8)), 0.5)
    with pytest.raises(ValueError):
        compress_and_continue(pre, sel, tiny_model, 3)


def test_masked_full_cache_oracle(tiny_model):
    pre = _prefilled(tiny_model, seed=12)
    sel = select_top_alpha(score_visual_tokens(extract_qv_attention(pre.attention_at_m, 8)), 0.4)
    compressed, _ = compress_and_continue(pre, sel, tiny_model, 2)
    tokens = SplitMix64(77).integers(10, tiny_model.spec.vocab)
    assert masked_oracle_worst_diff(tiny_model, pre, sel, compressed, tokens) <= 1e-6


def test_renormalization_identity(tiny_model):
    # softmax over the kept columns == softmax of full scores with -inf holes
    pre = _prefilled(tiny_model, seed=13)
    sel = select_top_alpha(score_visual_tokens(extract_qv_attention(pre.attention_at_m, 8)), 0.4)
    compressed, _ = compress_and_continue(pre, sel, tiny_model, 2)
    kept = np.concatenate([sel.indices, np.arange(8, 12)])
    x = SplitMix64(14).normal(tiny_model.spec.channels)
    for l in range(1, 3):
        full = pre.caches.layers[l - 1]
        mask = np.full(pre.seq_len, -np.inf)
        mask[kept] = 0.0
        masked = attention_over_cache(tiny_model, l, x, full.keys, full.values, extra_scores=mask)
        sub = attention_over_cache(tiny_model, l, x,
                                   compressed.caches.layers[l - 1].keys,
                                   compressed.caches.layers[l - 1].values)
        assert np.abs(masked - sub).max() <= 1e-12
