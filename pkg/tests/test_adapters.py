import math

import numpy as np
import pytest

from Core.adapters import (AdapterStack, CrossAttention, InBackboneAdapters, LongRangeAdapter, ReducedFeatures,
                           ReductionBlock, ShortRangeAdapter, cross_attend, long_range_forward, reduce,
                           short_range_forward)
from Core.config import AdapterConfig, BackboneConfig
from Core.errors import ContractError, DimensionError
from Core.rng import make_rng
from Core.tensor import Tensor


def _naive_attention(q_in, k_in, v_in, params):
    c, h = params.width, params.n_heads
    d = c // h
    q, k, v = q_in @ params.w_q.data, k_in @ params.w_k.data, v_in @ params.w_v.data
    out = np.zeros((q_in.shape[0], c))
    for head in range(h):
        cols = slice(head * d, (head + 1) * d)
        for row in range(q_in.shape[0]):
            scores = np.array([q[row, cols] @ k[j, cols] / math.sqrt(d) for j in range(k_in.shape[0])])
            weights = np.exp(scores - scores.max())
            weights /= weights.sum()
            out[row, cols] = sum(w * v[j, cols] for j, w in enumerate(weights))
    return out @ params.w_o.data


@pytest.mark.parametrize("n_heads", [1, 4])
def test_cross_attention_matches_naive_loops(rng, n_heads):
    params = CrossAttention(4, n_heads, rng)
    q, k, v = rng.normal(size=(3, 4)), rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
    out = cross_attend(Tensor(q), Tensor(k), Tensor(v), params).data
    assert np.allclose(out, _naive_attention(q, k, v, params), atol=1e-10)


def test_single_key_with_identity_projections_returns_value(rng):
    params = CrossAttention(4, 1, rng)
    for w in (params.w_q, params.w_k, params.w_v, params.w_o):
        w.data = np.eye(4)
    value = rng.normal(size=(1, 4))
    out = cross_attend(Tensor(rng.normal(size=(3, 4))), Tensor(rng.normal(size=(1, 4))), Tensor(value), params)
    assert np.allclose(out.data, np.repeat(value, 3, axis=0), atol=1e-12)


def test_key_value_row_order_does_not_matter(rng):
    params = CrossAttention(8, 2, rng)
    q, k, v = rng.normal(size=(4, 8)), rng.normal(size=(6, 8)), rng.normal(size=(6, 8))
    perm = rng.permutation(6)
    a = cross_attend(Tensor(q), Tensor(k), Tensor(v), params).data
    b = cross_attend(Tensor(q), Tensor(k[perm]), Tensor(v[perm]), params).data
    assert np.allclose(a, b, atol=1e-12)


def test_query_rows_do_not_interact(rng):
    params = CrossAttention(8, 2, rng)
    q, k = rng.normal(size=(4, 8)), rng.normal(size=(6, 8))
    changed = q.copy()
    changed[2] = 0.0
    a = cross_attend(Tensor(q), Tensor(k), Tensor(k), params).data
    b = cross_attend(Tensor(changed), Tensor(k), Tensor(k), params).data
    assert np.array_equal(np.delete(a, 2, axis=0), np.delete(b, 2, axis=0))
    assert not np.array_equal(a[2], b[2])


def test_attention_weights_are_distributions(rng):
    params = CrossAttention(8, 4, rng)
    _, weights = cross_attend(Tensor(rng.normal(size=(3, 8))), Tensor(rng.normal(size=(5, 8))),
                              Tensor(rng.normal(size=(5, 8))), params, return_weights=True)
    assert weights.shape == (4, 3, 5)
    assert np.allclose(weights.data.sum(axis=-1), 1.0, atol=1e-12)


def test_cross_attention_width_mismatch(rng):
    params = CrossAttention(8, 2, rng)
    with pytest.raises(DimensionError):
        cross_attend(Tensor(np.ones((3, 6))), Tensor(np.ones((5, 8))), Tensor(np.ones((5, 8))), params)


def test_heads_must_divide_width(rng):
    with pytest.raises(DimensionError):
        CrossAttention(6, 4, rng)


def test_reduce_shape(rng):
    block = ReductionBlock((8, 4, 4, 32), 32, rng)
    assert reduce(Tensor(rng.normal(size=(8, 4, 4, 32))), block).shape == (8, 32)


def test_reduce_rejects_wrong_rank(rng):
    block = ReductionBlock((8, 4, 4, 32), 32, rng)
    with pytest.raises(DimensionError):
        reduce(Tensor(rng.normal(size=(8, 16, 32))), block)


def test_reduce_constant_map_with_identity_kernel(rng):
    block = ReductionBlock((4, 3, 3, 2), 5, rng)
    block.dw_w.data = np.zeros((3, 3, 2))
    block.dw_w.data[1, 1, :] = 1.0
    out = reduce(Tensor(np.full((4, 3, 3, 2), 0.7)), block).data
    expected = np.full(2, 0.7) @ block.proj_w.data + block.proj_b.data
    assert np.allclose(out, np.tile(expected, (4, 1)), atol=1e-12)


# ----------------------------------------------------------------------------
# Short- and long-range adapters
# ----------------------------------------------------------------------------

def _reduced(rng, num_clips=3, steps=2, width=8, num_layers=3):
    by_layer = {i: Tensor(rng.normal(size=(num_clips * steps, width))) for i in range(1, num_layers + 1)}
    return ReducedFeatures(by_layer, num_clips, num_layers), by_layer


def test_short_range_rows_match_batched_forward(rng):
    reduced, _ = _reduced(rng)
    adapter = ShortRangeAdapter([1, 2], 8, 2, rng)
    batched = adapter.forward_all(1, reduced).data
    for t in (1, 2, 3):
        rows = short_range_forward(1, t, reduced, adapter).data
        assert np.allclose(rows, batched[(t - 1) * 2:t * 2], atol=1e-12)


def test_short_range_ignores_other_clips_queries(rng):
    reduced, by_layer = _reduced(rng)
    adapter = ShortRangeAdapter([1, 2], 8, 2, rng)
    before = short_range_forward(2, 1, reduced, adapter).data
    data = by_layer[2].data.copy()
    data[2:] += 1.0
    by_layer[2] = Tensor(data)
    after = short_range_forward(2, 1, ReducedFeatures(by_layer, 3, 3), adapter).data
    assert np.array_equal(before, after)


def test_long_range_rows_move_with_their_clip_only(rng):
    reduced, by_layer = _reduced(rng)
    adapter = LongRangeAdapter([1, 2], 8, 2, rng)
    before = long_range_forward(1, reduced, adapter).data
    data = by_layer[1].data.copy()
    data[4:] += 1.0
    by_layer[1] = Tensor(data)
    after = long_range_forward(1, ReducedFeatures(by_layer, 3, 3), adapter).data
    assert np.array_equal(before[:4], after[:4])
    assert not np.array_equal(before[4:], after[4:])


def test_single_clip_short_equals_long_with_shared_weights(rng):
    reduced, _ = _reduced(rng, num_clips=1)
    short = ShortRangeAdapter([1], 8, 2, make_rng(4, "adapters"))
    long_ = LongRangeAdapter([1], 8, 2, make_rng(4, "adapters"))
    assert np.allclose(short_range_forward(1, 1, reduced, short).data, long_range_forward(1, reduced, long_).data,
                       atol=1e-12)


def test_last_layer_has_no_adapter(rng):
    reduced, _ = _reduced(rng)
    adapter = LongRangeAdapter([1, 2], 8, 2, rng)
    with pytest.raises(ContractError):
        long_range_forward(3, reduced, adapter)
    with pytest.raises(ContractError):
        short_range_forward(3, 1, reduced, ShortRangeAdapter([1, 2], 8, 2, rng))


def test_adapter_stack_parameter_paths():
    stack = AdapterStack(BackboneConfig(), AdapterConfig(), make_rng(0, "adapters"))
    names = {name for name, _ in stack.named_parameters()}
    assert "short.1.w_q" in names and "long.3.w_o" in names
    assert "reduce.4.proj_w" in names
    assert not any(name.startswith("short.4") for name in names)


def test_adapter_stack_respects_disabled_range():
    stack = AdapterStack(BackboneConfig(), AdapterConfig(use_long=False, layers=[2]), make_rng(0, "adapters"))
    assert stack.long is None and stack.layers == [2]
    assert sorted(stack.reduce_blocks) == [2, 4]


def test_in_backbone_adapters_start_as_identity(rng):
    cfg = BackboneConfig()
    inner = InBackboneAdapters(cfg, make_rng(0, "adapters", 1))
    assert sorted(inner.blocks) == list(range(2, cfg.num_layers + 1))
    assert inner.blocks[2].down_w.shape == (cfg.channels, cfg.channels // 4)
    h = Tensor(rng.normal(size=(2, 3, 3, cfg.channels)))
    for i in inner.blocks:
        assert np.array_equal(inner(i, h).data, h.data)
