# ============================================================================
# adapters.py - Reduction blocks, cross-attention and the Short-range and
# Long-range Temporal Adapters for LosaTAL
#
# Each backbone layer i gets a reduction block collapsing its spatial dims
# (F_i -> F'_i, width C = C_N). For every adapted intermediate layer, the
# Short-range Adapter cross-attends one clip's F'_i (query) to the whole video's
# F'_N (key/value); the Long-range Adapter uses the full temporally concatenated
# F'^X_i as query against the same key/value. Attention carries no positional
# encoding, no masking and no feed-forward sublayer.
# ============================================================================

import math

from Core.constants import INNER_ADAPTER_RATIO
from Core.errors import ContractError, DimensionError
from Core.module import Module, uniform_init, zeros
from Core.tensor import (add, depthwise_conv2d, gelu, linear, matmul, mean, reshape, scale, slice_axis,
                         softmax_rows, transpose)


class ReductionBlock(Module):
    # [T_x, H_i, W_i, C_i] -> [T_x, C]; applies per temporal slice, so it is
    # equally valid on one clip's map or on the concatenation of all clips.
    def __init__(self, dims, width, rng):
        super().__init__()
        _, self.h, self.w, self.c_in = dims
        self.width = width
        self.dw_w = self.add_param("dw_w", uniform_init(rng, (3, 3, self.c_in), 9))
        self.dw_b = self.add_param("dw_b", zeros((self.c_in,)))
        self.proj_w = self.add_param("proj_w", uniform_init(rng, (self.c_in, width), self.c_in))
        self.proj_b = self.add_param("proj_b", zeros((width,)))

    def __call__(self, features):
        if features.ndim != 4:
            raise DimensionError(f"reduce expects a rank-4 feature map, got shape {features.shape}")
        if tuple(features.shape[1:]) != (self.h, self.w, self.c_in):
            raise DimensionError(f"reduce: feature map {features.shape} does not match layer dims "
                                 f"{(self.h, self.w, self.c_in)}")
        h = depthwise_conv2d(features, self.dw_w, self.dw_b)
        h = mean(h, axis=(1, 2))
        return linear(h, self.proj_w, self.proj_b)


def reduce(features, block):
    return block(features)


class CrossAttention(Module):
    def __init__(self, width, n_heads, rng):
        super().__init__()
        if width % n_heads != 0:
            raise DimensionError(f"width {width} is not divisible by n_heads {n_heads}")
        self.width = width
        self.n_heads = n_heads
        self.head_dim = width // n_heads
        for name in ("w_q", "w_k", "w_v", "w_o"):
            setattr(self, name, self.add_param(name, uniform_init(rng, (width, width), width)))


def cross_attend(q_in, k_in, v_in, params, return_weights=False):
    # Multi-head cross-attention: per head softmax(Q_h K_h^T / sqrt(d_h)) V_h,
    # heads concatenated, then W_O. Query rows never interact.
    c, h, d = params.width, params.n_heads, params.head_dim
    for label, x in (("query", q_in), ("key", k_in), ("value", v_in)):
        if x.ndim != 2 or x.shape[1] != c:
            raise DimensionError(f"cross_attend: {label} shape {x.shape} does not match width {c}")
    if k_in.shape[0] != v_in.shape[0]:
        raise DimensionError(f"cross_attend: key {k_in.shape} and value {v_in.shape} lengths differ")
    m, n = q_in.shape[0], k_in.shape[0]

    q = transpose(reshape(matmul(q_in, params.w_q), (m, h, d)), (1, 0, 2))   # [h, m, d]
    k = transpose(reshape(matmul(k_in, params.w_k), (n, h, d)), (1, 2, 0))   # [h, d, n]
    v = transpose(reshape(matmul(v_in, params.w_v), (n, h, d)), (1, 0, 2))   # [h, n, d]
    weights = softmax_rows(scale(matmul(q, k), 1.0 / math.sqrt(d)))          # [h, m, n]
    out = reshape(transpose(matmul(weights, v), (1, 0, 2)), (m, c))
    out = matmul(out, params.w_o)
    if return_weights:
        return out, weights
    return out


class ReducedFeatures:
    # F'_i for every reduced layer, stored as the temporal concatenation F'^X_i.
    def __init__(self, by_layer, num_clips, num_layers):
        self.by_layer = by_layer
        self.num_clips = num_clips
        self.num_layers = num_layers

    def concat(self, i):
        return self.by_layer[i]

    def clip(self, i, t):
        x = self.by_layer[i]
        per_clip = x.shape[0] // self.num_clips
        return slice_axis(x, (t - 1) * per_clip, t * per_clip, axis=0)


class _RangeAdapter(Module):
    kind = "range"

    def __init__(self, layers, width, n_heads, rng):
        super().__init__()
        self.layers = list(layers)
        self.attn = {i: self.add_child(i, CrossAttention(width, n_heads, rng)) for i in self.layers}

    def _attention(self, i, reduced):
        if i >= reduced.num_layers:
            raise ContractError(f"{self.kind}-range adapters attach to layers 1..{reduced.num_layers - 1}, got {i}")
        if i not in self.attn:
            raise ContractError(f"no {self.kind}-range adapter on layer {i}")
        return self.attn[i]


class ShortRangeAdapter(_RangeAdapter):
    kind = "short"

    def forward_clip(self, i, t, reduced):
        params = self._attention(i, reduced)
        context = reduced.concat(reduced.num_layers)
        return cross_attend(reduced.clip(i, t), context, context, params)

    def forward_all(self, i, reduced):
        # Rows of clip t in the result equal forward_clip(i, t); one batched call keeps the tape small.
        params = self._attention(i, reduced)
        context = reduced.concat(reduced.num_layers)
        return cross_attend(reduced.concat(i), context, context, params)


class LongRangeAdapter(_RangeAdapter):
    kind = "long"

    def forward(self, i, reduced):
        params = self._attention(i, reduced)
        context = reduced.concat(reduced.num_layers)
        return cross_attend(reduced.concat(i), context, context, params)


def short_range_forward(i, t, reduced, adapter):
    return adapter.forward_clip(i, t, reduced)


def long_range_forward(i, reduced, adapter):
    return adapter.forward(i, reduced)


class AdapterStack(Module):
    def __init__(self, backbone_cfg, adapter_cfg, rng):
        super().__init__()
        n = backbone_cfg.num_layers
        dims = backbone_cfg.layer_dims()
        self.num_layers = n
        self.width = backbone_cfg.channels
        self.layers = adapter_cfg.active_layers(n)
        reduced_layers = self.layers + [n]
        reduce_root = self.add_child("reduce", Module())
        self.reduce_blocks = {i: reduce_root.add_child(i, ReductionBlock(dims[i - 1], self.width, rng))
                              for i in reduced_layers}
        self.short = None
        self.long = None
        if adapter_cfg.use_short:
            self.short = self.add_child("short", ShortRangeAdapter(self.layers, self.width, adapter_cfg.n_heads, rng))
        if adapter_cfg.use_long:
            self.long = self.add_child("long", LongRangeAdapter(self.layers, self.width, adapter_cfg.n_heads, rng))

    def reduce_all(self, features):
        by_layer = {i: block(features.concat(i)) for i, block in self.reduce_blocks.items()}
        return ReducedFeatures(by_layer, features.num_clips, self.num_layers)

    def forward(self, features):
        # -> ({i: FS^X_i}, {i: FL^X_i}, F'_N reduced); missing ranges give empty dicts
        reduced = self.reduce_all(features)
        short = {i: self.short.forward_all(i, reduced) for i in self.layers} if self.short else {}
        long_ = {i: self.long.forward(i, reduced) for i in self.layers} if self.long else {}
        return short, long_, reduced


# ----------------------------------------------------------------------------
# In-backbone adapters (memory-report baseline)
# ----------------------------------------------------------------------------

class BottleneckAdapter(Module):
    # h + up(gelu(down(h))) on the channel axis; up starts at zero so the
    # wrapped backbone initially computes exactly its frozen features.
    def __init__(self, width, hidden, rng):
        super().__init__()
        self.down_w = self.add_param("down_w", uniform_init(rng, (width, hidden), width))
        self.down_b = self.add_param("down_b", zeros((hidden,)))
        self.up_w = self.add_param("up_w", zeros((hidden, width)))
        self.up_b = self.add_param("up_b", zeros((width,)))

    def __call__(self, h):
        return add(h, linear(gelu(linear(h, self.down_w, self.down_b)), self.up_w, self.up_b))


class InBackboneAdapters(Module):
    # One bottleneck adapter in front of every backbone block (layers 2..N).
    # Gradients reach them only by backpropagating through the frozen blocks
    # above, so every block op is recorded on the tape.
    def __init__(self, backbone_cfg, rng, ratio=INNER_ADAPTER_RATIO):
        super().__init__()
        width = backbone_cfg.channels
        hidden = max(1, width // ratio)
        self.blocks = {i: self.add_child(i, BottleneckAdapter(width, hidden, rng))
                       for i in range(2, backbone_cfg.num_layers + 1)}

    def __call__(self, i, h):
        return self.blocks[i](h)
