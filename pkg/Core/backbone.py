# ============================================================================
# backbone.py - Toy video backbone and clip splitter for LosaTAL
#
# The backbone g = f_N(...f_1(X)...) turns each clip of T' frames into one
# feature map per layer. Layer 1 is the stem (per-frame 3x3 conv, GELU,
# spatial mean pool, temporal mean pool); layers 2..N are identical blocks
# (3x3 conv expanding the width, GELU, pointwise channel mix back, layer norm).
# Clips are processed independently of each other. When the backbone is frozen
# its forward pass runs outside any tape, so nothing downstream can send a
# gradient into it.
# ============================================================================

import math
from dataclasses import dataclass

import numpy as np

from Core.errors import ContractError, InputError
from Core.module import Module, uniform_init, zeros
from Core.tensor import Tensor, concat, conv2d, gelu, layer_norm, linear, mean, no_recording, reshape


@dataclass
class Clip:
    index: int
    start: int
    frames: np.ndarray
    padded: int


def num_clips(length, spec):
    return math.ceil((max(length, spec.clip_len) - spec.clip_len) / spec.stride) + 1


def split_clips(video, spec):
    # Cut an untrimmed video into T clips of T' frames; the final clip repeats
    # the last frame as needed so every frame of the video is covered.
    frames = video.frames
    length = frames.shape[0] if frames.ndim else 0
    if length == 0:
        raise InputError(f"Video '{video.video_id}' has no frames")
    if spec.stride > spec.clip_len:
        raise InputError(f"Clip stride {spec.stride} exceeds clip length {spec.clip_len}; frames would be skipped")
    clips = []
    for t in range(num_clips(length, spec)):
        start = t * spec.stride
        idx = np.arange(start, start + spec.clip_len)
        padded = int(np.count_nonzero(idx >= length))
        clips.append(Clip(index=t, start=start, frames=frames[np.minimum(idx, length - 1)], padded=padded))
    return clips


class LayerFeatures:
    # Per-layer, per-clip feature maps F_i^{x_t} (layers and clips are 1-based).
    def __init__(self, per_clip):
        self.per_clip = per_clip
        self._concat = {}

    @property
    def num_clips(self):
        return len(self.per_clip)

    @property
    def num_layers(self):
        return len(self.per_clip[0])

    def clip(self, i, t):
        return self.per_clip[t - 1][i - 1]

    def concat(self, i):
        # F^X_i: clip feature maps stacked along time in clip order t = 1..T
        if i not in self._concat:
            self._concat[i] = concat([maps[i - 1] for maps in self.per_clip], axis=0)
        return self._concat[i]

    def detached(self):
        return LayerFeatures([[f.detach() for f in maps] for maps in self.per_clip])


class Backbone(Module):
    def __init__(self, cfg, rng):
        super().__init__()
        self.cfg = cfg
        c, e = cfg.channels, cfg.expansion
        self.stem_w = self.add_param("stem.w", uniform_init(rng, (3, 3, cfg.in_channels, c), 9 * cfg.in_channels))
        self.stem_b = self.add_param("stem.b", zeros((c,)))
        self.blocks = []
        for i in range(2, cfg.num_layers + 1):
            block = {
                "conv_w": self.add_param(f"block.{i}.conv_w", uniform_init(rng, (3, 3, c, e * c), 9 * c)),
                "conv_b": self.add_param(f"block.{i}.conv_b", zeros((e * c,))),
                "mix_w": self.add_param(f"block.{i}.mix_w", uniform_init(rng, (e * c, c), e * c)),
                "mix_b": self.add_param(f"block.{i}.mix_b", zeros((c,))),
                "ln_g": self.add_param(f"block.{i}.ln_g", np.ones(c)),
                "ln_b": self.add_param(f"block.{i}.ln_b", zeros((c,))),
            }
            self.blocks.append(block)
        self.set_trainable(not cfg.frozen)
        # Trainable modules run in front of each block; owned by the model, not the backbone
        self.inner_adapters = None

    @property
    def frozen(self):
        return not any(t.requires_grad for t in self.parameters())

    def forward_clip(self, frames):
        # frames: [T', H, W, Cin] -> [F_1, ..., F_N], each [T_i, H_i, W_i, C_i]
        cfg = self.cfg
        expected = (cfg.clip_len, cfg.frame_height, cfg.frame_width, cfg.in_channels)
        if tuple(frames.shape) != expected:
            raise InputError(f"Clip shape {tuple(frames.shape)} does not match backbone input {expected}")
        fs, c = cfg.feature_size, cfg.channels
        h = gelu(conv2d(Tensor(frames), self.stem_w, self.stem_b))
        h = reshape(h, (cfg.clip_len, fs, cfg.frame_height // fs, fs, cfg.frame_width // fs, c))
        h = mean(h, axis=(2, 4))
        h = _temporal_pool(h, cfg.temporal_pool)
        features = [h]
        for i, (block, pool) in enumerate(zip(self.blocks, cfg.block_temporal_pool), start=2):
            if self.inner_adapters is not None:
                h = self.inner_adapters(i, h)
            h = gelu(conv2d(h, block["conv_w"], block["conv_b"]))
            h = layer_norm(linear(h, block["mix_w"], block["mix_b"]), block["ln_g"], block["ln_b"])
            h = _temporal_pool(h, pool)
            features.append(h)
        return features

    def forward_all_layers(self, clips):
        if not clips:
            raise ContractError("forward_all_layers needs at least one clip")
        if self.frozen and self.inner_adapters is None:
            with no_recording():
                per_clip = [self.forward_clip(clip.frames) for clip in clips]
        else:
            per_clip = [self.forward_clip(clip.frames) for clip in clips]
        return LayerFeatures(per_clip)


def forward_all_layers(clips, backbone):
    return backbone.forward_all_layers(clips)


def _temporal_pool(h, pool):
    if pool == 1:
        return h
    t = h.shape[0]
    h = reshape(h, (t // pool, pool) + tuple(h.shape[1:]))
    return mean(h, axis=1)
