# ============================================================================
# model.py - Full LosaTAL model: backbone, adapters, gated fusion, head
#
# Training modes:
#   losa          - frozen backbone run outside the tape; adapters, fusion and
#                   head learn from its detached multi-layer features
#   head_only     - frozen backbone; only the head learns, on F_N^X
#   full_backbone - every parameter learns, recording through the backbone
#   in_backbone   - frozen backbone with bottleneck adapters inserted in front
#                   of each block; adapters and head learn, and the backward
#                   pass runs through every block
#
# Every mode draws the backbone from the same random stream, so one seed gives
# the same backbone weights whatever is trained on top of it.
# ============================================================================

import dataclasses

from Core.adapters import AdapterStack, InBackboneAdapters
from Core.backbone import Backbone, split_clips
from Core.constants import CLASS_PRIOR, TRAIN_MODES
from Core.errors import ContractError
from Core.fusion import GatedFusion
from Core.head import Head, Timeline, head_forward
from Core.module import Module
from Core.rng import make_rng
from Core.tensor import mean

MODES = TRAIN_MODES


class LosaModel(Module):
    def __init__(self, cfg, mode="losa"):
        super().__init__()
        if mode not in MODES:
            raise ContractError(f"unknown training mode '{mode}'")
        self.cfg = cfg
        self.mode = mode
        backbone_cfg = dataclasses.replace(cfg.backbone, frozen=(mode != "full_backbone"))
        self.backbone = self.add_child("backbone", Backbone(backbone_cfg, make_rng(cfg.seed, "backbone")))
        self.adapter = None
        self.fusion = None
        self.inner = None
        if mode in ("losa", "full_backbone"):
            self.adapter = self.add_child("adapter", AdapterStack(cfg.backbone, cfg.adapters,
                                                                  make_rng(cfg.seed, "adapters")))
            self.fusion = self.add_child("fusion", GatedFusion(cfg.backbone, cfg.adapters,
                                                               make_rng(cfg.seed, "fusion")))
        elif mode == "in_backbone":
            self.inner = self.add_child("inner", InBackboneAdapters(cfg.backbone, make_rng(cfg.seed, "adapters", 1)))
            self.backbone.inner_adapters = self.inner
        self.head = self.add_child("head", Head(cfg.backbone.channels, cfg.head, make_rng(cfg.seed, "head"),
                                                prior=CLASS_PRIOR))
        self.steps_per_clip = cfg.backbone.layer_dims()[-1][0]

    def parameter_groups(self):
        # -> {"backbone_side": adapters (+ fusion), "head": head, "frozen": backbone unless trained}
        side = []
        for child in (self.adapter, self.fusion, self.inner):
            if child is not None:
                side.extend(child.parameters())
        backbone = self.backbone.parameters()
        if self.mode == "full_backbone":
            return {"backbone_side": backbone + side, "head": self.head.parameters(), "frozen": []}
        return {"backbone_side": side, "head": self.head.parameters(), "frozen": backbone}

    def learnable_parameters(self):
        groups = self.parameter_groups()
        return groups["backbone_side"] + groups["head"]

    def clips_for(self, video):
        return split_clips(video, self.cfg.clips)

    def timeline(self, clips, length):
        return Timeline.from_clips(clips, self.steps_per_clip, self.cfg.clips.clip_len, length)

    def enhanced_features(self, clips):
        # FT^X_N; equals F_N^X when no side adapters are present
        features = self.backbone.forward_all_layers(clips)
        f_last = mean(features.concat(self.backbone.cfg.num_layers), axis=(1, 2))
        if self.adapter is None:
            return f_last, f_last
        short, long_, _ = self.adapter.forward(features)
        return self.fusion.forward(short, long_, f_last, features.num_clips), f_last

    def forward(self, clips):
        ft, _ = self.enhanced_features(clips)
        return head_forward(ft, self.head)

    def gate_report(self):
        return self.fusion.gate_report() if self.fusion is not None else []
