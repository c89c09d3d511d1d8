# ============================================================================
# head.py - Anchor-free temporal localization head for LosaTAL
#
# A small 1-D conv tower over the TAL-enhanced features, then per timestep
# class logits and softplus distances (in timestep units) to the segment start
# and end. head_loss() trains it with sigmoid cross-entropy plus 1 - IoU on
# positive timesteps; decode() turns its outputs into scored segments in
# frame units with per-class hard NMS.
# ============================================================================

import math
from dataclasses import dataclass

import numpy as np

from Core.errors import DimensionError, InputError
from Core.metrics import temporal_iou
from Core.module import Module, uniform_init, zeros
from Core.tensor import (Tensor, add, bce_with_logits, conv1d, div, gelu, index_rows, linear, mean,
                         minimum, reduce_sum, softplus, sub)


@dataclass(frozen=True)
class Detection:
    start: float
    end: float
    class_id: int
    score: float

    def to_dict(self):
        return {"start": self.start, "end": self.end, "class": self.class_id, "score": self.score}


@dataclass
class Timeline:
    # Frame position of every timestep of the concatenated feature sequence.
    positions: np.ndarray
    ratio: float
    length: int

    @classmethod
    def from_clips(cls, clips, steps_per_clip, clip_len, length):
        ratio = clip_len / steps_per_clip
        offsets = (np.arange(steps_per_clip) + 0.5) * ratio
        positions = np.concatenate([clip.start + offsets for clip in clips])
        return cls(positions=positions, ratio=ratio, length=length)

    @property
    def steps(self):
        return len(self.positions)


class Head(Module):
    def __init__(self, width, cfg, rng, prior=0.01):
        super().__init__()
        self.cfg = cfg
        self.width = width
        self.tower = []
        for k in range(cfg.tower):
            w = self.add_param(f"tower.{k}.w", uniform_init(rng, (cfg.kernel, width, width), cfg.kernel * width))
            b = self.add_param(f"tower.{k}.b", zeros((width,)))
            self.tower.append((w, b))
        self.cls_w = self.add_param("cls.w", uniform_init(rng, (width, cfg.num_classes), width))
        self.cls_b = self.add_param("cls.b", np.full(cfg.num_classes, -math.log((1 - prior) / prior)))
        self.reg_w = self.add_param("reg.w", uniform_init(rng, (width, 2), width))
        self.reg_b = self.add_param("reg.b", zeros((2,)))


def head_forward(features, head):
    if features.ndim != 2 or features.shape[1] != head.width:
        raise DimensionError(f"head expects [steps, {head.width}] features, got {features.shape}")
    h = features
    for w, b in head.tower:
        h = gelu(conv1d(h, w, b))
    logits = linear(h, head.cls_w, head.cls_b)
    offsets = softplus(linear(h, head.reg_w, head.reg_b))
    return logits, offsets


def build_targets(annotations, timeline, num_classes):
    # -> (class targets [M, K], positive row indices, regression targets [P, 2] in timestep units)
    cls_targets = np.zeros((timeline.steps, num_classes))
    reg_targets = np.zeros((timeline.steps, 2))
    positive = np.zeros(timeline.steps, dtype=bool)
    for ann in annotations:
        if not (0 <= ann.start < ann.end <= timeline.length):
            raise InputError(f"Annotation [{ann.start}, {ann.end}) lies outside video extent [0, {timeline.length}]")
        if not 0 <= ann.class_id < num_classes:
            raise InputError(f"Annotation class {ann.class_id} outside 0..{num_classes - 1}")
        inside = (timeline.positions >= ann.start) & (timeline.positions < ann.end)
        cls_targets[inside, ann.class_id] = 1.0
        reg_targets[inside, 0] = (timeline.positions[inside] - ann.start) / timeline.ratio
        reg_targets[inside, 1] = (ann.end - timeline.positions[inside]) / timeline.ratio
        positive |= inside
    rows = np.flatnonzero(positive)
    return cls_targets, rows, reg_targets[rows]


def head_loss(logits, offsets, annotations, timeline, return_parts=False):
    num_classes = logits.shape[1]
    cls_targets, rows, reg_targets = build_targets(annotations, timeline, num_classes)
    cls_loss = mean(bce_with_logits(logits, Tensor(cls_targets)))
    if rows.size == 0:
        reg_loss = None
        total = cls_loss
    else:
        pred = index_rows(offsets, rows)
        inter = reduce_sum(minimum(pred, Tensor(reg_targets)), axis=1)
        union = sub(add(reduce_sum(pred, axis=1), Tensor(reg_targets.sum(axis=1))), inter)
        reg_loss = mean(sub(1.0, div(inter, union)))
        total = add(cls_loss, reg_loss)
    if return_parts:
        return total, cls_loss, reg_loss
    return total


def _sort_key(det):
    return (-det.score, det.start, det.class_id, det.end)


def nms(candidates, iou_threshold):
    # Greedy hard NMS within each class: keep the best, drop anything overlapping it by more than the threshold.
    kept = []
    for det in sorted(candidates, key=_sort_key):
        if all(k.class_id != det.class_id or temporal_iou((k.start, k.end), (det.start, det.end)) <= iou_threshold
               for k in kept):
            kept.append(det)
    return kept


def decode(logits, offsets, cfg, timeline):
    logit_arr = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    offset_arr = offsets.data if isinstance(offsets, Tensor) else np.asarray(offsets)
    scores = np.exp(-np.logaddexp(0.0, -logit_arr))
    candidates = []
    for step, k in zip(*np.nonzero(scores > cfg.score_threshold)):
        p = timeline.positions[step]
        start = max(0.0, p - offset_arr[step, 0] * timeline.ratio)
        end = min(float(timeline.length), p + offset_arr[step, 1] * timeline.ratio)
        if end > start:
            candidates.append(Detection(float(start), float(end), int(k), float(scores[step, k])))
    kept = nms(candidates, cfg.nms_iou)
    return sorted(kept, key=_sort_key)[: cfg.max_detections]
