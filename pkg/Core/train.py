# ============================================================================
# train.py - Training loop, evaluation and the gradient / memory audit
#
# One batch is one untrimmed video with all of its clips. In every mode but
# full_backbone the backbone weights are frozen; any gradient buffer appearing
# on a backbone parameter, or any change to its weights, is a hard AuditError.
# iter_training() is a generator that yields status lines and finally a
# TrainingResult, so callers can stream progress.
# ============================================================================

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from Core.constants import MEMREPORT_MODES
from Core.data import augment_video
from Core.errors import AuditError, InputError
from Core.head import decode, head_loss
from Core.log_utils import log
from Core.metrics import mean_ap
from Core.model import MODES, LosaModel
from Core.optim import AdamW, lr_at
from Core.rng import make_rng
from Core.tensor import Tape, backward, no_recording

BASELINE_MODES = ("head_only", "full_backbone", "in_backbone")


@dataclass
class AuditReport:
    mode: str
    learnable_params: int
    side_params: int
    frozen_params: int
    learnable_fraction: float
    head_params: int
    tape_nodes_losa: int
    tape_nodes_fullbackbone: int
    tape_nodes_head_only: int
    tape_nodes_in_backbone: int
    tape_floats_losa: int
    tape_floats_fullbackbone: int
    tape_floats_in_backbone: int
    backbone_grad_buffers: int
    backbone_unchanged: bool
    gate_min: float = None
    gate_max: float = None

    def to_dict(self):
        return asdict(self)


@dataclass
class EvalResult:
    loss: float
    map_result: object
    detections: dict

    @property
    def avg_map(self):
        return self.map_result.average if self.map_result is not None else float("nan")


@dataclass
class TrainingResult:
    model: LosaModel
    audit: AuditReport
    history: list = field(default_factory=list)
    gate_rows: list = field(default_factory=list)


# ----------------------------------------------------------------------------
# Forward helpers
# ----------------------------------------------------------------------------

def video_loss(model, sample, video=None):
    # -> (loss, logits, offsets, timeline); records on the active tape if any
    video = sample.video if video is None else video
    clips = model.clips_for(video)
    timeline = model.timeline(clips, video.length)
    logits, offsets = model.forward(clips)
    return head_loss(logits, offsets, sample.annotations, timeline), logits, offsets, timeline


def predict(model, sample):
    with no_recording():
        loss, logits, offsets, timeline = video_loss(model, sample)
    return loss.item(), decode(logits, offsets, model.cfg.head, timeline)


def evaluate(model, dataset, eval_cfg):
    if not dataset:
        raise InputError("Cannot evaluate on an empty dataset")
    losses, detections, ground_truth = [], {}, {}
    for sample in dataset:
        loss, dets = predict(model, sample)
        losses.append(loss)
        detections[sample.video.video_id] = dets
        ground_truth[sample.video.video_id] = sample.annotations
    has_gt = any(ground_truth.values())
    result = mean_ap(detections, ground_truth, eval_cfg) if has_gt else None
    return EvalResult(loss=float(np.mean(losses)), map_result=result, detections=detections)


def tape_usage(model, sample):
    # (node_count, activation_floats) of one recorded forward + loss
    with Tape() as tape:
        video_loss(model, sample)
    return tape.node_count, tape.activation_floats


def memory_counts(cfg, sample):
    # Tape usage of every training mode on the same video.
    counts = {}
    for mode in MEMREPORT_MODES:
        counts[mode] = tape_usage(LosaModel(cfg, mode=mode), sample)
    return counts


# ----------------------------------------------------------------------------
# Training
# ----------------------------------------------------------------------------

def _check_backbone(model, snapshot):
    grads = sum(1 for t in model.backbone.parameters() if t.grad is not None)
    if model.mode != "full_backbone":
        if grads:
            raise AuditError(f"{grads} backbone parameters received a gradient in {model.mode} mode")
        changed = [name for name, t in model.backbone.named_parameters() if not np.array_equal(t.data, snapshot[name])]
        if changed:
            raise AuditError(f"backbone parameters changed in {model.mode} mode: {changed[:5]}")
    return grads


def build_audit(model, cfg, sample, grad_buffers, unchanged):
    groups = model.parameter_groups()
    side = int(sum(t.size for t in groups["backbone_side"]))
    head = int(sum(t.size for t in groups["head"]))
    learnable = side + head
    frozen = int(sum(t.size for t in groups["frozen"]))
    counts = memory_counts(cfg, sample)
    gates = [row["value"] for row in model.gate_report()]
    return AuditReport(
        mode=model.mode,
        learnable_params=learnable,
        side_params=side,
        frozen_params=frozen,
        learnable_fraction=learnable / (learnable + frozen) if learnable + frozen else 0.0,
        head_params=head,
        tape_nodes_losa=counts["losa"][0],
        tape_nodes_fullbackbone=counts["full_backbone"][0],
        tape_nodes_head_only=counts["head_only"][0],
        tape_nodes_in_backbone=counts["in_backbone"][0],
        tape_floats_losa=counts["losa"][1],
        tape_floats_fullbackbone=counts["full_backbone"][1],
        tape_floats_in_backbone=counts["in_backbone"][1],
        backbone_grad_buffers=grad_buffers,
        backbone_unchanged=unchanged,
        gate_min=min(gates) if gates else None,
        gate_max=max(gates) if gates else None,
    )


def iter_training(cfg, train_set, test_set=None, mode=None):
    mode = mode or cfg.train.mode
    if mode not in MODES:
        raise InputError(f"Unknown training mode '{mode}'")
    if not train_set:
        raise InputError("Training set is empty")
    model = LosaModel(cfg, mode=mode)
    named = [(name, t) for name, t in model.named_parameters() if t.requires_grad]
    optimizer = AdamW(named, cfg.optim)
    snapshot = {name: t.data.copy() for name, t in model.backbone.named_parameters()}
    rng = make_rng(cfg.seed, "train")
    total = cfg.optim.total_epochs
    grad_buffers = 0
    history = []
    yield (f"Training {mode}: {len(named)} learnable tensors "
           f"({sum(t.size for _, t in named)} values), {len(train_set)} videos, {total} epochs")

    for epoch in range(total):
        order = rng.permutation(len(train_set))
        losses = []
        for step, idx in enumerate(order):
            sample = train_set[int(idx)]
            video = augment_video(sample.video, rng) if cfg.train.augment else None
            with Tape() as tape:
                loss, _, _, _ = video_loss(model, sample, video)
            backward(loss, tape)
            grad_buffers = max(grad_buffers, _check_backbone(model, snapshot))
            optimizer.step(lr_at(epoch + step / len(order), cfg.optim))
            optimizer.zero_grad()
            losses.append(loss.item())
        row = {"epoch": epoch + 1, "split": "train", "loss": float(np.mean(losses)), "avg_mAP": None}
        history.append(row)
        msg = f"Epoch {epoch + 1}/{total}: train loss {row['loss']:.5f}"
        last = epoch + 1 == total
        if test_set and cfg.train.eval_every and ((epoch + 1) % cfg.train.eval_every == 0 or last):
            result = evaluate(model, test_set, cfg.eval)
            history.append({"epoch": epoch + 1, "split": "test", "loss": result.loss,
                            "avg_mAP": None if math.isnan(result.avg_map) else result.avg_map})
            msg += f", test loss {result.loss:.5f}, test Avg mAP {result.avg_map:.4f}"
        yield msg

    _check_backbone(model, snapshot)
    unchanged = all(np.array_equal(t.data, snapshot[name]) for name, t in model.backbone.named_parameters())
    audit = build_audit(model, cfg, train_set[0], grad_buffers, unchanged)
    log(f"Audit ({mode}): learnable {audit.learnable_params}, frozen {audit.frozen_params}, "
        f"fraction {audit.learnable_fraction:.4f}, backbone grad buffers {audit.backbone_grad_buffers}")
    yield TrainingResult(model=model, audit=audit, history=history, gate_rows=model.gate_report())


def run_training(cfg, train_set, test_set=None, mode=None):
    # Drain iter_training, logging each status line; returns the TrainingResult.
    result = None
    for item in iter_training(cfg, train_set, test_set, mode=mode):
        if isinstance(item, TrainingResult):
            result = item
        else:
            log(item)
    return result


def train_losa(train_set, cfg, test_set=None):
    return run_training(cfg, train_set, test_set, mode="losa")


def train_baseline(train_set, mode, cfg, test_set=None):
    if mode not in BASELINE_MODES:
        raise InputError(f"Baseline mode must be one of {', '.join(BASELINE_MODES)}, got '{mode}'")
    return run_training(cfg, train_set, test_set, mode=mode)
