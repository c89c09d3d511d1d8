# ============================================================================
# metrics.py - Temporal IoU, per-class AP and mAP over tIoU thresholds
#
# Detections and ground truth are grouped by video id. For one class and one
# threshold, detections are visited by descending score (ties: earlier start,
# lower class, earlier end, video id) and each one claims the still-unmatched
# ground-truth segment of its video with the highest tIoU at or above the
# threshold. AP is the area under the all-point interpolated PR curve.
# ============================================================================

from dataclasses import dataclass, field

import numpy as np

from Core.errors import ContractError


def temporal_iou(a, b):
    a0, a1 = _bounds(a)
    b0, b1 = _bounds(b)
    if not (a0 < a1 and b0 < b1):
        raise ContractError(f"temporal_iou needs start < end, got {(a0, a1)} and {(b0, b1)}")
    inter = max(0.0, min(a1, b1) - max(a0, b0))
    union = (a1 - a0) + (b1 - b0) - inter
    return inter / union


def _bounds(seg):
    if hasattr(seg, "start"):
        return float(seg.start), float(seg.end)
    return float(seg[0]), float(seg[1])


def _by_video(items):
    # A bare list counts as the detections (or annotations) of a single video.
    if isinstance(items, dict):
        return items
    return {"": list(items)}


def _ranked(dets_by_video, class_id):
    ranked = [(vid, d) for vid, dets in dets_by_video.items() for d in dets if d.class_id == class_id]
    ranked.sort(key=lambda item: (-item[1].score, item[1].start, item[1].class_id, item[1].end, item[0]))
    return ranked


def interpolated_ap(precision, recall):
    # All-point interpolation: precision envelope integrated over every recall step.
    mprec = np.concatenate([[0.0], precision, [0.0]])
    mrec = np.concatenate([[0.0], recall, [1.0]])
    for i in range(len(mprec) - 2, -1, -1):
        mprec[i] = max(mprec[i], mprec[i + 1])
    steps = np.flatnonzero(mrec[1:] != mrec[:-1]) + 1
    return float(np.sum((mrec[steps] - mrec[steps - 1]) * mprec[steps]))


def match_detections(dets, gts, class_id, tiou):
    # -> (true-positive flags in ranked order, number of GT segments of the class)
    dets_by_video, gts_by_video = _by_video(dets), _by_video(gts)
    gt_segments = {vid: [g for g in anns if g.class_id == class_id] for vid, anns in gts_by_video.items()}
    matched = {vid: [False] * len(segs) for vid, segs in gt_segments.items()}
    flags = []
    for vid, det in _ranked(dets_by_video, class_id):
        best, best_iou = -1, tiou
        for j, gt in enumerate(gt_segments.get(vid, [])):
            if matched[vid][j]:
                continue
            iou = temporal_iou(det, gt)
            if iou >= best_iou and (best < 0 or iou > best_iou):
                best, best_iou = j, iou
        if best >= 0:
            matched[vid][best] = True
        flags.append(best >= 0)
    return flags, sum(len(s) for s in gt_segments.values())


def average_precision(dets, gts, class_id, tiou):
    # None when the class appears in neither detections nor ground truth.
    flags, num_gt = match_detections(dets, gts, class_id, tiou)
    if num_gt == 0:
        return None if not flags else 0.0
    if not flags:
        return 0.0
    tp = np.cumsum(flags, dtype=np.float64)
    precision = tp / np.arange(1, len(flags) + 1)
    recall = tp / num_gt
    return interpolated_ap(precision, recall)


@dataclass
class MapResult:
    thresholds: list
    per_threshold: list
    average: float
    per_class: dict = field(default_factory=dict)


def mean_ap(dets, gts, cfg):
    dets_by_video, gts_by_video = _by_video(dets), _by_video(gts)
    gt_classes = {g.class_id for anns in gts_by_video.values() for g in anns}
    if not gt_classes:
        raise ContractError("mean_ap needs at least one ground-truth segment")
    classes = sorted(gt_classes | {d.class_id for ds in dets_by_video.values() for d in ds})
    per_threshold, per_class = [], {}
    for tiou in cfg.tiou_thresholds:
        aps = []
        for k in classes:
            ap = average_precision(dets_by_video, gts_by_video, k, tiou)
            if ap is not None:
                per_class[(tiou, k)] = ap
                aps.append(ap)
        per_threshold.append(float(np.mean(aps)))
    return MapResult(thresholds=list(cfg.tiou_thresholds), per_threshold=per_threshold,
                     average=float(np.mean(per_threshold)), per_class=per_class)


def metrics_rows(result):
    # (threshold, class, AP) rows, then one mAP row per threshold, then the average.
    rows = [{"threshold": t, "class": str(k), "ap": ap} for (t, k), ap in sorted(result.per_class.items())]
    rows += [{"threshold": t, "class": "mAP", "ap": m} for t, m in zip(result.thresholds, result.per_threshold)]
    rows.append({"threshold": "avg", "class": "mAP", "ap": result.average})
    return rows
