# ============================================================================
# data.py - Synthetic untrimmed videos and the on-disk dataset format
#
# Each video is a noisy grey background with 1..4 non-overlapping action
# segments. A class is either a bright square moving with a class velocity or
# a global brightness oscillation with a class frequency. The two classes of a
# long-range pair look identical inside any clip; they differ only by a small
# coloured cue planted more than one clip before the segment starts.
#
# On disk: manifest.json (format "losa-ds-v1", one entry per video with its
# shape, payload file and annotations) plus one little-endian float32 .raw
# payload per video.
# ============================================================================

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from Core.constants import DATASET_FORMAT, MANIFEST_NAME
from Core.errors import (GenerationError, InputError, ManifestError, MissingPayloadError,
                         TruncatedPayloadError, VersionMismatchError)
from Core.log_utils import log
from Core.rng import make_rng

SPLITS = {"train": 0, "test": 1}
SQUARE_VALUE = 0.9
PLACEMENT_ATTEMPTS = 64


@dataclass(frozen=True)
class SegmentAnnotation:
    start: int
    end: int
    class_id: int

    def to_dict(self):
        return {"start": self.start, "end": self.end, "class": self.class_id}


@dataclass
class UntrimmedVideo:
    video_id: str
    frames: np.ndarray

    @property
    def length(self):
        return int(self.frames.shape[0])


@dataclass
class Sample:
    video: UntrimmedVideo
    annotations: list


# ----------------------------------------------------------------------------
# Generation
# ----------------------------------------------------------------------------

def _pair_lookup(cfg):
    # class -> (pair index, member index)
    return {k: (p, m) for p, pair in enumerate(cfg.long_range_pairs) for m, k in enumerate(pair)}


def _cue_footprint(cfg):
    # frames reserved before a pair-class onset: the cue, then a gap longer than one clip
    return cfg.cue_len + cfg.clip_len + 1


def _plan_segments(rng, cfg, length, pairs):
    # -> list of (class_id, onset, seg_len), sorted by onset
    allowed_members = [int(rng.integers(2)) for _ in cfg.long_range_pairs]
    allowed = [k for k in range(cfg.num_classes)
               if k not in pairs or pairs[k][1] == allowed_members[pairs[k][0]]]
    for _ in range(PLACEMENT_ATTEMPTS):
        count = int(rng.integers(cfg.segments_min, cfg.segments_max + 1))
        classes = [allowed[int(rng.integers(len(allowed)))] for _ in range(count)]
        longest = min(cfg.segment_len_max, length)
        if longest < cfg.segment_len_min:
            break
        lengths = [int(rng.integers(cfg.segment_len_min, longest + 1)) for _ in range(count)]
        lead = [_cue_footprint(cfg) if k in pairs else 0 for k in classes]
        free = length - sum(lengths) - sum(lead)
        if free < 0:
            continue
        cuts = np.sort(rng.integers(0, free + 1, size=count))
        gaps = np.diff(np.concatenate([[0], cuts]))
        plan, cursor = [], 0
        for k, seg_len, pre, gap in zip(classes, lengths, lead, gaps):
            cursor += int(gap) + pre
            plan.append((k, cursor, seg_len))
            cursor += seg_len
        return plan
    raise GenerationError(f"Could not pack {cfg.segments_min}..{cfg.segments_max} segments of "
                          f"{cfg.segment_len_min}..{cfg.segment_len_max} frames into a {length}-frame video")


def _paint_square(frames, rng, pattern, cfg, onset, seg_len):
    size, s = cfg.frame_size, cfg.square_size
    vy, vx = pattern["velocity"]
    y0, x0 = rng.integers(0, size - s + 1, size=2)
    for j in range(seg_len):
        y = int((y0 + vy * j) % (size - s + 1))
        x = int((x0 + vx * j) % (size - s + 1))
        frames[onset + j, y:y + s, x:x + s, :] = pattern.get("value", SQUARE_VALUE)


def _paint_oscillation(frames, pattern, cfg, onset, seg_len):
    phase = 2.0 * math.pi * float(pattern["frequency"]) * np.arange(seg_len)
    frames[onset:onset + seg_len] += cfg.amplitude * np.sin(phase)[:, None, None, None]


def _paint_cue(frames, cfg, onset, member):
    # Member 0 of a pair gets a red corner, member 1 a blue one.
    end = onset - cfg.clip_len - 1
    channel = 0 if member == 0 else 2
    block = frames[end - cfg.cue_len:end, :cfg.cue_size, :cfg.cue_size, :]
    block[...] = 0.0
    block[..., channel] = 1.0


def generate_video(rng, cfg, video_id):
    pairs = _pair_lookup(cfg)
    length = int(rng.integers(cfg.length_min, cfg.length_max + 1))
    shape = (length, cfg.frame_size, cfg.frame_size, cfg.channels)
    frames = np.full(shape, cfg.background, dtype=np.float64)
    plan = _plan_segments(rng, cfg, length, pairs)
    annotations = []
    for k, onset, seg_len in plan:
        pattern = cfg.class_patterns[k]
        if pattern["kind"] == "square":
            _paint_square(frames, rng, pattern, cfg, onset, seg_len)
        else:
            _paint_oscillation(frames, pattern, cfg, onset, seg_len)
        if k in pairs:
            _paint_cue(frames, cfg, onset, pairs[k][1])
        annotations.append(SegmentAnnotation(onset, onset + seg_len, k))
    if cfg.noise_sigma > 0:
        frames += rng.normal(0.0, cfg.noise_sigma, size=shape)
    frames = np.clip(frames, 0.0, 1.0).astype("<f4").astype(np.float64)
    return Sample(UntrimmedVideo(video_id, frames), annotations)


def generate(cfg, split="train", num_videos=None):
    if split not in SPLITS:
        raise InputError(f"Unknown split '{split}'")
    count = cfg.num_videos if num_videos is None else num_videos
    rng = make_rng(cfg.seed, "data", SPLITS[split])
    samples = [generate_video(rng, cfg, f"{split}_{n:04d}") for n in range(count)]
    log(f"Generated {count} {split} videos ({sum(len(s.annotations) for s in samples)} segments)")
    return samples


# ----------------------------------------------------------------------------
# Augmentation
# ----------------------------------------------------------------------------

def augment_video(video, rng, min_scale=0.75):
    # One random crop for the whole video, resized back with nearest neighbours.
    _, h, w, _ = video.frames.shape
    ch = int(rng.integers(math.ceil(min_scale * h), h + 1))
    cw = int(rng.integers(math.ceil(min_scale * w), w + 1))
    y0 = int(rng.integers(0, h - ch + 1))
    x0 = int(rng.integers(0, w - cw + 1))
    rows = y0 + (np.arange(h) * ch) // h
    cols = x0 + (np.arange(w) * cw) // w
    frames = video.frames[:, rows][:, :, cols]
    return UntrimmedVideo(video.video_id, frames)


# ----------------------------------------------------------------------------
# Save / load
# ----------------------------------------------------------------------------

def save(dataset, directory):
    os.makedirs(directory, exist_ok=True)
    entries = []
    for sample in dataset:
        video = sample.video
        payload = f"{video.video_id}.raw"
        with open(os.path.join(directory, payload), "wb") as f:
            f.write(video.frames.astype("<f4").tobytes())
        entries.append({
            "video_id": video.video_id,
            "shape": list(video.frames.shape),
            "file": payload,
            "annotations": [a.to_dict() for a in sample.annotations],
        })
    with open(os.path.join(directory, MANIFEST_NAME), "w", encoding="utf-8") as f:
        json.dump({"format": DATASET_FORMAT, "videos": entries}, f, indent=2)
    log(f"Saved {len(entries)} videos to {directory}")


def load(directory):
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise MissingPayloadError(f"No {MANIFEST_NAME} in {directory}")
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except json.JSONDecodeError as e:
        raise ManifestError(f"Malformed manifest {manifest_path}: {e}") from e
    if not isinstance(manifest, dict) or "format" not in manifest or "videos" not in manifest:
        raise ManifestError(f"Manifest {manifest_path} lacks 'format' or 'videos'")
    if manifest["format"] != DATASET_FORMAT:
        raise VersionMismatchError(f"Dataset format '{manifest['format']}' is not '{DATASET_FORMAT}'")
    return [_load_entry(directory, entry) for entry in manifest["videos"]]


def _load_entry(directory, entry):
    try:
        video_id, shape, payload = entry["video_id"], tuple(int(x) for x in entry["shape"]), entry["file"]
        annotations = [SegmentAnnotation(int(a["start"]), int(a["end"]), int(a["class"]))
                       for a in entry["annotations"]]
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"Malformed manifest entry {entry!r}: {e}") from e
    if len(shape) != 4 or shape[3] != 3:
        raise ManifestError(f"Video '{video_id}' has shape {shape}, expected [L, H, W, 3]")
    path = os.path.join(directory, payload)
    if not os.path.isfile(path):
        raise MissingPayloadError(f"Payload '{payload}' for video '{video_id}' is missing")
    with open(path, "rb") as f:
        raw = f.read()
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise TruncatedPayloadError(f"Payload '{payload}' has {len(raw)} bytes, expected {expected}")
    frames = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
    return Sample(UntrimmedVideo(video_id, frames), annotations)
