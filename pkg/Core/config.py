# ============================================================================
# config.py - Run configuration for LosaTAL
#
# A run is described by one JSON document with nested sections that map onto
# the dataclasses below. Values come from (lowest to highest priority): the
# dataclass defaults in Core/constants.py, the JSON file, the LOSA_SEED
# environment variable (.env supported), and explicit CLI flag overrides.
# Every validate() raises ConfigError naming the offending field.
# ============================================================================

import dataclasses
import json
import os
from dataclasses import dataclass, field

from dotenv import load_dotenv

from Core import constants as C
from Core.errors import ConfigError

load_dotenv()


def _default_patterns():
    return [
        {"kind": "square", "velocity": [0, 1]},
        {"kind": "oscillation", "frequency": 0.125},
        {"kind": "square", "velocity": [1, 0]},
        {"kind": "square", "velocity": [1, 0]},
    ]


@dataclass
class ClipSpec:
    clip_len: int = C.CLIP_LEN
    stride: int = C.CLIP_STRIDE
    pad_mode: str = "repeat_last"

    def validate(self, prefix="clips"):
        _require(self.clip_len >= 1, f"{prefix}.clip_len", "must be >= 1")
        _require(1 <= self.stride <= self.clip_len, f"{prefix}.stride", "must satisfy 1 <= stride <= clip_len")
        _require(self.pad_mode == "repeat_last", f"{prefix}.pad_mode", "only 'repeat_last' is supported")


@dataclass
class BackboneConfig:
    num_layers: int = C.NUM_LAYERS
    clip_len: int = C.CLIP_LEN
    frame_height: int = C.FRAME_SIZE
    frame_width: int = C.FRAME_SIZE
    in_channels: int = C.FRAME_CHANNELS
    channels: int = C.FEATURE_CHANNELS
    feature_size: int = C.FEATURE_SIZE
    temporal_pool: int = C.TEMPORAL_POOL
    expansion: int = C.BLOCK_EXPANSION
    block_temporal_pool: list = None
    frozen: bool = True

    def __post_init__(self):
        if self.block_temporal_pool is None:
            self.block_temporal_pool = [1] * max(self.num_layers - 1, 0)

    def layer_dims(self):
        # (T_i, H_i, W_i, C_i) for layers 1..N
        t = self.clip_len // self.temporal_pool
        dims = [(t, self.feature_size, self.feature_size, self.channels)]
        for pool in self.block_temporal_pool:
            t //= pool
            dims.append((t, self.feature_size, self.feature_size, self.channels))
        return dims

    def validate(self, prefix="backbone"):
        _require(self.num_layers >= 2, f"{prefix}.num_layers", "must be >= 2")
        for name in ("clip_len", "frame_height", "frame_width", "in_channels", "channels",
                     "feature_size", "temporal_pool", "expansion"):
            _require(getattr(self, name) >= 1, f"{prefix}.{name}", "must be >= 1")
        _require(max(self.frame_height, self.frame_width) <= 32, f"{prefix}.frame_height",
                 "spatial resolution above 32x32 is not supported")
        _require(self.frame_height % self.feature_size == 0 and self.frame_width % self.feature_size == 0,
                 f"{prefix}.feature_size", "must divide the frame height and width")
        _require(self.clip_len % self.temporal_pool == 0, f"{prefix}.temporal_pool", "must divide clip_len")
        _require(len(self.block_temporal_pool) == self.num_layers - 1, f"{prefix}.block_temporal_pool",
                 "needs one entry per block (num_layers - 1)")
        t = self.clip_len // self.temporal_pool
        for pool in self.block_temporal_pool:
            _require(pool >= 1 and t % pool == 0, f"{prefix}.block_temporal_pool",
                     f"pool {pool} does not divide temporal extent {t}")
            t //= pool


@dataclass
class AdapterConfig:
    n_heads: int = C.N_HEADS
    layers: list = None
    gate_init: str = "zero"
    use_short: bool = True
    use_long: bool = True
    gated_fusion: bool = True

    def validate(self, num_layers, channels, prefix="adapters"):
        _require(self.n_heads >= 1, f"{prefix}.n_heads", "must be >= 1")
        _require(channels % self.n_heads == 0, f"{prefix}.n_heads",
                 f"must divide the model width {channels}")
        _require(self.gate_init in C.GATE_STRATEGIES, f"{prefix}.gate_init",
                 f"must be one of {', '.join(C.GATE_STRATEGIES)}")
        _require(self.use_short or self.use_long, f"{prefix}.use_long",
                 "at least one of use_short and use_long must be enabled")
        if self.layers is not None:
            _require(len(self.layers) >= 1, f"{prefix}.layers", "must not be empty")
            for i in self.layers:
                _require(1 <= int(i) <= num_layers - 1, f"{prefix}.layers",
                         f"layer {i} is not an intermediate layer in 1..{num_layers - 1}")

    def active_layers(self, num_layers):
        if self.layers is None:
            return list(range(1, num_layers))
        return sorted({int(i) for i in self.layers})


@dataclass
class HeadConfig:
    num_classes: int = C.NUM_CLASSES
    tower: int = C.HEAD_TOWER
    kernel: int = C.HEAD_KERNEL
    score_threshold: float = C.SCORE_THRESHOLD
    nms_iou: float = C.NMS_IOU
    max_detections: int = C.MAX_DETECTIONS

    def validate(self, prefix="head"):
        _require(self.num_classes >= 1, f"{prefix}.num_classes", "must be >= 1")
        _require(self.tower >= 0, f"{prefix}.tower", "must be >= 0")
        _require(self.kernel >= 1 and self.kernel % 2 == 1, f"{prefix}.kernel", "must be odd")
        _require(0.0 <= self.score_threshold < 1.0, f"{prefix}.score_threshold", "must be in [0, 1)")
        _require(0.0 < self.nms_iou < 1.0, f"{prefix}.nms_iou", "must be in (0, 1)")
        _require(self.max_detections >= 1, f"{prefix}.max_detections", "must be >= 1")


@dataclass
class OptimConfig:
    base_lr: float = C.BASE_LR
    weight_decay: float = C.WEIGHT_DECAY
    betas: tuple = C.BETAS
    eps: float = C.ADAM_EPS
    warmup_epochs: float = C.WARMUP_EPOCHS
    total_epochs: int = C.TOTAL_EPOCHS
    schedule: str = "cosine"

    def validate(self, prefix="optim"):
        _require(self.base_lr > 0, f"{prefix}.base_lr", "must be > 0")
        _require(self.weight_decay >= 0, f"{prefix}.weight_decay", "must be >= 0")
        _require(len(self.betas) == 2 and all(0.0 <= b < 1.0 for b in self.betas), f"{prefix}.betas",
                 "must be two values in [0, 1)")
        _require(self.eps > 0, f"{prefix}.eps", "must be > 0")
        _require(self.total_epochs >= 1, f"{prefix}.total_epochs", "must be >= 1")
        _require(0 <= self.warmup_epochs < self.total_epochs, f"{prefix}.warmup_epochs",
                 "must be >= 0 and below total_epochs")
        _require(self.schedule == "cosine", f"{prefix}.schedule", "only 'cosine' is supported")


@dataclass
class EvalConfig:
    tiou_thresholds: tuple = C.THUMOS_TIOU

    @classmethod
    def preset(cls, name):
        presets = {"thumos": C.THUMOS_TIOU, "anet": C.ANET_TIOU}
        if name not in presets:
            raise ConfigError("eval.preset", f"unknown preset '{name}'")
        return cls(tiou_thresholds=presets[name])

    def validate(self, prefix="eval"):
        t = list(self.tiou_thresholds)
        _require(len(t) >= 1, f"{prefix}.tiou_thresholds", "must not be empty")
        _require(all(0.0 < x <= 1.0 for x in t), f"{prefix}.tiou_thresholds", "must lie in (0, 1]")
        _require(all(a < b for a, b in zip(t, t[1:])), f"{prefix}.tiou_thresholds",
                 "must be sorted strictly ascending")


@dataclass
class GeneratorConfig:
    num_videos: int = C.TRAIN_VIDEOS
    num_test_videos: int = C.TEST_VIDEOS
    length_min: int = 64
    length_max: int = 256
    num_classes: int = C.NUM_CLASSES
    frame_size: int = C.FRAME_SIZE
    channels: int = C.FRAME_CHANNELS
    noise_sigma: float = 0.05
    background: float = 0.3
    amplitude: float = 0.2
    square_size: int = 4
    segments_min: int = 1
    segments_max: int = 4
    segment_len_min: int = 8
    segment_len_max: int = 96
    class_patterns: list = field(default_factory=_default_patterns)
    long_range_pairs: list = field(default_factory=lambda: [[2, 3]])
    cue_len: int = 4
    cue_size: int = 4
    clip_len: int = C.CLIP_LEN
    seed: int = C.DEFAULT_SEED

    def validate(self, prefix="generator"):
        _require(self.num_videos >= 1, f"{prefix}.num_videos", "must be >= 1")
        _require(self.num_test_videos >= 1, f"{prefix}.num_test_videos", "must be >= 1")
        _require(1 <= self.length_min <= self.length_max, f"{prefix}.length_min",
                 "must satisfy 1 <= length_min <= length_max")
        _require(self.length_max <= C.MAX_VIDEO_LENGTH, f"{prefix}.length_max",
                 f"must be <= {C.MAX_VIDEO_LENGTH}")
        _require(self.num_classes >= 1, f"{prefix}.num_classes", "must be >= 1")
        _require(len(self.class_patterns) == self.num_classes, f"{prefix}.class_patterns",
                 "needs one pattern per class")
        for k, pattern in enumerate(self.class_patterns):
            kind = pattern.get("kind")
            _require(kind in ("square", "oscillation"), f"{prefix}.class_patterns[{k}].kind",
                     "must be 'square' or 'oscillation'")
            if kind == "square":
                _require(len(pattern.get("velocity", [])) == 2, f"{prefix}.class_patterns[{k}].velocity",
                         "needs two components")
            else:
                _require(float(pattern.get("frequency", 0)) > 0, f"{prefix}.class_patterns[{k}].frequency",
                         "must be > 0")
        _require(self.noise_sigma >= 0, f"{prefix}.noise_sigma", "must be >= 0")
        _require(1 <= self.segments_min <= self.segments_max, f"{prefix}.segments_min",
                 "must satisfy 1 <= segments_min <= segments_max")
        _require(1 <= self.segment_len_min <= self.segment_len_max, f"{prefix}.segment_len_min",
                 "must satisfy 1 <= segment_len_min <= segment_len_max")
        _require(1 <= self.square_size <= self.frame_size, f"{prefix}.square_size", "must fit in a frame")
        _require(1 <= self.cue_size <= self.frame_size, f"{prefix}.cue_size", "must fit in a frame")
        _require(self.cue_len >= 1, f"{prefix}.cue_len", "must be >= 1")
        _require(self.channels == 3, f"{prefix}.channels", "frames are RGB")
        seen = set()
        for pair in self.long_range_pairs:
            _require(len(pair) == 2 and pair[0] != pair[1], f"{prefix}.long_range_pairs",
                     f"pair {pair} must name two distinct classes")
            for k in pair:
                _require(0 <= k < self.num_classes, f"{prefix}.long_range_pairs",
                         f"class {k} out of range")
                _require(k not in seen, f"{prefix}.long_range_pairs", f"class {k} appears in two pairs")
                seen.add(k)
        _require(self.seed >= 0, f"{prefix}.seed", "must be >= 0")


@dataclass
class TrainConfig:
    mode: str = "losa"
    augment: bool = True
    eval_every: int = 1

    def validate(self, prefix="train"):
        _require(self.mode in C.TRAIN_MODES, f"{prefix}.mode",
                 f"must be one of {', '.join(C.TRAIN_MODES)}")
        _require(self.eval_every >= 0, f"{prefix}.eval_every", "must be >= 0")


@dataclass
class PathsConfig:
    # Dataset dirs default to <output_dir>/data/{train,test}
    train_dir: str = None
    test_dir: str = None
    output_dir: str = "outputs"

    def split_dir(self, split):
        explicit = self.train_dir if split == "train" else self.test_dir
        return explicit or os.path.join(self.output_dir, "data", split)


@dataclass
class RunConfig:
    seed: int = C.DEFAULT_SEED
    ablation_seeds: list = field(default_factory=lambda: [0, 1, 2])
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    clips: ClipSpec = field(default_factory=ClipSpec)
    adapters: AdapterConfig = field(default_factory=AdapterConfig)
    head: HeadConfig = field(default_factory=HeadConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def validate(self):
        _require(isinstance(self.seed, int) and self.seed >= 0, "seed", "must be a non-negative integer")
        _require(len(self.ablation_seeds) >= 1, "ablation_seeds", "must not be empty")
        self.backbone.validate()
        self.clips.validate()
        self.adapters.validate(self.backbone.num_layers, self.backbone.channels)
        self.head.validate()
        self.optim.validate()
        self.eval.validate()
        self.generator.validate()
        self.train.validate()
        _require(self.backbone.clip_len == self.clips.clip_len, "backbone.clip_len",
                 "must equal clips.clip_len")
        _require(self.generator.frame_size == self.backbone.frame_height == self.backbone.frame_width,
                 "generator.frame_size", "must match the backbone frame size")
        _require(self.generator.channels == self.backbone.in_channels, "generator.channels",
                 "must match backbone.in_channels")
        _require(self.head.num_classes == self.generator.num_classes, "head.num_classes",
                 "must equal generator.num_classes")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def _require(condition, field_name, message):
    if not condition:
        raise ConfigError(field_name, message)


_SECTIONS = {
    "backbone": BackboneConfig, "clips": ClipSpec, "adapters": AdapterConfig, "head": HeadConfig,
    "optim": OptimConfig, "eval": EvalConfig, "generator": GeneratorConfig, "train": TrainConfig,
    "paths": PathsConfig,
}


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(prefix, "must be an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{prefix}.{key}", "unknown key")
        if isinstance(known[key].default, tuple) and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(prefix, str(e)) from e


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        elif key in ("seed", "ablation_seeds"):
            kwargs[key] = value
        else:
            raise ConfigError(key, "unknown key")
    return RunConfig(**kwargs)


def load_config(path=None, overrides=None):
    # Build a validated RunConfig from an optional JSON file, env and flag overrides.
    data = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"invalid JSON in {path}: {e}") from e
    cfg = config_from_dict(data)
    env_seed = os.getenv("LOSA_SEED")
    if env_seed not in (None, ""):
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError("LOSA_SEED", f"'{env_seed}' is not an integer") from None
        # Same reach as --seed: the root seed and the dataset generator
        cfg.seed = cfg.generator.seed = seed
    apply_overrides(cfg, overrides or {})
    return cfg.validate()


def apply_overrides(cfg, overrides):
    # overrides: {"adapters.gate_init": "ones", "seed": 3, ...}; None values are skipped.
    for dotted, value in overrides.items():
        if value is None:
            continue
        target = cfg
        parts = dotted.split(".")
        for part in parts[:-1]:
            if not hasattr(target, part):
                raise ConfigError(dotted, "unknown key")
            target = getattr(target, part)
        if not hasattr(target, parts[-1]):
            raise ConfigError(dotted, "unknown key")
        setattr(target, parts[-1], value)
    return cfg


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cfg.to_dict(), f, indent=2, sort_keys=True)
