import numpy as np
import pytest

from Core.config import RunConfig, save_config
from Core.data import generate


def make_tiny_config(seed=0):
    # Small enough that a training epoch over a handful of videos takes well under a second.
    cfg = RunConfig(seed=seed)
    cfg.backbone.num_layers = 3
    cfg.backbone.block_temporal_pool = [1, 1]
    cfg.backbone.clip_len = cfg.clips.clip_len = cfg.clips.stride = cfg.generator.clip_len = 8
    cfg.backbone.frame_height = cfg.backbone.frame_width = cfg.generator.frame_size = 8
    cfg.backbone.feature_size = 2
    cfg.backbone.channels = 8
    cfg.backbone.expansion = 2
    cfg.adapters.n_heads = 2
    cfg.generator.num_videos = 4
    cfg.generator.num_test_videos = 2
    cfg.generator.length_min = 24
    cfg.generator.length_max = 48
    cfg.generator.segments_max = 2
    cfg.generator.segment_len_min = 4
    cfg.generator.segment_len_max = 12
    cfg.generator.square_size = 2
    cfg.generator.cue_len = 2
    cfg.generator.cue_size = 2
    cfg.optim.total_epochs = 2
    cfg.optim.warmup_epochs = 1
    cfg.train.augment = False
    cfg.ablation_seeds = [0]
    return cfg.validate()


@pytest.fixture
def tiny_cfg(tmp_path):
    cfg = make_tiny_config()
    cfg.paths.output_dir = str(tmp_path / "out")
    return cfg


@pytest.fixture
def tiny_data(tiny_cfg):
    return generate(tiny_cfg.generator, "train"), generate(tiny_cfg.generator, "test", num_videos=2)


@pytest.fixture
def tiny_config_file(tiny_cfg, tmp_path):
    path = tmp_path / "tiny.json"
    save_config(tiny_cfg, str(path))
    return str(path)


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    monkeypatch.delenv("LOSA_SEED", raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
