import copy

import numpy as np
import pytest

from Core.checkpoint import save_checkpoint
from Core.config import RunConfig
from Core.data import generate, generate_video
from Core.errors import AuditError, InputError
from Core.model import LosaModel
from Core.rng import make_rng
from Core.tensor import Tape, no_recording
from Core.train import (_check_backbone, evaluate, memory_counts, run_training, train_baseline, train_losa,
                        video_loss)


def test_losa_run_leaves_backbone_untouched(tiny_cfg, tiny_data):
    train_set, test_set = tiny_data
    before = {n: t.data.copy() for n, t in LosaModel(tiny_cfg).backbone.named_parameters()}
    result = train_losa(train_set, tiny_cfg, test_set)
    audit = result.audit
    assert audit.mode == "losa"
    assert audit.backbone_grad_buffers == 0
    assert audit.backbone_unchanged
    for name, t in result.model.backbone.named_parameters():
        assert np.array_equal(t.data, before[name])
    assert [(r["epoch"], r["split"]) for r in result.history] == [(1, "train"), (1, "test"), (2, "train"),
                                                                  (2, "test")]


def test_training_lowers_the_loss(tiny_cfg, tiny_data):
    train_set = tiny_data[0][:2]
    cfg = copy.deepcopy(tiny_cfg)
    cfg.optim.base_lr = 1e-2
    cfg.optim.warmup_epochs = 0
    cfg.optim.total_epochs = 3
    initial = evaluate(LosaModel(cfg), train_set, cfg.eval).loss
    result = train_losa(train_set, cfg)
    assert evaluate(result.model, train_set, cfg.eval).loss < initial


def test_gates_leave_zero_after_training(tiny_cfg, tiny_data):
    result = train_losa(tiny_data[0], tiny_cfg)
    assert any(abs(row["value"]) > 0 for row in result.gate_rows)
    assert {row["range"] for row in result.gate_rows} == {"short", "long"}


def test_head_only_learns_the_head_alone(tiny_cfg, tiny_data):
    result = train_baseline(tiny_data[0], "head_only", tiny_cfg)
    model = result.model
    assert model.adapter is None and model.fusion is None
    learnable = {id(t) for t in model.learnable_parameters()}
    assert learnable == {id(t) for t in model.head.parameters()}
    assert result.audit.backbone_grad_buffers == 0
    head = sum(t.size for t in model.head.parameters())
    assert result.audit.learnable_params == head == result.audit.head_params
    assert result.audit.side_params == 0
    assert result.audit.learnable_fraction == head / (head + result.audit.frozen_params)


def test_full_backbone_trains_the_backbone(tiny_cfg, tiny_data):
    result = train_baseline(tiny_data[0], "full_backbone", tiny_cfg)
    assert result.audit.backbone_grad_buffers > 0
    assert not result.audit.backbone_unchanged
    assert result.audit.tape_nodes_fullbackbone > result.audit.tape_nodes_losa


def test_baseline_mode_is_checked(tiny_cfg, tiny_data):
    with pytest.raises(InputError):
        train_baseline(tiny_data[0], "losa", tiny_cfg)
    with pytest.raises(InputError):
        run_training(tiny_cfg, tiny_data[0], mode="adapters")
    with pytest.raises(InputError):
        run_training(tiny_cfg, [])


def test_backbone_gradient_is_an_audit_failure(tiny_cfg):
    model = LosaModel(tiny_cfg)
    snapshot = {n: t.data.copy() for n, t in model.backbone.named_parameters()}
    param = model.backbone.parameters()[0]
    param.grad = np.zeros_like(param.data)
    with pytest.raises(AuditError):
        _check_backbone(model, snapshot)
    param.grad = None
    param.data = param.data + 1e-9
    with pytest.raises(AuditError):
        _check_backbone(model, snapshot)


def test_same_seed_same_checkpoint(tiny_cfg, tiny_data, tmp_path):
    paths = []
    for run in range(2):
        result = train_losa(tiny_data[0], tiny_cfg)
        path = str(tmp_path / f"run{run}.ckpt")
        save_checkpoint(result.model, path, tiny_cfg.seed)
        paths.append(path)
    with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
        assert a.read() == b.read()


def test_default_config_parameter_budget():
    groups = LosaModel(RunConfig()).parameter_groups()
    learnable = sum(t.size for t in groups["backbone_side"] + groups["head"])
    frozen = sum(t.size for t in groups["frozen"])
    assert learnable / (learnable + frozen) <= 0.20


def test_tape_node_ordering_on_a_long_video():
    cfg = RunConfig()
    gen = copy.deepcopy(cfg.generator)
    gen.length_min = gen.length_max = 256
    sample = generate_video(make_rng(0, "data", 2), gen, "long")
    counts = memory_counts(cfg, sample)
    head_only, losa, full = (counts[m][0] for m in ("head_only", "losa", "full_backbone"))
    assert head_only <= losa < full
    assert 2 * losa <= full
    assert losa < counts["in_backbone"][0]
    assert counts["losa"][1] < counts["in_backbone"][1]


def test_tape_node_ordering_on_small_batches(tiny_cfg, tiny_data):
    for sample in tiny_data[0]:
        counts = memory_counts(tiny_cfg, sample)
        assert counts["head_only"][0] <= counts["losa"][0] < counts["full_backbone"][0]


def test_evaluate_without_ground_truth_has_no_map(tiny_cfg, tiny_data):
    sample = copy.deepcopy(tiny_data[0][0])
    sample.annotations = []
    result = evaluate(LosaModel(tiny_cfg), [sample], tiny_cfg.eval)
    assert result.map_result is None and np.isnan(result.avg_map)


@pytest.mark.slow
def test_gates_evolve_on_the_default_dataset():
    cfg = RunConfig()
    cfg.generator.num_videos = 40
    cfg.optim.total_epochs = 6
    cfg.optim.warmup_epochs = 1
    result = train_losa(generate(cfg.generator, "train"), cfg)
    assert max(abs(row["value"]) for row in result.gate_rows) > 0.01


@pytest.mark.slow
def test_losa_beats_head_only_on_long_range_pairs():
    margins = []
    for seed in (0, 1, 2):
        cfg = RunConfig(seed=seed)
        train_set = generate(cfg.generator, "train")
        test_set = generate(cfg.generator, "test")
        losa = evaluate(train_losa(train_set, cfg).model, test_set, cfg.eval).avg_map
        head = evaluate(train_baseline(train_set, "head_only", cfg).model, test_set, cfg.eval).avg_map
        margins.append(losa - head)
    assert np.mean(margins) >= 0.03


def test_in_backbone_trains_inner_adapters_behind_a_frozen_backbone(tiny_cfg, tiny_data):
    initial = LosaModel(tiny_cfg, mode="in_backbone")
    before = {n: t.data.copy() for n, t in initial.backbone.named_parameters()}
    result = train_baseline(tiny_data[0], "in_backbone", tiny_cfg)
    model, audit = result.model, result.audit
    assert audit.mode == "in_backbone"
    assert audit.backbone_grad_buffers == 0 and audit.backbone_unchanged
    for name, t in model.backbone.named_parameters():
        assert np.array_equal(t.data, before[name])
    learnable = {id(t) for t in model.learnable_parameters()}
    assert learnable == {id(t) for t in list(model.inner.parameters()) + list(model.head.parameters())}
    assert audit.learnable_params == audit.side_params + audit.head_params
    assert audit.side_params == sum(t.size for t in model.inner.parameters())
    start = dict(initial.inner.named_parameters())
    assert any(not np.array_equal(t.data, start[n].data) for n, t in model.inner.named_parameters())


def test_untrained_in_backbone_model_matches_head_only(tiny_cfg, tiny_data):
    sample = tiny_data[0][0]
    logits = []
    for mode in ("head_only", "in_backbone"):
        model = LosaModel(tiny_cfg, mode=mode)
        with no_recording():
            logits.append(model.forward(model.clips_for(sample.video))[0].data)
    assert np.array_equal(logits[0], logits[1])


def test_in_backbone_records_every_block(tiny_cfg, tiny_data):
    sample = tiny_data[0][0]
    convs = {}
    for mode in ("losa", "in_backbone"):
        model = LosaModel(tiny_cfg, mode=mode)
        with Tape() as tape:
            video_loss(model, sample)
        convs[mode] = tape.count_by_op().get("conv2d", 0)
    blocks = tiny_cfg.backbone.num_layers - 1
    assert convs["losa"] == 0
    assert convs["in_backbone"] == blocks * len(model.clips_for(sample.video))


def test_losa_audit_counts_side_and_head(tiny_cfg, tiny_data):
    audit = train_losa(tiny_data[0], tiny_cfg).audit
    groups = LosaModel(tiny_cfg).parameter_groups()
    assert audit.side_params == sum(t.size for t in groups["backbone_side"])
    assert audit.head_params == sum(t.size for t in groups["head"])
    assert audit.learnable_params == audit.side_params + audit.head_params
    assert audit.learnable_fraction == audit.learnable_params / (audit.learnable_params + audit.frozen_params)


def test_default_audit_parameter_counts():
    groups = LosaModel(RunConfig()).parameter_groups()
    side, head, frozen = (sum(t.size for t in groups[g]) for g in ("backbone_side", "head", "frozen"))
    assert (side, head, frozen) == (32166, 6406, 155264)
    assert round((side + head) / (side + head + frozen), 4) == 0.1990
    head_only = LosaModel(RunConfig(), mode="head_only").parameter_groups()
    assert sum(t.size for t in head_only["head"] + head_only["backbone_side"]) == 6406
