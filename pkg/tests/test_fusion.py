import numpy as np
import pytest

from Core.config import BackboneConfig, RunConfig
from Core.data import generate_video
from Core.errors import ContractError, DimensionError
from Core.fusion import (FusionProj, GateBank, TemporalProjection, fuse, gate_and_sum_long,
                         gate_and_sum_short)
from Core.head import head_loss
from Core.model import LosaModel
from Core.rng import make_rng
from Core.tensor import Tape, Tensor, backward

WIDTH = 6
STEPS = 8


def _parts(rng, layers=(1, 2, 3), strategy="random"):
    dims = [(4, 2, 2, WIDTH)] * (len(layers) + 1)
    gates = GateBank(layers, strategy, rng)
    tp = TemporalProjection(layers, dims)
    outputs = {i: Tensor(rng.normal(size=(STEPS, WIDTH))) for i in layers}
    return gates, tp, outputs


def test_zero_gates_give_zero_sum(rng):
    gates, tp, outputs = _parts(rng, strategy="zero")
    assert np.array_equal(gate_and_sum_short(outputs, gates, tp, 2).data, np.zeros((STEPS, WIDTH)))


def test_single_layer_is_scaled(rng):
    gates, tp, outputs = _parts(rng, layers=(1,))
    gates.gate("short", 1).data[:] = 2.0
    assert np.allclose(gate_and_sum_short(outputs, gates, tp, 2).data, 2.0 * outputs[1].data)


def test_two_layer_example(rng):
    gates, tp, outputs = _parts(rng, layers=(1, 2))
    gates.gate("long", 1).data[:] = 0.5
    gates.gate("long", 2).data[:] = -1.0
    expected = 0.5 * outputs[1].data - outputs[2].data
    assert np.allclose(gate_and_sum_long(outputs, gates, tp, 2).data, expected, atol=1e-12)


def test_gate_and_sum_matches_loop(rng):
    gates, tp, outputs = _parts(rng)
    expected = sum(gates.gate("short", i).data[0] * outputs[i].data for i in (1, 2, 3))
    assert np.allclose(gate_and_sum_short(outputs, gates, tp, 2).data, expected, atol=1e-12)


def test_gate_and_sum_is_linear_in_outputs(rng):
    gates, tp, outputs = _parts(rng)
    scaled = {i: Tensor(3.0 * t.data) for i, t in outputs.items()}
    assert np.allclose(gate_and_sum_long(scaled, gates, tp, 2).data,
                       3.0 * gate_and_sum_long(outputs, gates, tp, 2).data, atol=1e-12)


def test_layer_subset_equals_zeroed_gates(rng):
    gates, tp, outputs = _parts(rng)
    subset = gate_and_sum_short(outputs, gates, tp, 2, layers=[2]).data
    gates.gate("short", 1).data[:] = 0.0
    gates.gate("short", 3).data[:] = 0.0
    assert np.allclose(subset, gate_and_sum_short(outputs, gates, tp, 2).data, atol=1e-12)


def test_missing_layer_output(rng):
    gates, tp, outputs = _parts(rng)
    del outputs[2]
    with pytest.raises(ContractError):
        gate_and_sum_short(outputs, gates, tp, 2)


def test_fuse_zero_inputs_is_exact_identity(rng):
    f_last = Tensor(rng.normal(size=(STEPS, WIDTH)))
    zeros = Tensor(np.zeros((STEPS, WIDTH)))
    assert np.array_equal(fuse(zeros, zeros, f_last, FusionProj(WIDTH)).data, f_last.data)


def test_fuse_averages_the_two_ranges(rng):
    f_last, u, v = (Tensor(rng.normal(size=(STEPS, WIDTH))) for _ in range(3))
    out = fuse(u, v, f_last, FusionProj(WIDTH)).data
    assert np.allclose(out, f_last.data + (u.data + v.data) / 2, atol=1e-12)


def test_fuse_matches_explicit_projection(rng):
    f_last, u, v = (Tensor(rng.normal(size=(STEPS, WIDTH))) for _ in range(3))
    proj = FusionProj(WIDTH)
    proj.w.data = rng.normal(size=(2 * WIDTH, WIDTH))
    proj.b.data = rng.normal(size=WIDTH)
    expected = np.array([np.concatenate([u.data[t] + f_last.data[t], v.data[t] + f_last.data[t]]) @ proj.w.data
                         + proj.b.data for t in range(STEPS)])
    assert np.allclose(fuse(u, v, f_last, proj).data, expected, atol=1e-12)


def test_fuse_shape_mismatch(rng):
    f_last = Tensor(rng.normal(size=(STEPS, WIDTH)))
    with pytest.raises(DimensionError):
        fuse(Tensor(np.ones((STEPS - 1, WIDTH))), f_last, f_last, FusionProj(WIDTH))


def test_temporal_projection_maps_to_last_layer_extent(rng):
    tp = TemporalProjection([1], [(4, 2, 2, WIDTH), (2, 2, 2, WIDTH)])
    out = tp("short", 1, Tensor(rng.normal(size=(12, WIDTH))), 3)
    assert out.shape == (6, WIDTH)
    assert np.allclose(tp.maps[("short", 1)].data.sum(axis=1), 1.0)


def test_zero_init_model_reproduces_last_layer_features():
    cfg = RunConfig()
    model = LosaModel(cfg)
    rng = make_rng(11, "data", 7)
    for n in range(10):
        sample = generate_video(rng, cfg.generator, f"v{n}")
        ft, f_last = model.enhanced_features(model.clips_for(sample.video))
        assert np.array_equal(ft.data, f_last.data)


def test_gradients_reach_gates_projection_and_adapters():
    cfg = RunConfig()
    cfg.backbone.block_temporal_pool = [2, 1, 1]
    cfg.adapters.gate_init = "random"
    cfg.validate()
    model = LosaModel(cfg)
    sample = generate_video(make_rng(0, "data", 9), cfg.generator, "g")
    clips = model.clips_for(sample.video)
    timeline = model.timeline(clips, sample.video.length)
    with Tape() as tape:
        logits, offsets = model.forward(clips)
        loss = head_loss(logits, offsets, sample.annotations, timeline)
    backward(loss, tape)
    named = dict(model.named_parameters())
    assert np.any(named["fusion.gate.short.1"].grad != 0)
    assert np.any(named["fusion.tproj.long.1"].grad != 0)
    assert np.any(named["fusion.proj.w"].grad != 0)
    assert np.any(named["adapter.short.2.w_v"].grad != 0)
    assert all(t.grad is None for t in model.backbone.parameters())


def test_backbone_config_temporal_projection_needed_only_when_extents_differ():
    dims = BackboneConfig(block_temporal_pool=[2, 1, 1]).layer_dims()
    tp = TemporalProjection([1, 2, 3], dims)
    assert sorted(tp.maps) == [("long", 1), ("short", 1)]
