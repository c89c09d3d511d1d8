# ============================================================================
# fusion.py - Long-Short-range Gated Fusion for LosaTAL
#
# Per adapted layer i and range r in {short, long}: a learnable scalar gate
# p^r_i and, when T_i != T_N, a per-clip temporal projection T_i -> T_N. The
# gated contributions are summed per range, added residually to the last
# layer's pooled features F_N^X, concatenated along channels and projected
# back to width C. With zero gates and the averaging Proj init the output is
# exactly F_N^X.
# ============================================================================

import numpy as np

from Core.constants import RANDOM_GATE_RANGE
from Core.errors import ContractError, DimensionError
from Core.module import Module, zeros
from Core.tensor import add, concat, linear, matmul, mul, reshape

RANGES = ("short", "long")


class GateBank(Module):
    def __init__(self, layers, strategy, rng, ranges=RANGES):
        super().__init__()
        self.layers = list(layers)
        self.gates = {}
        for r in ranges:
            root = self.add_child(r, Module())
            for i in self.layers:
                root.add_param(str(i), _gate_init(strategy, rng))
                self.gates[(r, i)] = root._params[str(i)]

    def gate(self, r, i):
        return self.gates[(r, i)]

    def values(self):
        return {key: float(t.data[0]) for key, t in self.gates.items()}


def _gate_init(strategy, rng):
    if strategy == "zero":
        return np.zeros(1)
    if strategy == "ones":
        return np.ones(1)
    if strategy == "random":
        return rng.uniform(-RANDOM_GATE_RANGE, RANDOM_GATE_RANGE, size=1)
    raise ContractError(f"unknown gate init strategy '{strategy}'")


class TemporalProjection(Module):
    # One T_N x T_i map per (range, layer), shared by every clip; identity and
    # parameter-free when T_i == T_N.
    def __init__(self, layers, layer_dims, ranges=RANGES):
        super().__init__()
        self.t_last = layer_dims[-1][0]
        self.extent = {i: layer_dims[i - 1][0] for i in layers}
        self.maps = {}
        for r in ranges:
            root = self.add_child(r, Module())
            for i in layers:
                if self.extent[i] != self.t_last:
                    root.add_param(str(i), _resample_matrix(self.extent[i], self.t_last))
                    self.maps[(r, i)] = root._params[str(i)]

    def __call__(self, r, i, x, num_clips):
        t_i = self.extent[i]
        if x.shape[0] != num_clips * t_i:
            raise DimensionError(f"temporal projection: input {x.shape} is not {num_clips} clips of {t_i} steps")
        if (r, i) not in self.maps:
            return x
        width = x.shape[1]
        h = reshape(x, (num_clips, t_i, width))
        h = matmul(self.maps[(r, i)], h)
        return reshape(h, (num_clips * self.t_last, width))


def _resample_matrix(t_in, t_out):
    # Row j averages the input steps whose centres fall in output step j.
    m = np.zeros((t_out, t_in))
    for k in range(t_in):
        m[min(int((k + 0.5) * t_out / t_in), t_out - 1), k] = 1.0
    for j in range(t_out):
        if m[j].sum() == 0:
            m[j, min(int((j + 0.5) * t_in / t_out), t_in - 1)] = 1.0
    return m / m.sum(axis=1, keepdims=True)


class FusionProj(Module):
    def __init__(self, width):
        super().__init__()
        eye = np.eye(width)
        self.w = self.add_param("w", np.vstack([0.5 * eye, 0.5 * eye]))
        self.b = self.add_param("b", zeros((width,)))


def _gate_and_sum(r, outputs, gates, tp, num_clips, layers=None):
    layers = gates.layers if layers is None else layers
    total = None
    for i in layers:
        if i not in outputs:
            raise ContractError(f"missing {r}-range adapter output for layer {i}")
        term = mul(gates.gate(r, i), tp(r, i, outputs[i], num_clips))
        total = term if total is None else add(total, term)
    if total is None:
        raise ContractError(f"no {r}-range layers to fuse")
    return total


def gate_and_sum_short(short_outputs, gates, tp, num_clips, layers=None):
    # FS^X = sum_i p^sh_i * project(FS^X_i)
    return _gate_and_sum("short", short_outputs, gates, tp, num_clips, layers)


def gate_and_sum_long(long_outputs, gates, tp, num_clips, layers=None):
    # FL^X = sum_i p^lo_i * project(FL^X_i)
    return _gate_and_sum("long", long_outputs, gates, tp, num_clips, layers)


def fuse(fs, fl, f_last, proj):
    # FS' = FS^X + F_N^X, FL' = FL^X + F_N^X, FT = Proj([FS', FL']); a None range contributes zero.
    for label, x in (("FS", fs), ("FL", fl)):
        if x is not None and x.shape != f_last.shape:
            raise DimensionError(f"fuse: {label} shape {x.shape} does not match F_N shape {f_last.shape}")
    fs_res = f_last if fs is None else add(fs, f_last)
    fl_res = f_last if fl is None else add(fl, f_last)
    return linear(concat([fs_res, fl_res], axis=1), proj.w, proj.b)


def sum_fuse(short_outputs, long_outputs, tp, f_last, num_clips):
    # Gate-free variant: FT = F_N^X + sum_i FS^X_i + sum_i FL^X_i
    total = f_last
    for r, outputs in (("short", short_outputs), ("long", long_outputs)):
        for i in sorted(outputs):
            total = add(total, tp(r, i, outputs[i], num_clips))
    return total


class GatedFusion(Module):
    def __init__(self, backbone_cfg, adapter_cfg, rng):
        super().__init__()
        self.layers = adapter_cfg.active_layers(backbone_cfg.num_layers)
        self.gated = adapter_cfg.gated_fusion
        self.ranges = tuple(r for r, on in (("short", adapter_cfg.use_short), ("long", adapter_cfg.use_long)) if on)
        self.tproj = self.add_child("tproj", TemporalProjection(self.layers, backbone_cfg.layer_dims(), self.ranges))
        self.gates = None
        self.proj = None
        if self.gated:
            self.gates = self.add_child("gate", GateBank(self.layers, adapter_cfg.gate_init, rng, self.ranges))
            self.proj = self.add_child("proj", FusionProj(backbone_cfg.channels))

    def forward(self, short_outputs, long_outputs, f_last, num_clips):
        if not self.gated:
            return sum_fuse(short_outputs, long_outputs, self.tproj, f_last, num_clips)
        fs = gate_and_sum_short(short_outputs, self.gates, self.tproj, num_clips) if short_outputs else None
        fl = gate_and_sum_long(long_outputs, self.gates, self.tproj, num_clips) if long_outputs else None
        return fuse(fs, fl, f_last, self.proj)

    def gate_report(self):
        if self.gates is None:
            return []
        return [{"range": r, "layer": i, "value": v} for (r, i), v in sorted(self.gates.values().items())]
