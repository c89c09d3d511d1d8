# ============================================================================
# gradcheck.py - Central finite-difference checks for every differentiable op
#
# Each case builds random inputs in [-1, 1] from the "gradcheck" stream and
# reduces the op output to a scalar with a fixed random weighting. The tape
# gradient is compared with central differences using
#     rel_err = |a - n| / max(|a|, |n|, 1e-12)   (2-norms over all inputs).
# The suite also checks the adapter + fusion + head composite on a model small
# enough to difference every learnable parameter.
# ============================================================================

from dataclasses import dataclass

import numpy as np

from Core import tensor as T
from Core.config import RunConfig
from Core.constants import FD_EPS, FD_TOL
from Core.data import SegmentAnnotation, UntrimmedVideo
from Core.head import head_loss
from Core.model import LosaModel
from Core.rng import make_rng


@dataclass
class GradcheckResult:
    name: str
    rel_err: float
    passed: bool


def relative_error(analytic, numeric):
    a, n = np.concatenate([x.ravel() for x in analytic]), np.concatenate([x.ravel() for x in numeric])
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), 1e-12))


def check_function(name, fn, inputs, rng, eps=FD_EPS, tol=FD_TOL, constants=()):
    # fn(*tensors) -> Tensor; inputs are differenced, constants are passed through untouched
    arrays = [np.array(x, dtype=np.float64) for x in inputs]
    probe = fn(*[T.Tensor(a) for a in arrays], *constants)
    weights = rng.uniform(-1.0, 1.0, size=probe.shape)

    def scalar(values):
        return float(np.sum(fn(*[T.Tensor(a) for a in values], *constants).data * weights))

    leaves = [T.parameter(a) for a in arrays]
    with T.Tape() as tape:
        loss = T.reduce_sum(T.mul(fn(*leaves, *constants), T.Tensor(weights)))
    T.backward(loss, tape)
    analytic = [leaf.grad for leaf in leaves]

    numeric = []
    for k, base in enumerate(arrays):
        grad = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[k][idx] += eps
            minus[k][idx] -= eps
            grad[idx] = (scalar(plus) - scalar(minus)) / (2 * eps)
        numeric.append(grad)
    err = relative_error(analytic, numeric)
    return GradcheckResult(name, err, err < tol)


def _u(rng, *shape):
    return rng.uniform(-1.0, 1.0, size=shape)


def op_cases(rng):
    # name -> (fn, inputs, constants); one case per registered Function
    targets = T.Tensor((rng.uniform(size=(3, 4)) > 0.5).astype(np.float64))
    return {
        "add": (T.add, [_u(rng, 3, 4), _u(rng, 4)], ()),
        "sub": (T.sub, [_u(rng, 3, 4), _u(rng, 3, 4)], ()),
        "mul": (T.mul, [_u(rng, 3, 4), _u(rng, 3, 1)], ()),
        "div": (T.div, [_u(rng, 3, 4), 1.5 + rng.uniform(size=(3, 4))], ()),
        "scale": (lambda x: T.scale(x, 0.7), [_u(rng, 3, 4)], ()),
        "minimum": (T.minimum, [_u(rng, 3, 4), _u(rng, 3, 4)], ()),
        "sigmoid": (T.sigmoid, [_u(rng, 3, 4)], ()),
        "softplus": (T.softplus, [_u(rng, 3, 4)], ()),
        "gelu": (T.gelu, [_u(rng, 3, 4)], ()),
        "bce_with_logits": (T.bce_with_logits, [_u(rng, 3, 4)], (targets,)),
        "reshape": (lambda x: T.reshape(x, (2, 6)), [_u(rng, 3, 4)], ()),
        "transpose": (lambda x: T.transpose(x, (2, 0, 1)), [_u(rng, 2, 3, 4)], ()),
        "concat": (lambda a, b: T.concat([a, b], axis=0), [_u(rng, 2, 3), _u(rng, 4, 3)], ()),
        "slice": (lambda x: T.slice_axis(x, 1, 4, axis=0), [_u(rng, 5, 3)], ()),
        "index_rows": (lambda x: T.index_rows(x, [0, 2, 2, 4]), [_u(rng, 5, 3)], ()),
        "sum": (lambda x: T.reduce_sum(x, axis=1), [_u(rng, 3, 4)], ()),
        "mean": (lambda x: T.mean(x, axis=(0, 2)), [_u(rng, 2, 3, 4)], ()),
        "matmul": (T.matmul, [_u(rng, 2, 3, 4), _u(rng, 2, 4, 5)], ()),
        "linear": (T.linear, [_u(rng, 2, 3, 4), _u(rng, 4, 5), _u(rng, 5)], ()),
        "layer_norm": (T.layer_norm, [_u(rng, 3, 6), _u(rng, 6), _u(rng, 6)], ()),
        "softmax_rows": (T.softmax_rows, [_u(rng, 3, 5)], ()),
        "conv1d": (T.conv1d, [_u(rng, 6, 3), _u(rng, 3, 3, 2), _u(rng, 2)], ()),
        "conv2d": (T.conv2d, [_u(rng, 1, 5, 5, 2), _u(rng, 3, 3, 2, 3), _u(rng, 3)], ()),
        "depthwise_conv2d": (T.depthwise_conv2d, [_u(rng, 2, 4, 4, 3), _u(rng, 3, 3, 3), _u(rng, 3)], ()),
    }


def composite_config(seed):
    # Tiny LoSA model whose learnable parameters stay well under a thousand.
    cfg = RunConfig(seed=seed)
    cfg.backbone.num_layers = 3
    cfg.backbone.block_temporal_pool = [2, 1]
    cfg.backbone.clip_len = cfg.clips.clip_len = cfg.clips.stride = 4
    cfg.backbone.frame_height = cfg.backbone.frame_width = cfg.generator.frame_size = 4
    cfg.backbone.feature_size = 2
    cfg.backbone.channels = 4
    cfg.backbone.expansion = 1
    cfg.adapters.n_heads = 2
    cfg.adapters.gate_init = "random"
    cfg.head.num_classes = cfg.generator.num_classes = 2
    cfg.generator.class_patterns = cfg.generator.class_patterns[:2]
    cfg.generator.long_range_pairs = []
    cfg.head.tower = 1
    return cfg.validate()


def check_composite(seed, eps=FD_EPS, tol=FD_TOL):
    cfg = composite_config(seed)
    rng = make_rng(seed, "gradcheck", 1)
    model = LosaModel(cfg, mode="losa")
    # Perturb the averaging Proj so every path carries a distinct gradient.
    model.fusion.proj.w.data += 0.1 * rng.uniform(-1.0, 1.0, size=model.fusion.proj.w.shape)
    video = UntrimmedVideo("gradcheck", rng.uniform(size=(8, 4, 4, 3)))
    annotations = [SegmentAnnotation(1, 7, 1)]
    clips = model.clips_for(video)
    timeline = model.timeline(clips, video.length)
    named = [(name, t) for name, t in model.named_parameters() if t.requires_grad]

    def loss_value():
        logits, offsets = model.forward(clips)
        return head_loss(logits, offsets, annotations, timeline)

    for _, t in named:
        t.grad = None
    with T.Tape() as tape:
        loss = loss_value()
    T.backward(loss, tape)
    analytic = [t.grad.copy() for _, t in named]

    numeric = []
    for _, t in named:
        grad = np.zeros_like(t.data)
        for idx in np.ndindex(t.shape):
            keep = t.data[idx]
            t.data[idx] = keep + eps
            up = loss_value().item()
            t.data[idx] = keep - eps
            down = loss_value().item()
            t.data[idx] = keep
            grad[idx] = (up - down) / (2 * eps)
        numeric.append(grad)
    err = relative_error(analytic, numeric)
    return GradcheckResult("composite", err, err < tol)


def run_suite(seed=0, eps=FD_EPS, tol=FD_TOL, include_composite=True):
    # Yields one GradcheckResult per op, then the composite.
    rng = make_rng(seed, "gradcheck")
    for name, (fn, inputs, constants) in op_cases(rng).items():
        yield check_function(name, fn, inputs, rng, eps=eps, tol=tol, constants=constants)
    if include_composite:
        yield check_composite(seed, eps=eps, tol=tol)
