# ============================================================================
# optim.py - AdamW with decoupled weight decay and the warmup-cosine schedule
# ============================================================================

import math
from dataclasses import dataclass, field

import numpy as np

from Core.errors import AuditError


@dataclass
class AdamWState:
    step: int = 0
    exp_avg: dict = field(default_factory=dict)
    exp_avg_sq: dict = field(default_factory=dict)


def adamw_step(params, grads, state, lr_t, cfg):
    # params / grads: {path: ndarray}; params are updated in place
    beta1, beta2 = cfg.betas
    state.step += 1
    bias_correction1 = 1.0 - beta1 ** state.step
    bias_correction2 = 1.0 - beta2 ** state.step
    step_size = lr_t * math.sqrt(bias_correction2) / bias_correction1
    for path, p in params.items():
        grad = grads.get(path)
        if grad is None:
            raise AuditError(f"learnable parameter '{path}' has no gradient")
        if path not in state.exp_avg:
            state.exp_avg[path] = np.zeros_like(p)
            state.exp_avg_sq[path] = np.zeros_like(p)
        exp_avg, exp_avg_sq = state.exp_avg[path], state.exp_avg_sq[path]

        # Decoupled weight decay comes first
        if cfg.weight_decay != 0.0:
            p -= lr_t * cfg.weight_decay * p

        exp_avg *= beta1
        exp_avg += (1.0 - beta1) * grad
        exp_avg_sq *= beta2
        exp_avg_sq += (1.0 - beta2) * grad * grad

        # eps-hat form: eps is added to sqrt(v), not sqrt(v_hat) as torch.optim.AdamW does
        p -= step_size * exp_avg / (np.sqrt(exp_avg_sq) + cfg.eps)
    return params, state


class AdamW:
    def __init__(self, named_params, cfg):
        self.params = dict(named_params)
        self.cfg = cfg
        self.state = AdamWState()

    def step(self, lr_t):
        params = {path: t.data for path, t in self.params.items()}
        grads = {path: t.grad for path, t in self.params.items()}
        adamw_step(params, grads, self.state, lr_t, self.cfg)

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None


def lr_at(epoch, cfg):
    # Linear warmup from 0 to base_lr, then cosine decay to 0 at total_epochs.
    if cfg.warmup_epochs > 0 and epoch < cfg.warmup_epochs:
        return cfg.base_lr * epoch / cfg.warmup_epochs
    if epoch >= cfg.total_epochs:
        return 0.0
    frac = (epoch - cfg.warmup_epochs) / (cfg.total_epochs - cfg.warmup_epochs)
    return 0.5 * (1.0 + math.cos(math.pi * frac)) * cfg.base_lr
