# module.py - Parameter containers for LosaTAL
# A Module owns named parameters and named child modules; dotted paths built
# from those names ("adapter.short.1.w_q") are the checkpoint keys.

import math

import numpy as np

from Core.tensor import parameter


class Module:
    def __init__(self):
        self._params = {}
        self._children = {}

    def add_param(self, name, data):
        tensor = parameter(data)
        self._params[name] = tensor
        return tensor

    def add_child(self, name, module):
        self._children[str(name)] = module
        return module

    def named_parameters(self, prefix=""):
        for name, tensor in self._params.items():
            yield f"{prefix}{name}", tensor
        for name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    def num_params(self):
        return int(sum(t.size for t in self.parameters()))

    def set_trainable(self, flag):
        for tensor in self.parameters():
            tensor.requires_grad = bool(flag)
            if not flag:
                tensor.grad = None


def uniform_init(rng, shape, fan_in):
    # Scaled-uniform (fan-in) initialization.
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def zeros(shape):
    return np.zeros(shape, dtype=np.float64)
