"""Optimizers.  ``step`` never mutates its inputs; it returns a fresh ParamStore."""

from __future__ import annotations

import numpy as np

from .network import ParamStore


def _check(params, grads):
    if params.keys() != grads.keys():
        raise ValueError(f"gradient names {sorted(grads)} do not match parameters {sorted(params)}")
    for k, v in params.items():
        if grads[k].shape != v.shape:
            raise ValueError(f"gradient for {k} has shape {grads[k].shape}, expected {v.shape}")


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: ParamStore, grads: ParamStore) -> ParamStore:
        _check(params, grads)
        return ParamStore({k: v - v.dtype.type(self.lr) * grads[k] for k, v in params.items()})


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: ParamStore, grads: ParamStore) -> ParamStore:
        _check(params, grads)
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        out = ParamStore()
        for k, w in params.items():
            g = grads[k]
            m = self.m.get(k, np.zeros_like(w))
            v = self.v.get(k, np.zeros_like(w))
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            self.m[k], self.v[k] = m, v
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            out[k] = (w - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(w.dtype)
        return out


def make_optimizer(name: str, lr: float):
    if name == "adam":
        return Adam(lr)
    if name == "sgd":
        return SGD(lr)
    raise ValueError(f"unknown optimizer {name!r}")


def apply_gradients(params: ParamStore, grads: ParamStore, optimizer) -> ParamStore:
    return optimizer.step(params, grads)
