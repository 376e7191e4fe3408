"""Adam optimizer with parameter groups and the step-decay schedule."""

from __future__ import annotations

import numpy as np

from ..ndauto import Tensor


def lr_at_epoch(base_lr: float, epoch: int, total_epochs: int,
                fractions: tuple[float, ...] = (7 / 12, 11 / 12),
                decay: float = 0.1) -> float:
    """Base learning rate decayed at the configured epoch-fraction boundaries."""
    boundaries = [int(np.floor(f * total_epochs)) for f in fractions]
    drops = sum(1 for b in boundaries if epoch >= b)
    return base_lr * decay ** drops


class Adam:
    """Adam over named parameter groups, each with its own learning-rate scale."""

    def __init__(self, groups: list[dict], beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        # groups: [{"params": {name: Tensor}, "lr_scale": float}]
        self.groups = groups
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        for group in groups:
            for name, p in group["params"].items():
                self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)

    def step(self, lr: float):
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for group in self.groups:
            rate = lr * group["lr_scale"]
            for name, p in group["params"].items():
                if p.grad is None:
                    continue
                g = p.grad
                m = self.m[name]
                v = self.v[name]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                if rate != 0.0:
                    p.data = p.data - rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self):
        for group in self.groups:
            for p in group["params"].values():
                p.zero_grad()

    def state_dict(self) -> dict:
        return {
            "step_count": self.step_count,
            "m": {k: v.copy() for k, v in self.m.items()},
            "v": {k: v.copy() for k, v in self.v.items()},
        }

    def load_state_dict(self, state: dict):
        self.step_count = int(state["step_count"])
        for k in self.m:
            self.m[k] = np.asarray(state["m"][k]).astype(self.m[k].dtype, copy=True)
            self.v[k] = np.asarray(state["v"][k]).astype(self.v[k].dtype, copy=True)
