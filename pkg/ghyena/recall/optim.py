import math
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from ghyena.autodiff.params import ParamStore
from ghyena.core.errors import ShapeError
from ghyena.schemas.config import TrainConfig


def cosine_lr(epoch: int, cfg: TrainConfig) -> float:
    """Linear warmup to ``base_lr`` then half-cosine decay towards zero."""
    if epoch < cfg.warmup_epochs:
        return cfg.base_lr * (epoch + 1) / cfg.warmup_epochs
    span = cfg.epochs - cfg.warmup_epochs
    return cfg.base_lr * 0.5 * (1.0 + math.cos(math.pi * (epoch - cfg.warmup_epochs) / span))


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def state_dict(self, prefix: str = "adam.") -> Dict[str, np.ndarray]:
        out = {f"{prefix}step": np.array(float(self.step))}
        out.update({f"{prefix}m.{k}": a for k, a in self.m.items()})
        out.update({f"{prefix}v.{k}": a for k, a in self.v.items()})
        return out

    @classmethod
    def from_state_dict(cls, tensors: Mapping[str, np.ndarray], prefix: str = "adam.") -> "AdamState":
        state = cls()
        for key, value in tensors.items():
            if not key.startswith(prefix):
                continue
            rest = key[len(prefix):]
            if rest == "step":
                state.step = int(value)
            elif rest.startswith("m."):
                state.m[rest[2:]] = np.array(value)
            elif rest.startswith("v."):
                state.v[rest[2:]] = np.array(value)
        return state


def adam_step(
    params: ParamStore,
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> AdamState:
    """Bias-corrected Adam with decoupled weight decay ``theta -= lr * wd * theta`` first."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"adam_step[{name}]", p.shape, g.shape)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        if weight_decay:
            p.data -= lr * weight_decay * p.data
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state
