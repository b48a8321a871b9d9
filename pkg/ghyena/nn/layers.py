from typing import Literal, Optional

import numpy as np

from ghyena.autodiff.params import ParamScope
from ghyena.autodiff.tensor import ArrayLike, Tensor, as_tensor, matmul

Init = Literal["lecun", "zeros", "identity", "small"]


def init_weight(rng: np.random.Generator, in_dim: int, out_dim: int, init: Init) -> np.ndarray:
    if init == "zeros":
        return np.zeros((in_dim, out_dim))
    if init == "identity":
        if in_dim != out_dim:
            raise ValueError(f"identity init needs a square weight, got {in_dim}x{out_dim}")
        return np.eye(in_dim)
    std = 1.0 / np.sqrt(in_dim)
    if init == "small":
        std *= 0.1
    return rng.normal(0.0, std, size=(in_dim, out_dim))


class Linear:
    """``y = x @ W + b`` over the last axis."""

    def __init__(
        self,
        scope: ParamScope,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        bias: bool = True,
        init: Init = "lecun",
    ):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = scope.add("weight", init_weight(rng, in_dim, out_dim, init))
        self.bias: Optional[Tensor] = scope.add("bias", np.zeros(out_dim)) if bias else None

    def __call__(self, x: ArrayLike) -> Tensor:
        x = as_tensor(x)
        y = matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y
