"""Equivariant vector self-attention and the G-Transformer block built on it.

The softmax temperature is ``1/sqrt(N)`` with N the sequence length.
"""
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np

from ghyena.autodiff.params import ParamScope
from ghyena.autodiff.tensor import ArrayLike, Tensor, as_tensor, cross, l2norm, matmul, softmax, sum_, swap_last, unsqueeze
from ghyena.core.errors import ShapeError
from ghyena.nn.block import BlockBase, BlockParams, QKVBundle, with_config
from ghyena.nn.geometry import GeometricSequence
from ghyena.schemas.config import BlockConfig


@dataclass
class AttentionMatrices:
    """Invariant scores ``C`` and row-stochastic weights ``S`` (both (..., N, N))."""

    C: Tensor
    S: Tensor


def _check_qkv(op: str, q: Tensor, k: Tensor, v: Tensor, channels: int = 3) -> None:
    if q.shape != k.shape or q.shape[:-1] != v.shape[:-1] or q.ndim < 2:
        raise ShapeError(op, q.shape, k.shape, v.shape)
    if channels and (q.shape[-1] != channels or v.shape[-1] != channels):
        raise ShapeError(op, q.shape, v.shape, reason=f"last axis must be {channels}, got")


def attention_matrices(q: ArrayLike, k: ArrayLike) -> AttentionMatrices:
    q, k = as_tensor(q), as_tensor(k)
    n = q.shape[-2]
    c = matmul(q, swap_last(k))
    return AttentionMatrices(C=c, S=softmax(c * (1.0 / np.sqrt(n)), axis=-1))


def dot_product_vector_attention(q_eqv: ArrayLike, k_eqv: ArrayLike, v_eqv: ArrayLike) -> Tensor:
    """``u_i = sum_j softmax_j(q_i . k_j / sqrt(N)) v_j``."""
    q, k, v = as_tensor(q_eqv), as_tensor(k_eqv), as_tensor(v_eqv)
    _check_qkv("dot_product_vector_attention", q, k, v)
    return matmul(attention_matrices(q, k).S, v)


def cross_product_vector_attention(q_eqv: ArrayLike, k_eqv: ArrayLike, v_eqv: ArrayLike) -> Tensor:
    """``u_i = N^-1 sum_j S_ij x v_j`` with ``S_ij = softmax_j(|q_i x k_j| / sqrt(N)) (q_i x k_j)``."""
    q, k, v = as_tensor(q_eqv), as_tensor(k_eqv), as_tensor(v_eqv)
    _check_qkv("cross_product_vector_attention", q, k, v)
    n = q.shape[-2]
    c = cross(unsqueeze(q, -2), unsqueeze(k, -3))  # (..., N, N, 3)
    weights = softmax(l2norm(c) * (1.0 / np.sqrt(n)), axis=-2)  # (..., N, N, 1)
    s = weights * c
    return sum_(cross(s, unsqueeze(v, -3)), axis=-2) * (1.0 / n)


def scalar_attention(q_inv: ArrayLike, k_inv: ArrayLike, v_inv: ArrayLike) -> Tensor:
    q, k, v = as_tensor(q_inv), as_tensor(k_inv), as_tensor(v_inv)
    _check_qkv("scalar_attention", q, k, v, channels=0)
    return matmul(attention_matrices(q, k).S, v)


class GTransformerBlock(BlockBase):
    """Hyena block pipeline with self-attention in place of the long convolution.

    Values are consumed by the attention itself, so the gate scales the attended
    features directly: ``y = m u``.
    """

    def __init__(
        self,
        scope: ParamScope,
        dim: int,
        config: BlockConfig,
        rng: np.random.Generator,
        attention: Literal["dot", "cross"] = "dot",
    ):
        super().__init__(config)
        self.params = BlockParams(scope, dim, rng, config)
        self.attention = attention

    def context(self, bundle: QKVBundle) -> Tuple[Tensor, Tensor]:
        u_inv = scalar_attention(bundle.q_inv, bundle.k_inv, bundle.v_inv)
        if self.attention == "cross":
            u_eqv = cross_product_vector_attention(bundle.q_eqv, bundle.k_eqv, bundle.v_eqv)
        else:
            u_eqv = dot_product_vector_attention(bundle.q_eqv, bundle.k_eqv, bundle.v_eqv)
        return u_inv, u_eqv

    def combine(self, u_inv: Tensor, u_eqv: Tensor, m: Tensor, bundle: QKVBundle) -> Tuple[Tensor, Tensor]:
        return m * u_inv, m * u_eqv


def gtransformer_block_forward(
    seq: GeometricSequence, block: GTransformerBlock, config: Optional[BlockConfig] = None
) -> GeometricSequence:
    if config is not None and config != block.config:
        block = with_config(block, config)
    return block(seq)
