"""Geometric Hyena block.

Pipeline: center -> global tokens -> Q/K/V projections -> key-value normalisation ->
long convolution -> 1/N scale -> selective gate and value product -> output projection
-> invariant residual -> uncenter.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ghyena.autodiff.params import ParamScope
from ghyena.autodiff.tensor import ArrayLike, Tensor, as_tensor, cross, l2norm, matmul, sigmoid
from ghyena.core.errors import GHyenaError, ShapeError
from ghyena.longconv.ops import (
    GeometricConvParams,
    geometric_long_conv,
    scalar_long_conv,
    scalarize,
    scale_factor,
    vector_long_conv,
)
from ghyena.nn.geometry import GeometricSequence, Neighborhood, center, uncenter
from ghyena.nn.layers import Linear
from ghyena.nn.projection import EGNNProjection, GlobalContextTokens, compute_global_tokens, egnn_projection
from ghyena.nn.siren import SirenNet, siren_weights
from ghyena.schemas.config import BlockConfig


KV_EPS = 1e-8


@dataclass
class QKVBundle:
    q_inv: Tensor
    k_inv: Tensor
    v_inv: Tensor
    q_eqv: Tensor
    k_eqv: Tensor
    v_eqv: Tensor


class GateParams:
    """Projection of the gate input followed by a linear head to one logit per token."""

    def __init__(self, scope: ParamScope, dim: int, rng: np.random.Generator, config: BlockConfig):
        self.projection = EGNNProjection(
            scope.scope("proj"), dim, rng, edge_dim=config.edge_dim,
            local_context=config.local_context, global_context=config.global_context,
        )
        self.head = Linear(scope.scope("head"), dim, 1, rng, init="small")


class BlockParams:
    """Trainable state shared by Hyena and attention blocks."""

    def __init__(self, scope: ParamScope, dim: int, rng: np.random.Generator, config: BlockConfig):
        self.dim = dim

        def projection(name: str) -> EGNNProjection:
            return EGNNProjection(
                scope.scope(name), dim, rng, edge_dim=config.edge_dim,
                local_context=config.local_context, global_context=config.global_context,
            )

        self.siren = (
            SirenNet(scope.scope("siren"), config.num_global_tokens, rng,
                     hidden=config.siren_hidden, layers=config.siren_layers, omega=config.siren_omega)
            if config.global_context else None
        )
        self.q, self.k, self.v = projection("q"), projection("k"), projection("v")
        self.gate = GateParams(scope.scope("gate"), dim, rng, config) if config.gating_mode != "none" else None
        self.out = projection("out")


class HyenaParams(BlockParams):
    def __init__(self, scope: ParamScope, dim: int, rng: np.random.Generator, config: BlockConfig):
        super().__init__(scope, dim, rng, config)
        self.conv = GeometricConvParams.create(scope.scope("conv"), dim, rng) if config.geometric_conv else None
        self.alpha_expand = scope.add("alpha_expand", rng.normal(0.0, 1.0 / np.sqrt(dim), size=dim)) if config.geometric_conv else None


# -- pieces ----------------------------------------------------------------------------

def neighborhood_for(seq: GeometricSequence, config: BlockConfig) -> Optional[Neighborhood]:
    if not config.local_context:
        return None
    if config.neighborhood == "spatial":
        return Neighborhood.spatial(seq.x.data, config.k_neighbors, config.radius)
    return Neighborhood.chain(seq.n)


def qkv_project(
    seq: GeometricSequence,
    params_q: EGNNProjection,
    params_k: EGNNProjection,
    params_v: EGNNProjection,
    globals_: Optional[GlobalContextTokens],
    neighborhood: Optional[Neighborhood] = None,
) -> QKVBundle:
    q = egnn_projection(seq, globals_, params_q, neighborhood)
    k = egnn_projection(seq, globals_, params_k, neighborhood)
    v = egnn_projection(seq, globals_, params_v, neighborhood)
    return QKVBundle(q_inv=q.f, k_inv=k.f, v_inv=v.f, q_eqv=q.x, k_eqv=k.x, v_eqv=v.x)


def _unit(t: Tensor) -> Tensor:
    return t / (l2norm(t) + KV_EPS)


def kv_normalize(bundle: QKVBundle) -> QKVBundle:
    """Scale every key and value token to unit L2 norm within its stream."""
    return QKVBundle(
        q_inv=bundle.q_inv, k_inv=_unit(bundle.k_inv), v_inv=_unit(bundle.v_inv),
        q_eqv=bundle.q_eqv, k_eqv=_unit(bundle.k_eqv), v_eqv=_unit(bundle.v_eqv),
    )


def selective_gate(
    seq: GeometricSequence,
    gate: Optional[GateParams],
    mode: str,
    globals_: Optional[GlobalContextTokens] = None,
    neighborhood: Optional[Neighborhood] = None,
) -> Tensor:
    """Per-token gate values (..., N, 1) in (0, 1); all ones when ``mode`` is none."""
    if mode == "none":
        return Tensor(np.ones(seq.batch_shape + (seq.n, 1), dtype=seq.f.dtype))
    if mode not in ("QK", "K"):
        raise ValueError(f"unknown gating mode {mode!r}")
    if gate is None:
        raise ValueError(f"gating mode {mode!r} needs gate parameters")
    projected = egnn_projection(seq, globals_, gate.projection, neighborhood)
    return sigmoid(gate.head(projected.f))


def apply_gate_and_values(
    u_inv: ArrayLike, u_eqv: ArrayLike, m: ArrayLike, v_inv: ArrayLike, v_eqv: ArrayLike
) -> Tuple[Tensor, Tensor]:
    """``y_inv = (m u_inv) * v_inv`` and ``y_eqv = (m u_eqv) x v_eqv``."""
    u_inv, u_eqv, m, v_inv, v_eqv = (as_tensor(t) for t in (u_inv, u_eqv, m, v_inv, v_eqv))
    if u_inv.shape != v_inv.shape or u_eqv.shape != v_eqv.shape:
        raise ShapeError("apply_gate_and_values", u_inv.shape, v_inv.shape, u_eqv.shape, v_eqv.shape)
    if m.ndim == u_inv.ndim - 1:
        m = m.reshape(m.shape + (1,))
    if m.shape[-1] != 1 or m.shape[:-1] != u_inv.shape[:-1]:
        raise ShapeError("apply_gate_and_values", m.shape, u_inv.shape, reason="gate must hold one value per token")
    return (m * u_inv) * v_inv, cross(m * u_eqv, v_eqv)


def long_context(bundle: QKVBundle, params: HyenaParams, config: BlockConfig) -> Tuple[Tensor, Tensor]:
    """Convolution of queries with keys, scaled by 1/N unless configured otherwise."""
    u_inv = scalar_long_conv(bundle.q_inv, bundle.k_inv)
    if config.geometric_conv:
        w = params.conv.w
        alpha3, r3 = geometric_long_conv(
            scalarize(bundle.q_inv, w), bundle.q_eqv, scalarize(bundle.k_inv, w), bundle.k_eqv, params.conv,
        )
        u_inv = u_inv + matmul(alpha3, params.alpha_expand.reshape(1, -1))
        u_eqv = r3
    else:
        u_eqv = vector_long_conv(bundle.q_eqv, bundle.k_eqv)
    s = scale_factor(bundle.q_eqv.shape[-2], config.conv_scale)
    return u_inv * s, u_eqv * s


# -- block -----------------------------------------------------------------------------

class BlockBase:
    params: BlockParams

    def __init__(self, config: BlockConfig):
        self.config = config

    def context(self, bundle: QKVBundle) -> Tuple[Tensor, Tensor]:
        raise NotImplementedError

    def combine(self, u_inv: Tensor, u_eqv: Tensor, m: Tensor, bundle: QKVBundle) -> Tuple[Tensor, Tensor]:
        return apply_gate_and_values(u_inv, u_eqv, m, bundle.v_inv, bundle.v_eqv)

    def _omega(self, n: int) -> Optional[Tensor]:
        return siren_weights(n, self.params.siren) if self.params.siren is not None else None

    def operator(self, seq: GeometricSequence, omega: Optional[Tensor] = None,
                 neighborhood: Optional[Neighborhood] = None) -> Tuple[Tensor, Tensor]:
        """(y_inv, y_eqv) of the sequence operator, before the output projection."""
        config = self.config
        if omega is None:
            omega = self._omega(seq.n)
        if neighborhood is None:
            neighborhood = neighborhood_for(seq, config)
        globals_ = compute_global_tokens(seq, omega) if omega is not None else None
        p = self.params
        bundle = qkv_project(seq, p.q, p.k, p.v, globals_, neighborhood)

        if config.gating_mode == "K":
            gate_seq = GeometricSequence(f=bundle.k_inv, x=bundle.k_eqv, edges=seq.edges)
        else:
            gate_seq = seq
        m = selective_gate(gate_seq, p.gate, config.gating_mode, globals_, neighborhood)

        if config.kv_norm:
            bundle = kv_normalize(bundle)
        u_inv, u_eqv = self.context(bundle)
        return self.combine(u_inv, u_eqv, m, bundle)

    def __call__(self, seq: GeometricSequence) -> GeometricSequence:
        config = self.config
        centroid = None
        inner = seq
        if config.centering:
            inner, centroid = center(seq)
        omega = self._omega(seq.n)
        neighborhood = neighborhood_for(inner, config)

        y_inv, y_eqv = self.operator(inner, omega, neighborhood)
        y = GeometricSequence(f=y_inv, x=y_eqv, edges=seq.edges)
        globals_ = compute_global_tokens(y, omega) if omega is not None else None
        out = egnn_projection(y, globals_, self.params.out, neighborhood)
        if config.residual:
            out = out.replace(f=out.f + seq.f)
        if centroid is not None:
            out = uncenter(out, centroid)
        return out


class HyenaBlock(BlockBase):
    def __init__(self, scope: ParamScope, dim: int, config: BlockConfig, rng: np.random.Generator):
        super().__init__(config)
        self.params = HyenaParams(scope, dim, rng, config)

    def context(self, bundle: QKVBundle) -> Tuple[Tensor, Tensor]:
        return long_context(bundle, self.params, self.config)


def hyena_block_forward(seq: GeometricSequence, block: HyenaBlock, config: Optional[BlockConfig] = None) -> GeometricSequence:
    """Functional entry point; ``config`` defaults to the one the block was built with."""
    if config is not None and config != block.config:
        block = with_config(block, config)
    return block(seq)


STRUCTURAL_FIELDS = ("local_context", "global_context", "num_global_tokens", "edge_dim",
                     "siren_hidden", "siren_layers", "siren_omega")


def with_config(block: BlockBase, config: BlockConfig) -> BlockBase:
    """Same parameters evaluated under ``config``; toggles that add parameters must match."""
    for name in STRUCTURAL_FIELDS:
        if getattr(config, name) != getattr(block.config, name):
            raise GHyenaError(f"block was built with {name}={getattr(block.config, name)!r}, got {getattr(config, name)!r}")
    if config.gating_mode != "none" and block.params.gate is None:
        raise GHyenaError("block was built without gate parameters")
    if config.geometric_conv and getattr(block.params, "conv", True) is None:
        raise GHyenaError("block was built without geometric convolution parameters")
    clone = object.__new__(type(block))
    clone.__dict__.update(block.__dict__)
    clone.config = config
    return clone
