"""Equivariant projection with local neighbour messages and global context tokens.

For token i with neighbours j and global tokens g:

    m_ij^loc  = silu(W_s f_i + W_n f_j + w_d |x_i - x_j| + W_e e_ij + b)
    m_ig^glob = silu(U_s f_i + U_n h_g + u_d log(1 + |x_i - g_g|) + c)
    x_i'      = x_i + mean_j (x_i - x_j) tanh(w_x . m_ij^loc + b_x)
    f_i'      = A f_i + B (sum_j m_ij^loc + sum_g m_ig^glob) + b_f

Linear maps applied to f_j are computed once per token and gathered afterwards.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ghyena.autodiff.params import ParamScope
from ghyena.autodiff.tensor import (
    Tensor,
    gather,
    l2norm,
    log1p,
    matmul,
    silu,
    sum_,
    swap_last,
    tanh,
    unsqueeze,
)
from ghyena.core.errors import GHyenaError, InvariantViolation
from ghyena.nn.geometry import GeometricSequence, Neighborhood
from ghyena.nn.layers import Linear


@dataclass
class GlobalContextTokens:
    g: Tensor  # (..., G, 3)
    h: Tensor  # (..., G, d)
    omega: Tensor  # (N, G)
    c: Tensor  # (G,)

    @property
    def count(self) -> int:
        return self.g.shape[-2]


def compute_global_tokens(seq: GeometricSequence, omega: Tensor) -> GlobalContextTokens:
    """Weighted averages ``g_j = C_j^-1 sum_i w_ij x_i`` and ``h_j = C_j^-1 sum_i w_ij f_i``."""
    if omega.ndim != 2 or omega.shape[0] != seq.n:
        raise GHyenaError(f"omega must be ({seq.n}, G), got {omega.shape}")
    c = sum_(omega, axis=0)
    smallest = float(np.min(c.data))
    if not smallest > 0:
        raise InvariantViolation("global token normaliser C_j > 0", smallest, 0.0)
    weights = swap_last(omega / c)  # (G, N)
    return GlobalContextTokens(g=matmul(weights, seq.x), h=matmul(weights, seq.f), omega=omega, c=c)


class EGNNProjection:
    """Parameters of one equivariant projection (d -> d)."""

    def __init__(
        self,
        scope: ParamScope,
        dim: int,
        rng: np.random.Generator,
        edge_dim: int = 0,
        local_context: bool = True,
        global_context: bool = True,
        identity_init: bool = False,
    ):
        self.dim = dim
        self.edge_dim = edge_dim
        self.local_context = local_context
        self.global_context = global_context
        msg_init = "zeros" if identity_init else "lecun"
        if local_context:
            loc = scope.scope("local")
            self.loc_src = Linear(loc.scope("src"), dim, dim, rng, init=msg_init)
            self.loc_dst = Linear(loc.scope("dst"), dim, dim, rng, bias=False, init=msg_init)
            self.loc_dist = Linear(loc.scope("dist"), 1, dim, rng, bias=False, init=msg_init)
            self.loc_edge = (
                Linear(loc.scope("edge"), edge_dim, dim, rng, bias=False, init=msg_init) if edge_dim else None
            )
            self.coord = Linear(scope.scope("coord"), dim, 1, rng, init="zeros" if identity_init else "small")
        if global_context:
            glob = scope.scope("global")
            self.glob_src = Linear(glob.scope("src"), dim, dim, rng, init=msg_init)
            self.glob_dst = Linear(glob.scope("dst"), dim, dim, rng, bias=False, init=msg_init)
            self.glob_dist = Linear(glob.scope("dist"), 1, dim, rng, bias=False, init=msg_init)
        self.self_map = Linear(scope.scope("feat_self"), dim, dim, rng, bias=True, init="identity")
        self.msg_map = Linear(scope.scope("feat_msg"), dim, dim, rng, bias=False, init="zeros" if identity_init else "small")


def egnn_projection(
    seq: GeometricSequence,
    globals_: Optional[GlobalContextTokens],
    params: EGNNProjection,
    neighborhood: Optional[Neighborhood] = None,
) -> GeometricSequence:
    f, x = seq.f, seq.x
    messages: Optional[Tensor] = None
    x_out = x

    if params.local_context:
        if neighborhood is None:
            neighborhood = Neighborhood.chain(seq.n)
        counts = neighborhood.counts
        if np.any(counts == 0):
            empty = int(np.argmax(np.reshape(counts == 0, -1)))
            raise GHyenaError(f"egnn_projection: token {empty} has an empty neighbourhood")
        mask = Tensor(neighborhood.mask[..., None])  # (..., N, K, 1)
        x_nb = gather(x, neighborhood.index)  # (..., N, K, 3)
        diff = unsqueeze(x, -2) - x_nb
        dist = l2norm(diff)  # (..., N, K, 1)
        pre = unsqueeze(params.loc_src(f), -2) + gather(params.loc_dst(f), neighborhood.index) + params.loc_dist(dist)
        if params.loc_edge is not None:
            pre = pre + params.loc_edge(Tensor(neighborhood.edge_features(seq.edges, params.edge_dim)))
        m_loc = silu(pre) * mask  # (..., N, K, d)
        messages = sum_(m_loc, axis=-2)
        coord = tanh(params.coord(m_loc))  # (..., N, K, 1)
        shift = sum_(diff * coord * mask, axis=-2) / Tensor(counts[..., None])
        x_out = x + shift

    if params.global_context and globals_ is not None:
        dist_g = l2norm(unsqueeze(x, -2) - unsqueeze(globals_.g, -3))  # (..., N, G, 1)
        pre = unsqueeze(params.glob_src(f), -2) + unsqueeze(params.glob_dst(globals_.h), -3) + params.glob_dist(log1p(dist_g))
        m_glob = sum_(silu(pre), axis=-2)
        messages = m_glob if messages is None else messages + m_glob

    f_out = params.self_map(f)
    if messages is not None:
        f_out = f_out + params.msg_map(messages)
    return seq.replace(f=f_out, x=x_out)
