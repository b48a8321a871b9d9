from ghyena.nn.attention import (
    AttentionMatrices,
    GTransformerBlock,
    cross_product_vector_attention,
    dot_product_vector_attention,
    gtransformer_block_forward,
)
from ghyena.nn.block import (
    HyenaBlock,
    QKVBundle,
    apply_gate_and_values,
    hyena_block_forward,
    kv_normalize,
    qkv_project,
    selective_gate,
)
from ghyena.nn.geometry import GeometricSequence, Neighborhood, center, random_rotation, transform, uncenter
from ghyena.nn.model import GHyenaModel, model_forward, parameter_count, pool_eqv_vector
from ghyena.nn.projection import EGNNProjection, GlobalContextTokens, compute_global_tokens, egnn_projection
from ghyena.nn.siren import SirenNet, siren_weights

__all__ = [
    "AttentionMatrices",
    "EGNNProjection",
    "GHyenaModel",
    "GTransformerBlock",
    "GeometricSequence",
    "GlobalContextTokens",
    "HyenaBlock",
    "Neighborhood",
    "QKVBundle",
    "SirenNet",
    "apply_gate_and_values",
    "center",
    "compute_global_tokens",
    "cross_product_vector_attention",
    "dot_product_vector_attention",
    "egnn_projection",
    "gtransformer_block_forward",
    "hyena_block_forward",
    "kv_normalize",
    "model_forward",
    "parameter_count",
    "pool_eqv_vector",
    "qkv_project",
    "random_rotation",
    "selective_gate",
    "siren_weights",
    "transform",
    "uncenter",
]
