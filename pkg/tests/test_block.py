import numpy as np
import pytest

from ghyena.autodiff import ParamStore, Tensor
from ghyena.autodiff.tensor import cross
from ghyena.core.errors import GHyenaError, ShapeError
from ghyena.longconv.ops import scalar_long_conv, vector_long_conv
from ghyena.nn.block import (
    HyenaBlock,
    QKVBundle,
    apply_gate_and_values,
    hyena_block_forward,
    kv_normalize,
    long_context,
    selective_gate,
    with_config,
)
from ghyena.nn.geometry import GeometricSequence, Neighborhood, center, transform, uncenter
from ghyena.nn.projection import egnn_projection
from ghyena.schemas.config import BlockConfig


def make_block(config, d=8, seed=0):
    return HyenaBlock(ParamStore().scope("block"), d, config, np.random.default_rng(seed))


def test_kv_normalize_scales_keys_and_values():
    vec = Tensor(np.array([[3.0, 4.0, 0.0]]))
    bundle = QKVBundle(q_inv=vec, k_inv=vec, v_inv=vec, q_eqv=vec, k_eqv=vec, v_eqv=vec)
    out = kv_normalize(bundle)
    np.testing.assert_allclose(out.k_eqv.data, [[0.6, 0.8, 0.0]], atol=1e-8)
    np.testing.assert_allclose(out.v_inv.data, [[0.6, 0.8, 0.0]], atol=1e-8)
    np.testing.assert_array_equal(out.q_eqv.data, vec.data)


def test_kv_normalize_keeps_zero_vectors_finite():
    zero = Tensor(np.zeros((2, 3)))
    bundle = QKVBundle(q_inv=zero, k_inv=zero, v_inv=zero, q_eqv=zero, k_eqv=zero, v_eqv=zero)
    assert np.all(kv_normalize(bundle).k_eqv.data == 0)


def test_apply_gate_and_values():
    u_inv = np.array([[1.0, 2.0]])
    v_inv = np.array([[3.0, -1.0]])
    u_eqv = np.array([[1.0, 0.0, 0.0]])
    v_eqv = np.array([[0.0, 1.0, 0.0]])
    y_inv, y_eqv = apply_gate_and_values(u_inv, u_eqv, np.array([[0.5]]), v_inv, v_eqv)
    np.testing.assert_allclose(y_inv.data, [[1.5, -1.0]])
    np.testing.assert_allclose(y_eqv.data, [[0.0, 0.0, 0.5]])


def test_apply_gate_accepts_flat_gate_and_rejects_bad_shapes():
    u = np.ones((4, 3))
    y_inv, _ = apply_gate_and_values(u, u, np.full(4, 2.0), u, u)
    np.testing.assert_allclose(y_inv.data, 2.0)
    with pytest.raises(ShapeError):
        apply_gate_and_values(u, u, np.ones((4, 2)), u, u)
    with pytest.raises(ShapeError):
        apply_gate_and_values(u, u, np.ones((4, 1)), np.ones((4, 2)), u)


def test_gate_values(make_seq, block_config):
    seq = make_seq(n=6, d=8)
    block = make_block(block_config)
    m = selective_gate(seq, block.params.gate, "QK")
    assert m.shape == (6, 1)
    assert np.all((m.data > 0) & (m.data <= 1))
    np.testing.assert_array_equal(selective_gate(seq, None, "none").data, np.ones((6, 1)))
    with pytest.raises(ValueError):
        selective_gate(seq, block.params.gate, "Q")
    with pytest.raises(ValueError):
        selective_gate(seq, None, "K")


def test_long_context_scales_by_sequence_length(make_seq, block_config):
    block = make_block(block_config)
    seq = make_seq(n=10, d=8)
    vec = Tensor(seq.x.data)
    feat = Tensor(seq.f.data)
    bundle = QKVBundle(q_inv=feat, k_inv=feat, v_inv=feat, q_eqv=vec, k_eqv=vec, v_eqv=vec)
    u_inv, u_eqv = long_context(bundle, block.params, block_config)
    unscaled = block_config.model_copy(update={"conv_scale": 1.0})
    raw_inv, raw_eqv = long_context(bundle, block.params, unscaled)
    np.testing.assert_allclose(u_inv.data * 10, raw_inv.data, atol=1e-10)
    np.testing.assert_allclose(u_eqv.data * 10, raw_eqv.data, atol=1e-10)


@pytest.mark.parametrize(
    "overrides",
    [{}, {"gating_mode": "K"}, {"geometric_conv": False}, {"kv_norm": False}, {"global_context": False}],
)
def test_block_is_se3_equivariant(make_seq, rotations, block_config, overrides):
    config = block_config.model_copy(update=overrides)
    block = make_block(config)
    seq = make_seq(n=12, d=8)
    out = block(seq)
    t = np.array([5.0, -3.0, 1.5])
    for rot in rotations(3, seed=5):
        moved = block(transform(seq, rot, t))
        np.testing.assert_allclose(moved.f.data, out.f.data, atol=1e-8)
        np.testing.assert_allclose(moved.x.data, out.x.data @ rot.T + t, atol=1e-8)


def test_block_output_shapes_and_batching(make_seq, block_config):
    block = make_block(block_config)
    batch = make_seq(n=7, d=8, batch=(2,))
    out = block(batch)
    assert out.f.shape == (2, 7, 8) and out.x.shape == (2, 7, 3)
    single = block(GeometricSequence(f=batch.f.data[1], x=batch.x.data[1]))
    np.testing.assert_allclose(out.f.data[1], single.f.data, atol=1e-10)
    np.testing.assert_allclose(out.x.data[1], single.x.data, atol=1e-10)


def test_operator_returns_invariant_and_vector_streams(make_seq, block_config):
    block = make_block(block_config)
    y_inv, y_eqv = block.operator(make_seq(n=9, d=8))
    assert y_inv.shape == (9, 8)
    assert y_eqv.shape == (9, 3)


def test_spatial_neighbourhood_block(make_seq, block_config):
    config = block_config.model_copy(update={"neighborhood": "spatial", "k_neighbors": 3})
    out = make_block(config)(make_seq(n=10, d=8))
    assert np.all(np.isfinite(out.x.data))


def test_edge_attributes_enter_local_messages(make_seq, block_config):
    config = block_config.model_copy(update={"edge_dim": 2})
    block = make_block(config)
    seq = make_seq(n=5, d=8)
    plain = block(seq)
    edged = block(seq.replace(edges={(1, 0): np.array([1.0, -1.0]), (2, 1): np.array([0.5, 2.0])}))
    assert not np.allclose(plain.f.data, edged.f.data)


def test_with_config_switches_runtime_toggles(make_seq, block_config):
    block = make_block(block_config)
    seq = make_seq(n=8, d=8)
    no_norm = block_config.model_copy(update={"kv_norm": False})
    out = hyena_block_forward(seq, block, no_norm)
    assert out.f.shape == (8, 8)
    assert block.config.kv_norm is True


def test_with_config_rejects_structural_changes(block_config):
    block = make_block(block_config)
    with pytest.raises(GHyenaError):
        with_config(block, block_config.model_copy(update={"num_global_tokens": 2}))
    gateless = make_block(block_config.model_copy(update={"gating_mode": "none"}))
    with pytest.raises(GHyenaError):
        with_config(gateless, block_config)


def test_block_config_validation():
    assert BlockConfig(gating_mode="off").gating_mode == "none"
    assert BlockConfig(gating_mode="qk").gating_mode == "QK"
    with pytest.raises(ValueError):
        BlockConfig(gating_mode="Q")
    with pytest.raises(ValueError):
        BlockConfig(conv_scale=0.0)


def compose_local_only(seq, params):
    centered, centroid = center(seq)
    chain = Neighborhood.chain(seq.n)
    q = egnn_projection(centered, None, params.q, chain)
    k = egnn_projection(centered, None, params.k, chain)
    v = egnn_projection(centered, None, params.v, chain)
    u_inv = scalar_long_conv(q.f, k.f) * (1.0 / seq.n)
    u_eqv = vector_long_conv(q.x, k.x) * (1.0 / seq.n)
    y = GeometricSequence(f=u_inv * v.f, x=cross(u_eqv, v.x))
    out = egnn_projection(y, None, params.out, chain)
    return uncenter(out.replace(f=out.f + seq.f), centroid)


def test_local_only_blocks_are_stacked_projections(make_seq, block_config):
    config = block_config.model_copy(update={
        "global_context": False, "gating_mode": "none", "kv_norm": False, "geometric_conv": False,
    })
    blocks = [make_block(config, seed=s) for s in (0, 1)]
    assert all(b.params.siren is None and b.params.gate is None and b.params.conv is None for b in blocks)
    seq = make_seq(n=9, d=8)
    expected = seq
    for block in blocks:
        seq, expected = block(seq), compose_local_only(expected, block.params)
    np.testing.assert_allclose(seq.f.data, expected.f.data, atol=1e-12)
    np.testing.assert_allclose(seq.x.data, expected.x.data, atol=1e-12)
