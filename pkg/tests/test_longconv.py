import numpy as np
import pytest

from ghyena.autodiff import ParamStore
from ghyena.autodiff import tensor as T
from ghyena.autodiff.gradcheck import finite_diff_check
from ghyena.core.errors import ShapeError
from ghyena.longconv.ops import (
    LEVI_CIVITA,
    GeometricConvParams,
    LeviCivitaPlan,
    circular_conv,
    geometric_long_conv,
    scalar_long_conv,
    scalarize,
    scale_factor,
    vector_long_conv,
)
from ghyena.longconv.oracles import (
    circular_conv_naive,
    geometric_long_conv_naive,
    scalar_long_conv_naive,
    vector_long_conv_naive,
)

LENGTHS = [1, 2, 3, 5, 8, 16, 64, 257]


def test_convolution_with_shifted_delta_rotates():
    out = circular_conv(np.array([1.0, 2.0, 3.0, 4.0]), np.array([0.0, 1.0, 0.0, 0.0]))
    np.testing.assert_allclose(out, [4.0, 1.0, 2.0, 3.0], atol=1e-12)


def test_convolution_with_unit_delta_is_identity(rng):
    q = rng.normal(size=7)
    delta = np.zeros(7)
    delta[0] = 1.0
    np.testing.assert_allclose(circular_conv(q, delta), q, atol=1e-12)


def test_circular_conv_rejects_length_mismatch():
    with pytest.raises(ShapeError):
        circular_conv(np.zeros(4), np.zeros(5))


@pytest.mark.parametrize("n", LENGTHS)
def test_circular_conv_matches_oracle(rng, n):
    q, k = rng.normal(size=n), rng.normal(size=n)
    np.testing.assert_allclose(circular_conv(q, k), circular_conv_naive(q, k), atol=1e-10)


@pytest.mark.parametrize("n", LENGTHS)
def test_scalar_long_conv_matches_oracle(rng, n):
    q, k = rng.normal(size=(n, 4)), rng.normal(size=(n, 4))
    out = scalar_long_conv(q, k).data
    np.testing.assert_allclose(out, scalar_long_conv_naive(q, k), atol=1e-10)


@pytest.mark.parametrize("n", LENGTHS)
def test_vector_long_conv_matches_oracle(rng, n):
    q, k = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
    out = vector_long_conv(q, k).data
    np.testing.assert_allclose(out, vector_long_conv_naive(q, k), atol=1e-10)


def test_vector_long_conv_single_token_is_cross_product():
    out = vector_long_conv(np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
    np.testing.assert_allclose(out.data, [[0.0, 0.0, 1.0]], atol=1e-12)


def test_vector_long_conv_batches_leading_axes(rng):
    q, k = rng.normal(size=(2, 6, 3)), rng.normal(size=(2, 6, 3))
    out = vector_long_conv(q, k).data
    for b in range(2):
        np.testing.assert_allclose(out[b], vector_long_conv_naive(q[b], k[b]), atol=1e-10)


def test_vector_long_conv_commutes_with_rotation(rng, rotations):
    q, k = rng.normal(size=(9, 3)), rng.normal(size=(9, 3))
    base = vector_long_conv(q, k).data
    for rot in rotations(5):
        rotated = vector_long_conv(q @ rot.T, k @ rot.T).data
        np.testing.assert_allclose(rotated, base @ rot.T, atol=1e-10)


def test_vector_long_conv_rejects_non_vectors():
    with pytest.raises(ShapeError):
        vector_long_conv(np.zeros((4, 2)), np.zeros((4, 2)))


def test_flipped_plan_breaks_cross_product(rng):
    q, k = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
    for row in range(6):
        out = vector_long_conv(q, k, plan=LEVI_CIVITA.flipped(row)).data
        assert np.max(np.abs(out - vector_long_conv_naive(q, k))) > 1e-3


def test_plan_validation():
    with pytest.raises(ValueError):
        LeviCivitaPlan(LEVI_CIVITA.entries[:5])
    with pytest.raises(ValueError):
        LeviCivitaPlan(LEVI_CIVITA.entries[:5] + ((0, 1, 2, 1),))


def test_factor_matrices_reproduce_cross_product(rng):
    expand, cross_expand, reduce = LEVI_CIVITA.factor_matrices()
    a, b = rng.normal(size=3), rng.normal(size=3)
    np.testing.assert_allclose(reduce @ ((expand @ a) * (cross_expand @ b)), np.cross(a, b), atol=1e-12)


@pytest.mark.parametrize("n", [1, 4, 7, 32])
def test_geometric_long_conv_matches_oracle(rng, n):
    lambdas = [0.7, -1.3, 0.4, 2.0, -0.5]
    params = GeometricConvParams.from_values(lambdas, np.ones(2))
    a1, a2 = rng.normal(size=(n, 1)), rng.normal(size=(n, 1))
    r1, r2 = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
    alpha3, r3 = geometric_long_conv(a1, r1, a2, r2, params)
    ref_alpha, ref_r = geometric_long_conv_naive(a1, r1, a2, r2, lambdas)
    np.testing.assert_allclose(alpha3.data, ref_alpha, atol=1e-10)
    np.testing.assert_allclose(r3.data, ref_r, atol=1e-10)


def test_geometric_long_conv_equivariance(rng, rotations):
    params = GeometricConvParams.from_values([1.0, 1.0, 1.0, 1.0, 1.0], np.ones(2))
    a1, a2 = rng.normal(size=(10, 1)), rng.normal(size=(10, 1))
    r1, r2 = rng.normal(size=(10, 3)), rng.normal(size=(10, 3))
    alpha3, r3 = geometric_long_conv(a1, r1, a2, r2, params)
    for rot in rotations(4, seed=3):
        alpha_rot, r_rot = geometric_long_conv(a1, r1 @ rot.T, a2, r2 @ rot.T, params)
        np.testing.assert_allclose(alpha_rot.data, alpha3.data, atol=1e-10)
        np.testing.assert_allclose(r_rot.data, r3.data @ rot.T, atol=1e-10)


def test_geometric_long_conv_shape_errors():
    params = GeometricConvParams.from_values([1.0] * 5, np.ones(2))
    with pytest.raises(ShapeError):
        geometric_long_conv(np.zeros((4, 2)), np.zeros((4, 3)), np.zeros((4, 1)), np.zeros((4, 3)), params)
    with pytest.raises(ShapeError):
        geometric_long_conv(np.zeros((4, 1)), np.zeros((5, 3)), np.zeros((4, 1)), np.zeros((4, 3)), params)


def test_geometric_params_need_five_lambdas():
    with pytest.raises(ValueError):
        GeometricConvParams.from_values([1.0, 2.0], np.ones(2))


def test_convolution_gradients_match_finite_differences(rng):
    store = ParamStore()
    store.add("q", rng.normal(size=(6, 3)))
    store.add("k", rng.normal(size=(6, 3)))
    store.add("r", rng.normal(size=(6, 3)))
    scope = store.scope("geo")
    params = GeometricConvParams.create(scope, 4, rng)
    f = rng.normal(size=(6, 4))

    def objective(p):
        u = vector_long_conv(p["q"], p["k"])
        alpha = scalarize(f, p["geo.w"])
        a3, r3 = geometric_long_conv(alpha, p["q"], alpha, T.add(u, p["r"]), params)
        return T.mean(T.mul(r3, r3)) + T.mean(T.mul(a3, a3))

    assert finite_diff_check(objective, store) < 1e-5


def test_geometric_conv_is_linear_in_lambdas(rng):
    n = 9
    a1, a2 = rng.normal(size=(n, 1)), rng.normal(size=(n, 1))
    r1, r2 = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
    w = np.ones(1)

    def run(lambdas):
        alpha, r = geometric_long_conv(a1, r1, a2, r2, GeometricConvParams.from_values(lambdas, w))
        return alpha.data, r.data

    basis = [run(e) for e in np.eye(5)]
    for lambdas in rng.normal(size=(3, 5)):
        alpha, r = run(lambdas)
        np.testing.assert_allclose(alpha, sum(l * b[0] for l, b in zip(lambdas, basis)), atol=1e-10)
        np.testing.assert_allclose(r, sum(l * b[1] for l, b in zip(lambdas, basis)), atol=1e-10)


@pytest.mark.parametrize("s", [1, 3, 7])
def test_shifting_k_shifts_the_output(rng, s):
    n = 10
    q, k = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
    qs, ks = rng.normal(size=(n, 4)), rng.normal(size=(n, 4))
    a1, a2 = rng.normal(size=(n, 1)), rng.normal(size=(n, 1))
    params = GeometricConvParams.from_values(rng.normal(size=5), np.ones(1))

    np.testing.assert_allclose(vector_long_conv(q, np.roll(k, s, axis=0)).data,
                               np.roll(vector_long_conv(q, k).data, s, axis=0), atol=1e-10)
    np.testing.assert_allclose(scalar_long_conv(qs, np.roll(ks, s, axis=0)).data,
                               np.roll(scalar_long_conv(qs, ks).data, s, axis=0), atol=1e-10)
    alpha, r = geometric_long_conv(a1, q, np.roll(a2, s, axis=0), np.roll(k, s, axis=0), params)
    base_alpha, base_r = geometric_long_conv(a1, q, a2, k, params)
    np.testing.assert_allclose(alpha.data, np.roll(base_alpha.data, s, axis=0), atol=1e-10)
    np.testing.assert_allclose(r.data, np.roll(base_r.data, s, axis=0), atol=1e-10)


def test_scalarize_and_scale_factor(rng):
    f = rng.normal(size=(5, 4))
    w = rng.normal(size=4)
    np.testing.assert_allclose(scalarize(f, w).data[:, 0], f @ w)
    with pytest.raises(ShapeError):
        scalarize(f, np.ones(3))
    assert scale_factor(8, None) == pytest.approx(0.125)
    assert scale_factor(8, 2.0) == 2.0
