import numpy as np
import pytest

from ghyena.autodiff import (
    ParamStore,
    Tape,
    Tensor,
    analytic_gradients,
    default_dtype,
    finite_diff_check,
    get_default_dtype,
    primitive_forward,
    set_default_dtype,
)
from ghyena.autodiff import gradcheck
from ghyena.autodiff import tensor as T
from ghyena.core.errors import GHyenaError, NumericalError, ShapeError


def test_mul_forward():
    out = primitive_forward("mul", np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0]))
    np.testing.assert_array_equal(out.data, [4.0, 10.0, 18.0])


def test_cross_of_basis_vectors():
    out = primitive_forward("cross", np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    np.testing.assert_array_equal(out.data, [0.0, 0.0, 1.0])


def test_softmax_of_equal_logits():
    out = primitive_forward("softmax", np.array([0.0, 0.0]))
    np.testing.assert_allclose(out.data, [0.5, 0.5])


def test_softmax_handles_large_logits():
    out = T.softmax(np.array([1000.0, 1000.0, 0.0]))
    assert np.all(np.isfinite(out.data))
    np.testing.assert_allclose(out.data.sum(), 1.0)


def test_sigmoid_derivative_at_zero():
    x = Tensor(np.array(0.0), requires_grad=True)
    with Tape() as tape:
        y = T.sigmoid(x)
        tape.backward(y)
    assert y.item() == pytest.approx(0.5)
    assert float(x.grad) == pytest.approx(0.25)


def test_unknown_primitive_raises():
    with pytest.raises(GHyenaError):
        primitive_forward("conv9000", np.zeros(3))


def test_incompatible_shapes_raise_shape_error():
    with pytest.raises(ShapeError) as info:
        T.add(np.zeros((2, 3)), np.zeros((4, 5)))
    assert info.value.op == "add"


def test_cross_requires_three_components():
    with pytest.raises(ShapeError):
        T.cross(np.zeros(2), np.zeros(2))


def test_backward_requires_scalar_loss():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = T.mul(x, 2.0)
        with pytest.raises(ShapeError):
            tape.backward(y)


def test_backward_rejects_loss_from_other_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape():
        loss = T.sum_(T.mul(x, x))
    with Tape() as other:
        with pytest.raises(GHyenaError):
            other.backward(loss)


def test_broadcast_gradient_is_summed():
    a = Tensor(np.ones((4, 3)), requires_grad=True)
    b = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    with Tape() as tape:
        loss = T.sum_(T.mul(a, b))
        tape.backward(loss)
    np.testing.assert_allclose(b.grad, [4.0, 4.0, 4.0])
    np.testing.assert_allclose(a.grad, np.tile([1.0, 2.0, 3.0], (4, 1)))


def test_reused_tensor_accumulates_gradient():
    x = Tensor(np.array(3.0), requires_grad=True)
    with Tape() as tape:
        loss = T.add(T.mul(x, x), x)
        tape.backward(loss)
    assert float(x.grad) == pytest.approx(7.0)


def test_backward_visits_every_node_once():
    x = Tensor(np.arange(4.0), requires_grad=True)
    with Tape() as tape:
        loss = T.sum_(T.tanh(T.mul(x, x)))
        tape.backward(loss)
    assert tape.visits == len(tape) == 3


def test_no_tape_records_nothing():
    x = Tensor(np.ones(2), requires_grad=True)
    y = T.mul(x, x)
    assert y._node is None
    assert T.active_tape() is None


def test_l2norm_gradient_at_zero_is_zero():
    x = Tensor(np.zeros(3), requires_grad=True)
    with Tape() as tape:
        loss = T.sum_(T.l2norm(x))
        tape.backward(loss)
    np.testing.assert_array_equal(x.grad, np.zeros(3))


def test_gather_scatters_gradient_back(rng):
    x = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    index = np.array([[0, 1], [1, 2], [2, 3], [3, 3]])
    with Tape() as tape:
        loss = T.sum_(T.gather(x, index))
        tape.backward(loss)
    np.testing.assert_allclose(x.grad[:, 0], [1.0, 2.0, 2.0, 3.0])


def test_finite_differences_match_tape(rng):
    store = ParamStore()
    w = store.add("w", rng.normal(size=(3, 4)))
    v = store.add("v", rng.normal(size=(4, 3)))
    x = rng.normal(size=(5, 3))

    def objective(params):
        h = T.silu(T.matmul(x, params["w"]))
        out = T.cross(T.matmul(h, params["v"]), x)
        return T.mean(T.mul(out, out))

    assert finite_diff_check(objective, store) < 1e-5
    grads = analytic_gradients(objective, store)
    assert grads["w"].shape == w.shape and grads["v"].shape == v.shape


def test_finite_difference_rejects_non_finite_objective():
    store = ParamStore()
    store.add("w", np.array([1.0]))
    with pytest.raises(NumericalError):
        finite_diff_check(lambda p: T.sum_(T.div(p["w"], 0.0)), store)


def test_constant_objective_has_zero_gradients():
    store = ParamStore()
    store.add("w", np.array([1.0, -2.0]))
    with Tape() as tape:
        tape.backward(Tensor(5.0))
    assert tape.visits == 0
    np.testing.assert_array_equal(analytic_gradients(lambda p: Tensor(5.0), store)["w"], [0.0, 0.0])
    assert finite_diff_check(lambda p: Tensor(5.0), store) == 0.0


def test_unused_entries_count_as_agreeing_zeros():
    store = ParamStore()
    store.add("w", np.array([3.0, 2.0]))
    assert finite_diff_check(lambda p: T.sum_(T.mul(p["w"][0:1], p["w"][0:1])), store) < 1e-8


def test_finite_difference_error_is_per_entry(monkeypatch):
    store = ParamStore()
    store.add("w", np.array([1.0, 1e-3]))

    def objective(p):
        return T.sum_(T.mul(p["w"], p["w"]))

    np.testing.assert_allclose(analytic_gradients(objective, store)["w"], [2.0, 2e-3])
    # entry 1 is off by half its own size
    monkeypatch.setattr(gradcheck, "analytic_gradients",
                        lambda f, params: {"w": analytic_gradients(f, params)["w"] + np.array([0.0, 1e-3])})
    assert finite_diff_check(objective, store) == pytest.approx(0.5, rel=1e-4)


def test_param_store_keeps_creation_order():
    store = ParamStore()
    scope = store.scope("block0")
    scope.add("b", np.zeros(2))
    scope.scope("inner").add("a", np.zeros(3))
    assert list(store) == ["block0.b", "block0.inner.a"]
    assert store.num_parameters() == 5


def test_param_store_rejects_duplicates_and_whitespace():
    store = ParamStore()
    store.add("w", np.zeros(1))
    with pytest.raises(GHyenaError):
        store.add("w", np.zeros(1))
    with pytest.raises(GHyenaError):
        store.add("bad name", np.zeros(1))


def test_load_state_dict_checks_names_and_shapes():
    store = ParamStore()
    store.add("w", np.zeros(2))
    with pytest.raises(GHyenaError):
        store.load_state_dict({"other": np.zeros(2)})
    with pytest.raises(ShapeError):
        store.load_state_dict({"w": np.zeros(3)})
    store.load_state_dict({"w": np.array([1.0, 2.0])})
    np.testing.assert_array_equal(store["w"].data, [1.0, 2.0])


def test_default_dtype_context_restores():
    assert get_default_dtype() is np.float64
    with default_dtype("float32"):
        assert Tensor([1.0]).dtype == np.float32
    assert get_default_dtype() is np.float64


def test_unsupported_dtype_raises():
    with pytest.raises(ValueError):
        set_default_dtype("float16")
