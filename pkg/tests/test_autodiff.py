import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import gradcases
import oracles
from texfield.autodiff import (
    Adam,
    AdamState,
    Linear,
    Module,
    Tensor,
    adam_step,
    concat,
    linear,
    load_adam_state,
    load_tensors,
    no_grad,
    numerical_grad,
    relative_error,
    save_adam_state,
    save_tensors,
)
from texfield.errors import ContractError, DimensionError, DomainError, NumericError, ParseError

finite = st.floats(-3, 3, allow_nan=False, width=64)


# -- forward ops -------------------------------------------------------------

def test_linear_identity_weight_zero_bias_is_identity(rng):
    x = Tensor(rng.normal(size=(5, 4)))
    out = linear(x, Tensor(np.eye(4)), Tensor(np.zeros(4)))
    np.testing.assert_array_equal(out.data, x.data)


def test_relu_definition():
    np.testing.assert_array_equal(Tensor([-1.0, 0.0, 2.0]).relu().data, [0, 0, 2])


def test_max_over_rows():
    np.testing.assert_array_equal(Tensor([[1.0, 5.0], [3.0, 2.0]]).max(axis=0).data, [3, 5])


def test_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4,\)"):
        Tensor(np.zeros((2, 3))) + Tensor(np.zeros(4))
    with pytest.raises(DimensionError):
        Tensor(np.zeros((2, 3))) @ Tensor(np.zeros((2, 3)))


def test_reduction_over_empty_axis_is_domain_error():
    t = Tensor(np.zeros((0, 3)))
    with pytest.raises(DomainError):
        t.max(axis=0)
    with pytest.raises(DomainError):
        t.mean(axis=0)


def test_default_dtype_and_float64_mode():
    assert Tensor([1, 2]).dtype == np.float32
    assert Tensor([1.0], dtype=np.float64).dtype == np.float64


def test_check_finite_flags_nan():
    with pytest.raises(NumericError):
        Tensor([1.0, np.nan]).check_finite("probe")


# -- backward ----------------------------------------------------------------

def test_sum_of_squares_gradient():
    x = Tensor([3.0], requires_grad=True, dtype=np.float64)
    (x * x).sum().backward()
    np.testing.assert_allclose(x.grad, [6.0])
    fd = numerical_grad(lambda: float((x.data * x.data).sum()), x.data, step=1e-4)
    assert relative_error(x.grad, fd) <= 1e-3


def test_constant_loss_gives_zero_grad():
    x = Tensor([1.0, 2.0], requires_grad=True)
    c = Tensor([4.0], requires_grad=True)
    (c * 2.0 + x.sum() * 0.0).sum().backward()
    np.testing.assert_array_equal(x.grad, [0.0, 0.0])


def test_backward_requires_scalar_and_graph():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ContractError):
        (x * 2.0).backward()
    with pytest.raises(ContractError):
        Tensor([1.0]).sum().backward()
    with pytest.raises(ContractError):
        (x * 2.0).detach().sum().backward()


def test_gradients_accumulate_until_zeroed():
    x = Tensor([2.0], requires_grad=True)
    (x * 3.0).sum().backward()
    (x * 3.0).sum().backward()
    np.testing.assert_allclose(x.grad, [6.0])
    x.zero_grad()
    assert x.grad is None or not np.any(x.grad)


def test_no_grad_records_nothing():
    x = Tensor([1.0], requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad


def test_relu_and_abs_subgradient_zero_at_zero():
    x = Tensor([0.0, 0.0], requires_grad=True, dtype=np.float64)
    (x.relu() + x.abs()).sum().backward()
    np.testing.assert_array_equal(x.grad, [0.0, 0.0])


def test_max_splits_ties_evenly():
    x = Tensor([1.0, 1.0, 0.0], requires_grad=True, dtype=np.float64)
    x.max().backward()
    np.testing.assert_allclose(x.grad, [0.5, 0.5, 0.0])


@pytest.mark.parametrize("name", sorted(gradcases.primitive_cases()))
def test_primitive_gradient_matches_finite_differences(name):
    assert gradcases.run_primitive(name, np.random.default_rng(7)) <= gradcases.TOL


def test_two_layer_chain_gradient(rng):
    W1, W2 = rng.normal(size=(4, 6)), rng.normal(size=(6, 2))
    x = gradcases.away_from_zero(rng, (3, 4))
    err = gradcases.check(lambda a, b, c: linear(linear(a, b).relu(), c), [x, W1, W2], rng)
    assert err <= 1e-3


@given(a=arrays(np.float64, (3, 2), elements=finite), b=arrays(np.float64, (3, 2), elements=finite),
       ca=st.floats(-2, 2), cb=st.floats(-2, 2))
def test_backward_is_linear(a, b, ca, cb):
    x0 = np.array([[0.3, -0.7], [1.1, 0.2], [-0.4, 0.9]])

    def grad(fn):
        x = Tensor(x0, requires_grad=True, dtype=np.float64)
        fn(x).backward()
        return x.grad

    f = lambda x: (x * Tensor(a, dtype=np.float64)).sigmoid().sum()  # noqa: E731
    g = lambda x: (x.square() * Tensor(b, dtype=np.float64)).sum()  # noqa: E731
    combined = grad(lambda x: f(x) * ca + g(x) * cb)
    np.testing.assert_allclose(combined, ca * grad(f) + cb * grad(g), atol=1e-10)


@given(shape=st.sampled_from([(3, 4), (1, 4), (4,), (3, 1), ()]))
def test_broadcast_gradient_has_operand_shape(shape):
    a = Tensor(np.ones((3, 4)), requires_grad=True)
    b = Tensor(np.ones(shape), requires_grad=True)
    (a * b).sum().backward()
    assert b.grad.shape == shape
    np.testing.assert_allclose(b.grad.sum(), 12.0)


def test_forward_is_deterministic(rng):
    x = rng.normal(size=(8, 5)).astype(np.float32)
    lin = Linear(5, 3, np.random.default_rng(0))
    np.testing.assert_array_equal(lin(Tensor(x)).data, Linear(5, 3, np.random.default_rng(0))(Tensor(x)).data)


# -- modules -----------------------------------------------------------------

class _Two(Module):
    def __init__(self):
        rng = np.random.default_rng(0)
        self.a = Linear(2, 3, rng)
        self.layers = [Linear(3, 3, rng), Linear(3, 1, rng, bias=False)]
        self._hidden = Tensor([1.0], requires_grad=True)


def test_module_parameter_discovery_and_state_roundtrip():
    m = _Two()
    names = list(m.named_parameters())
    assert names == ["a.weight", "a.bias", "layers.0.weight", "layers.0.bias", "layers.1.weight"]
    assert m.num_parameters() == 6 + 3 + 9 + 3 + 3
    state = {k: v + 1 for k, v in m.state_dict().items()}
    m.load_state_dict(state)
    np.testing.assert_array_equal(m.a.bias.data, np.ones(3, dtype=np.float32))
    with pytest.raises(ContractError):
        m.load_state_dict({"a.weight": np.zeros((2, 3))})


def test_linear_zero_in_features_has_zero_weight():
    lin = Linear(0, 3, np.random.default_rng(0))
    assert lin.weight.shape == (0, 3)


# -- Adam --------------------------------------------------------------------

def test_adam_zero_grad_is_identity_and_counts_step():
    p = Tensor([1.0, -2.0], requires_grad=True)
    p.grad = np.zeros(2, dtype=np.float32)
    state = AdamState.for_params([p])
    adam_step([p], state)
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    assert state.step == 1


@given(m=arrays(np.float32, 3, elements=st.floats(-1, 1, width=32)),
       v=arrays(np.float32, 3, elements=st.floats(0, 1, width=32)), step=st.integers(0, 50))
def test_adam_zero_grad_identity_for_any_state(m, v, step):
    p = Tensor([0.5, 1.5, -1.0], requires_grad=True)
    before = p.data.copy()
    p.grad = np.zeros(3, dtype=np.float32)
    state = AdamState(step=step, m=[m.copy()], v=[v.copy()])
    adam_step([p], state)
    np.testing.assert_array_equal(p.data, before)
    assert state.step == step + 1


def test_adam_first_step_closed_form():
    p = Tensor([0.0], requires_grad=True, dtype=np.float64)
    p.grad = np.array([1.0])
    adam_step([p], AdamState.for_params([p], lr=1e-4, eps=1e-12))
    np.testing.assert_allclose(p.data, [-1e-4], rtol=1e-6)


def test_adam_hundred_steps_matches_scalar_reference():
    p = Tensor([0.0], requires_grad=True, dtype=np.float64)
    opt = Adam([p], lr=1e-4)
    for _ in range(100):
        p.grad = np.array([1.0])
        opt.step()
    ref = oracles.adam_scalar([1.0] * 100, lr=1e-4)
    np.testing.assert_allclose(p.data[0], ref[-1], rtol=1e-9)
    assert abs(-p.data[0] - 100 * 1e-4) <= 0.01 * 100 * 1e-4


def test_adam_errors():
    p = Tensor([1.0], requires_grad=True, name="w")
    with pytest.raises(ContractError):
        adam_step([p], AdamState.for_params([p]))
    p.grad = np.array([np.inf], dtype=np.float32)
    with pytest.raises(NumericError, match="w"):
        adam_step([p], AdamState.for_params([p]))
    p.grad = np.array([1.0], dtype=np.float32)
    with pytest.raises(DimensionError):
        adam_step([p], AdamState(m=[np.zeros(2)], v=[np.zeros(2)]))


# -- checkpoints -------------------------------------------------------------

def test_checkpoint_roundtrip_and_layout(tmp_path, rng):
    tensors = {"a.weight": rng.normal(size=(2, 3)).astype(np.float32), "b": np.float32([1.5])}
    path = tmp_path / "m.texf"
    save_tensors(path, tensors)
    raw = path.read_bytes()
    assert raw[:4] == b"TEXF"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:12], "little") == 2
    loaded = load_tensors(path)
    assert list(loaded) == ["a.weight", "b"]
    np.testing.assert_array_equal(loaded["a.weight"], tensors["a.weight"])


def test_checkpoint_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.texf"
    bad.write_bytes(b"NOPE" + bytes(8))
    with pytest.raises(ParseError):
        load_tensors(bad)
    save_tensors(bad, {"x": np.zeros(4, dtype=np.float32)})
    bad.write_bytes(bad.read_bytes()[:-3])
    with pytest.raises(ParseError):
        load_tensors(bad)


def test_adam_state_roundtrip(tmp_path):
    p = Tensor([1.0, 2.0], requires_grad=True)
    opt = Adam([p], lr=3e-4)
    p.grad = np.float32([0.5, -1.0])
    opt.step()
    save_adam_state(tmp_path / "o.adam", opt.state, ["p"])
    st2 = load_adam_state(tmp_path / "o.adam", ["p"])
    assert st2.step == 1 and st2.lr == pytest.approx(3e-4)
    np.testing.assert_array_equal(st2.m[0], opt.state.m[0])
    np.testing.assert_array_equal(st2.v[0], opt.state.v[0])


def test_concat_shapes():
    out = concat([Tensor(np.zeros((2, 3))), Tensor(np.ones((2, 1)))])
    assert out.shape == (2, 4)
