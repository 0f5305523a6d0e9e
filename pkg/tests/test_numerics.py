import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gmsam import numerics as nx
from gmsam.errors import ConfigurationError, DimensionError, NumericDomainError, TrainingDivergenceError
from tests.cases import gma_block_case, primitive_cases


def f64(a):
    return nx.Tensor(np.asarray(a, dtype=np.float64), dtype=np.float64)


# -- tensor basics -------------------------------------------------------------


def test_size_matches_shape_and_strides_cover_buffer():
    t = nx.Tensor(np.arange(24.0).reshape(2, 3, 4))
    assert t.size == 2 * 3 * 4 == t.data.size
    assert t.data.flags.c_contiguous
    offsets = {sum(i * s for i, s in zip(idx, t.strides)) for idx in np.ndindex(t.shape)}
    assert len(offsets) == t.size


def test_precision_context_switches_default_dtype():
    assert nx.get_default_dtype() == np.float32
    with nx.precision(64):
        assert nx.Tensor([1.0]).dtype == np.float64
    assert nx.Tensor([1.0]).dtype == np.float32


# -- matmul --------------------------------------------------------------------


def test_matmul_identity_and_hand_values():
    m = f64([[1, 2], [3, 4]])
    np.testing.assert_array_equal(nx.matmul(f64(np.eye(2)), m).data, m.data)
    np.testing.assert_array_equal(nx.matmul(f64([[1, 2]]), f64([[3], [4]])).data, [[11]])


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(5, 7)), rng.normal(size=(7, 3))
    ref = np.zeros((5, 3))
    for i in range(5):
        for j in range(3):
            for k in range(7):
                ref[i, j] += a[i, k] * b[k, j]
    np.testing.assert_allclose(nx.matmul(f64(a), f64(b)).data, ref, rtol=0, atol=1e-12)


def test_matmul_shape_mismatch_names_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 2\)"):
        nx.matmul(f64(np.ones((2, 3))), f64(np.ones((4, 2))))


# -- conv2d --------------------------------------------------------------------


def naive_conv(x, w, stride, padding, groups):
    b, c, h, wd = x.shape
    o, cg, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho, wo = (h + 2 * padding - kh) // stride + 1, (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((b, o, ho, wo))
    per = o // groups
    for n in range(b):
        for oc in range(o):
            g = oc // per
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ci in range(cg):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[n, g * cg + ci, i * stride + u, j * stride + v] * w[oc, ci, u, v]
                    out[n, oc, i, j] = acc
    return out


def test_conv_all_ones():
    out = nx.conv2d(f64(np.ones((1, 1, 3, 3))), f64(np.ones((1, 1, 3, 3))))
    np.testing.assert_array_equal(out.data, [[[[9.0]]]])


def test_depthwise_identity_kernel():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(1, 3, 5, 5))
    k = np.zeros((3, 1, 3, 3))
    k[:, 0, 1, 1] = 1
    np.testing.assert_array_equal(nx.conv2d(f64(x), f64(k), padding=1, groups=3).data, x)


def test_grouped_conv_matches_six_loop_oracle():
    rng = np.random.default_rng(3)
    x, w = rng.normal(size=(2, 4, 8, 8)), rng.normal(size=(6, 2, 3, 3))
    out = nx.conv2d(f64(x), f64(w), stride=2, groups=2).data
    np.testing.assert_allclose(out, naive_conv(x, w, 2, 0, 2), rtol=0, atol=1e-12)


@pytest.mark.parametrize("c,o,groups", [(4, 6, 3), (6, 4, 4)])
def test_conv_divisibility_is_config_error(c, o, groups):
    with pytest.raises(ConfigurationError):
        nx.conv2d(f64(np.ones((1, c, 4, 4))), f64(np.ones((o, max(c // groups, 1), 1, 1))), groups=groups)


def test_dense_conv_with_diagonal_kernel_equals_depthwise():
    rng = np.random.default_rng(4)
    c = 3
    x, kd = rng.normal(size=(1, c, 6, 6)), rng.normal(size=(c, 1, 3, 3))
    dense = np.zeros((c, c, 3, 3))
    for i in range(c):
        dense[i, i] = kd[i, 0]
    a = nx.conv2d(f64(x), f64(dense), padding=1).data
    b = nx.conv2d(f64(x), f64(kd), padding=1, groups=c).data
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(h=st.integers(3, 9), k=st.sampled_from([1, 3]), stride=st.integers(1, 3), padding=st.integers(0, 2))
def test_conv_output_size_formula(h, k, stride, padding):
    out = nx.conv2d(f64(np.ones((1, 2, h, h))), f64(np.ones((2, 2, k, k))), stride=stride, padding=padding)
    expected = (h + 2 * padding - k) // stride + 1
    assert out.shape == (1, 2, expected, expected)


# -- softmax -------------------------------------------------------------------


def test_softmax_examples():
    np.testing.assert_array_equal(nx.softmax(f64([0.0, 0.0])).data, [0.5, 0.5])
    np.testing.assert_array_equal(nx.softmax(f64([1000.0, 1000.0])).data, [0.5, 0.5])
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(nx.softmax(f64(x)).data, np.exp(x) / np.exp(x).sum(), rtol=0, atol=1e-15)


def test_softmax_rejects_non_finite():
    with pytest.raises(NumericDomainError):
        nx.softmax(f64([1.0, np.inf]))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 4), st.integers(1, 8)),
              elements=st.floats(-1e4, 1e4, width=32)))
def test_softmax_rows_sum_to_one(x):
    y = nx.softmax(nx.Tensor(x), axis=-1).data
    assert np.all(y >= 0)
    np.testing.assert_allclose(y.sum(axis=-1), 1.0, atol=1e-6)


# -- huber ---------------------------------------------------------------------


@pytest.mark.parametrize("r,expected", [(0.0, 0.0), (0.5, 0.125), (2.0, 1.5)])
def test_huber_examples(r, expected):
    assert nx.huber_loss(f64([r]), f64([0.0]), 1.0).item() == expected


def test_huber_is_c1_at_delta():
    delta = 1.0

    def quadratic(r):
        return 0.5 * r * r

    def linear(r):
        return delta * (abs(r) - 0.5 * delta)

    for r in (delta - 1e-9, delta + 1e-9):
        assert abs(quadratic(r) - linear(r)) < 1e-12
        # the module picks one branch on each side; its value agrees with both
        got = nx.huber_loss(f64([r]), f64([0.0]), delta).item()
        assert abs(got - quadratic(r)) < 1e-12 and abs(got - linear(r)) < 1e-12
    slopes = []
    for r in (delta - 1e-9, delta + 1e-9):
        p = nx.Tensor(np.array([r]), requires_grad=True, dtype=np.float64)
        nx.huber_loss(p, f64([0.0]), delta).backward()
        slopes.append(p.grad[0])
    np.testing.assert_allclose(slopes, delta, atol=1e-8)


def test_huber_shape_mismatch():
    with pytest.raises(DimensionError):
        nx.huber_loss(f64(np.ones(3)), f64(np.ones(4)))


# -- optimizer -----------------------------------------------------------------


def test_zero_grads_leave_params_unchanged():
    p = {"w": f64([1.0, -2.0])}
    nx.optimizer_step(p, {"w": np.zeros(2)}, state := nx.OptimizerState())
    np.testing.assert_array_equal(p["w"].data, [1.0, -2.0])
    assert state.step == 1


def test_first_step_moves_by_lr():
    p = {"x": f64([0.5])}
    state = nx.OptimizerState()
    nx.optimizer_step(p, {"x": np.array([1.0])}, state)
    # bias-corrected moments are exactly g and g^2, so the step is lr * 1 / (1 + eps)
    np.testing.assert_allclose(0.5 - p["x"].data[0], 3e-4 / (1 + 1e-8), rtol=1e-12)


def test_quadratic_bowl_descends():
    x = nx.Tensor(np.array([1.0]), requires_grad=True, dtype=np.float64)
    state = nx.OptimizerState()
    steps = []
    for _ in range(200):
        x.grad = None
        nx.tsum(nx.mul(x, x)).backward()
        nx.optimizer_step({"x": x}, {"x": x.grad}, state)
        steps.append(state.step)
    assert abs(x.data[0]) < 1.0
    assert steps == list(range(1, 201))
    assert state.first_moment["x"].shape == x.shape == state.second_moment["x"].shape


def test_non_finite_gradient_names_parameter():
    p = {"a": f64([1.0]), "b": f64([2.0])}
    with pytest.raises(TrainingDivergenceError) as err:
        nx.optimizer_step(p, {"a": np.array([0.1]), "b": np.array([np.nan])}, nx.OptimizerState())
    assert err.value.parameter == "b"
    np.testing.assert_array_equal(p["a"].data, [1.0])


# -- gradient checks -----------------------------------------------------------


def test_gradient_check_linear_function():
    assert nx.gradient_check(lambda x: nx.tsum(x), [f64(np.random.default_rng(0).normal(size=(3, 4)))]) < 1e-10


def test_gradient_check_requires_64_bit():
    with pytest.raises(TypeError):
        nx.gradient_check(lambda x: nx.tsum(x), [nx.Tensor(np.ones(3, dtype=np.float32))])


@pytest.mark.parametrize("name,f,inputs", primitive_cases(), ids=[c[0] for c in primitive_cases()])
def test_primitive_gradients(name, f, inputs):
    assert nx.gradient_check(f, inputs) < 1e-4


def test_primitive_cases_cover_every_primitive():
    covered = {name.split(".")[0] for name, _, _ in primitive_cases()}
    assert covered == {p.__name__ for p in nx.PRIMITIVES}


def test_huber_gradient_against_random_target():
    rng = np.random.default_rng(5)
    target = f64(rng.normal(size=(4, 4)) * 2)
    assert nx.gradient_check(lambda p: nx.huber_loss(p, target), [f64(rng.normal(size=(4, 4)))]) < 1e-6


def test_gma_block_gradient():
    block, f, inputs = gma_block_case()
    assert nx.gradient_check(f, inputs, wrt=block.parameters()) < 1e-4


# -- record / replay, determinism -------------------------------------------------


def test_record_replays_bit_identically():
    rng = np.random.default_rng(6)
    x, w = f64(rng.normal(size=(1, 2, 5, 5))), f64(rng.normal(size=(3, 2, 3, 3)))
    with nx.record() as rec:
        y = nx.softmax(nx.reshape(nx.conv2d(x, w, padding=1), (3, 25)), axis=-1)
        nx.tsum(y)
    assert rec.ops == ["Conv2d", "Reshape", "Softmax", "Sum"]
    assert rec.replay_matches()


def test_backward_visits_in_reverse_topological_order():
    a = nx.Tensor(np.array([2.0]), requires_grad=True, dtype=np.float64)
    b = nx.mul(a, a)
    c = nx.add(b, a)
    d = nx.mul(c, b)
    d.backward()
    # d = (a^2 + a) * a^2 = a^4 + a^3 ; d' = 4a^3 + 3a^2 = 44 at a = 2
    assert a.grad[0] == 44.0


def test_forward_determinism():
    from gmsam.encoders import GmaBlockConfig, build_block

    x = nx.Tensor(np.random.default_rng(7).normal(size=(1, 16, 4, 4)))
    outs = [build_block(GmaBlockConfig(16, 2), seed=3)(x).data for _ in range(2)]
    assert outs[0].tobytes() == outs[1].tobytes()


def test_no_grad_builds_no_graph():
    x = nx.Tensor(np.ones(3), requires_grad=True)
    with nx.no_grad():
        y = nx.mul(x, x)
    assert not y.requires_grad


def test_flop_counter_examples():
    with nx.count_flops() as c:
        nx.matmul(f64(np.ones((2, 3))), f64(np.ones((3, 4))))
    assert c.total == 48
    with nx.count_flops() as c:
        nx.conv2d(f64(np.ones((1, 8, 4, 4))), f64(np.ones((8, 8, 1, 1))))
    assert c.total == 2048
