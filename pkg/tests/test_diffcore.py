import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from agmax import diffcore as dc
from agmax.diffcore import Node, ParameterStore, tensor
from agmax.errors import GradCheckError, ShapeError

from gradcases import OP_CASES, worst_error


def naive_conv(x, w, b, pad):
    n, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = h + 2 * pad - k + 1, wd + 2 * pad - k + 1
    out = np.zeros((n, cout, ho, wo))
    for i in range(n):
        for o in range(cout):
            for y in range(ho):
                for xx in range(wo):
                    out[i, o, y, xx] = np.sum(xp[i, :, y : y + k, xx : xx + k] * w[o]) + (b[o] if b is not None else 0)
    return out


class TestForward:
    def test_relu(self):
        assert dc.relu(tensor([-1.0, 0.0, 2.0])).value.tolist() == [0.0, 0.0, 2.0]

    def test_softmax_symmetric(self):
        np.testing.assert_array_equal(dc.softmax(tensor([0.0, 0.0])).value, [0.5, 0.5])

    def test_softmax_large_logits_stable(self):
        p = dc.softmax(tensor([[1000.0, 0.0, -1000.0]])).value
        assert np.all(np.isfinite(p)) and p[0, 0] == 1.0

    def test_matmul_triple_loop(self, rng):
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
        oracle = np.array([[sum(a[i, k] * b[k, j] for k in range(4)) for j in range(2)] for i in range(3)])
        A, B = tensor(a, requires_grad=True), tensor(b, requires_grad=True)
        out = dc.matmul(A, B)
        np.testing.assert_allclose(out.value, oracle, rtol=1e-12)
        g = rng.normal(size=(3, 2))
        dc.backward(dc.sum(out * tensor(g)))
        # d/da[i,k] = sum_j g[i,j] b[k,j]; d/db[k,j] = sum_i a[i,k] g[i,j]
        ga = np.array([[sum(g[i, j] * b[k, j] for j in range(2)) for k in range(4)] for i in range(3)])
        gb = np.array([[sum(a[i, k] * g[i, j] for i in range(3)) for j in range(2)] for k in range(4)])
        np.testing.assert_allclose(A.grad, ga, rtol=1e-12)
        np.testing.assert_allclose(B.grad, gb, rtol=1e-12)

    @pytest.mark.parametrize("pad", [0, 1, 2])
    def test_conv2d_matches_naive_loop(self, rng, pad):
        x, w, b = rng.normal(size=(2, 3, 6, 5)), rng.normal(size=(4, 3, 3, 3)), rng.normal(size=4)
        got = dc.conv2d(tensor(x), tensor(w), tensor(b), padding=pad).value
        np.testing.assert_allclose(got, naive_conv(x, w, b, pad), rtol=1e-12, atol=1e-12)

    def test_max_pool_crops_remainder(self):
        x = np.arange(25.0).reshape(1, 1, 5, 5)
        out = dc.max_pool2d(tensor(x), 2).value
        np.testing.assert_array_equal(out[0, 0], [[6.0, 8.0], [16.0, 18.0]])

    def test_max_pool_tie_routes_gradient_to_first(self):
        x = tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
        dc.backward(dc.sum(dc.max_pool2d(x, 2)))
        np.testing.assert_array_equal(x.grad[0, 0], [[1.0, 0.0], [0.0, 0.0]])

    def test_one_hot(self):
        np.testing.assert_array_equal(dc.one_hot([2, 0], 3).value, [[0, 0, 1], [1, 0, 0]])

    def test_log_floor(self):
        x = tensor([0.0, 1.0], requires_grad=True)
        y = dc.log(x)
        assert y.value[0] == pytest.approx(np.log(dc.LOG_FLOOR))
        dc.backward(dc.sum(y))
        assert x.grad.tolist() == [0.0, 1.0]

    def test_concat_and_getitem(self, rng):
        a, b = rng.normal(size=(2, 3)), rng.normal(size=(1, 3))
        c = dc.concat([tensor(a), tensor(b)], axis=0)
        np.testing.assert_array_equal(c.value, np.concatenate([a, b]))
        np.testing.assert_array_equal(c[1:].value, np.concatenate([a[1:], b]))


class TestShapeErrors:
    @pytest.mark.parametrize(
        "op",
        [
            lambda: dc.add(tensor(np.ones((2, 3))), tensor(np.ones((3, 2)))),
            lambda: dc.matmul(tensor(np.ones((2, 3))), tensor(np.ones((2, 3)))),
            lambda: dc.conv2d(tensor(np.ones((1, 2, 4, 4))), tensor(np.ones((1, 3, 3, 3)))),
            lambda: dc.reshape(tensor(np.ones(6)), (4, 2)),
        ],
    )
    def test_structured_error(self, op):
        with pytest.raises(ShapeError) as info:
            op()
        assert "(" in str(info.value)  # names both shapes

    def test_error_names_op(self):
        with pytest.raises(ShapeError, match="matmul"):
            dc.matmul(tensor(np.ones((2, 3))), tensor(np.ones((2, 3))))

    def test_scalar_broadcast_allowed(self):
        np.testing.assert_array_equal((tensor(np.ones(3)) * 2.0).value, [2.0, 2.0, 2.0])


class TestBackward:
    def test_square(self):
        x = tensor(3.0, requires_grad=True)
        dc.backward(x * x)
        assert x.grad == 6.0

    def test_diamond_fanout(self):
        x = tensor(1.5, requires_grad=True)
        dc.backward(x + x)
        assert x.grad == 2.0

    def test_softmax_ce_identity(self, rng):
        z = rng.normal(size=(5, 4))
        y = rng.integers(0, 4, 5)
        zn = tensor(z, requires_grad=True)
        loss = -dc.mean(dc.sum(dc.one_hot(y, 4) * dc.log(dc.softmax(zn)), axis=1))
        dc.backward(loss)
        e = np.exp(z - z.max(1, keepdims=True))
        expected = (e / e.sum(1, keepdims=True) - np.eye(4)[y]) / 5
        np.testing.assert_allclose(zn.grad, expected, atol=1e-12)

    def test_non_scalar_root_rejected(self):
        with pytest.raises(ShapeError):
            dc.backward(tensor(np.ones(3), requires_grad=True) * 2.0)

    def test_root_gradient_is_one(self):
        x = tensor(2.0, requires_grad=True)
        y = x * 3.0
        dc.backward(y)
        assert y.grad == 1.0

    def test_sum_rule_exact(self, rng):
        v = rng.normal(size=(3, 4))
        f = lambda x: dc.sum(dc.exp(x))  # noqa: E731
        g = lambda x: dc.sum(dc.relu(x) * 2.0)  # noqa: E731
        grads = []
        for fn in (f, g, lambda x: f(x) + g(x)):
            x = tensor(v, requires_grad=True)
            dc.backward(fn(x))
            grads.append(x.grad)
        np.testing.assert_array_equal(grads[0] + grads[1], grads[2])

    def test_deterministic(self, rng):
        x0 = rng.normal(size=(2, 2, 5, 5))
        w0 = rng.normal(size=(3, 2, 3, 3))
        out = []
        for _ in range(2):
            x, w = tensor(x0, requires_grad=True), tensor(w0, requires_grad=True)
            dc.backward(dc.sum(dc.max_pool2d(dc.relu(dc.conv2d(x, w, padding=1)), 2)))
            out.append((x.grad.tobytes(), w.grad.tobytes()))
        assert out[0] == out[1]

    def test_stop_gradient_blocks(self):
        x = tensor(2.0, requires_grad=True)
        dc.backward(x * dc.stop_gradient(x))
        assert x.grad == 2.0

    def test_leaf_grads_accumulate_until_zeroed(self):
        x = tensor(1.0, requires_grad=True)
        dc.backward(x * 2.0)
        dc.backward(x * 3.0)
        assert x.grad == 5.0
        x.zero_grad()
        assert x.grad == 0.0


class TestGradCheck:
    def test_sum_of_squares(self, rng):
        x = rng.uniform(0.5, 2.0, (4, 3)) * rng.choice([-1, 1], (4, 3))
        assert dc.grad_check(lambda v: dc.sum(v * v), x) < 1e-6

    def test_mi_loss(self, rng):
        from agmax.agreement import mi_loss

        x = rng.normal(size=(2, 8, 5))
        assert dc.grad_check(lambda v: mi_loss(v[0], v[1]), x) < 1e-4

    def test_nan_output_is_error(self):
        with pytest.raises(GradCheckError):
            dc.grad_check(lambda v: dc.sum(v) * float("nan"), np.ones(3))

    def test_bad_step(self):
        with pytest.raises(ValueError):
            dc.grad_check(lambda v: dc.sum(v), np.ones(3), h=0.0)

    def test_reports_mismatch(self):
        # relu's backward zeroes the negative coordinate; the identity's numeric gradient does not
        x = np.array([-1.0, 2.0])
        relu_sum = lambda v: dc.sum(dc.relu(v))  # noqa: E731
        plain_sum = lambda v: dc.sum(v)  # noqa: E731
        assert dc.grad_check(relu_sum, x, reference=plain_sum) > 0.5

    @pytest.mark.parametrize("name", sorted(OP_CASES))
    def test_op(self, name):
        assert worst_error(OP_CASES[name], trials=10, seed=1) < 1e-4


class TestProperties:
    @settings(max_examples=50, deadline=None)
    @given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=8), elements=st.floats(-50, 50)))
    def test_softmax_rows(self, z):
        p = dc.softmax(tensor(z)).value
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(hnp.arrays(np.float64, (3, 4), elements=st.floats(-2, 2)), st.floats(-3, 3))
    def test_softmax_shift_invariant(self, z, c):
        np.testing.assert_allclose(dc.softmax(tensor(z + c)).value, dc.softmax(tensor(z)).value, atol=1e-12)


class TestParameterStore:
    def test_order_and_uniqueness(self):
        s = ParameterStore()
        s.add("b", np.zeros(2))
        s.add("a", np.ones(3))
        assert s.names() == ["b", "a"]
        assert s.num_params() == 5
        with pytest.raises(KeyError):
            s.add("a", np.zeros(1))

    def test_state_roundtrip(self):
        s = ParameterStore()
        s.add("w", np.arange(4.0))
        state = s.state()
        s["w"].value = np.zeros(4)
        s.load_state(state)
        np.testing.assert_array_equal(s["w"].value, np.arange(4.0))

    def test_nodes_require_grad(self):
        s = ParameterStore()
        p = s.add("w", np.ones(2))
        assert isinstance(p, Node) and p.requires_grad
