"""
Test cases for the reverse-mode differentiation engine
"""
import math

import pytest
import numpy as np

import gradflow as gf
from errors import NonFiniteInput, NonScalarLoss, ShapeMismatch


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def weighted_sum(tape, node, seed=7):
    """Scalar sum(w * node) with fixed random weights"""
    w = np.random.default_rng(seed).normal(size=node.shape)
    return gf.sum_(gf.mul(node, tape.const(w)))


def away_from_zero(rng, shape):
    x = rng.uniform(0.2, 1.5, size=shape)
    return x * rng.choice([-1.0, 1.0], size=shape)


class TestForwardValues:
    """Forward values of the primitive operations"""

    def test_matmul_identity(self, rng):
        tape = gf.Tape()
        a = rng.normal(size=(2, 2))
        out = gf.matmul(tape.const(np.eye(2)), tape.const(a))
        np.testing.assert_array_equal(out.value, a)

    def test_softmax_symmetric(self):
        tape = gf.Tape()
        out = gf.softmax_lastdim(tape.const(np.array([0.0, 0.0])))
        np.testing.assert_array_equal(out.value, [0.5, 0.5])

    def test_softmax_closed_form(self):
        tape = gf.Tape()
        out = gf.softmax_lastdim(tape.const(np.array([math.log(2.0), 0.0])))
        np.testing.assert_allclose(out.value, [2 / 3, 1 / 3], rtol=1e-12)

    def test_softmax_rows_sum_to_one(self, rng):
        tape = gf.Tape()
        out = gf.softmax_lastdim(tape.const(rng.normal(scale=5.0, size=(6, 9))))
        np.testing.assert_allclose(out.value.sum(axis=-1), 1.0, atol=1e-12)

    def test_layer_norm_closed_form(self):
        tape = gf.Tape()
        out = gf.layer_norm(tape.const(np.array([1.0, 3.0])), tape.const(np.ones(2)),
                            tape.const(np.zeros(2)), eps=0.0)
        np.testing.assert_allclose(out.value, [-1.0, 1.0])

    def test_layer_norm_moments(self, rng):
        tape = gf.Tape()
        out = gf.layer_norm(tape.const(rng.normal(3.0, 4.0, size=(5, 7))), tape.const(np.ones(7)),
                            tape.const(np.zeros(7)), eps=0.0)
        np.testing.assert_allclose(out.value.mean(axis=-1), 0.0, atol=1e-10)
        np.testing.assert_allclose(out.value.var(axis=-1), 1.0, atol=1e-8)

    def test_broadcast_add(self):
        tape = gf.Tape()
        out = gf.add(tape.const(np.zeros((2, 3))), tape.const(np.array([1.0, 2.0, 3.0])))
        np.testing.assert_array_equal(out.value, [[1, 2, 3], [1, 2, 3]])

    def test_shape_mismatch(self):
        tape = gf.Tape()
        with pytest.raises(ShapeMismatch):
            gf.matmul(tape.const(np.ones((2, 3))), tape.const(np.ones((2, 3))))
        with pytest.raises(ShapeMismatch):
            gf.add(tape.const(np.ones((2, 3))), tape.const(np.ones(2)))
        with pytest.raises(ShapeMismatch):
            gf.slice_axis(tape.const(np.ones(3)), -1, 2, 5)

    def test_shape_mismatch_is_value_error(self):
        tape = gf.Tape()
        with pytest.raises(ValueError):
            gf.layer_norm(tape.const(np.ones(3)), tape.const(np.ones(2)), tape.const(np.zeros(2)))

    def test_non_finite_input(self):
        tape = gf.Tape()
        with pytest.raises(NonFiniteInput):
            tape.param("x", np.array([1.0, np.nan]))
        with pytest.raises(NonFiniteInput):
            gf.scale(tape.const(np.array([1e308])), 10.0)

    def test_tape_is_topological(self, rng):
        tape = gf.Tape()
        x = tape.param("x", rng.normal(size=(2, 2)))
        y = gf.relu(gf.matmul(x, x))
        gf.mean(gf.add(y, x))
        for node in tape.nodes:
            assert all(pid < node.id for pid in node.parent_ids)

    def test_nodes_from_other_tape_rejected(self):
        first, second = gf.Tape(), gf.Tape()
        with pytest.raises(ValueError):
            gf.add(first.const(np.ones(2)), second.const(np.ones(2)))


class TestBackward:
    """Gradients from backward"""

    def test_mean_abs(self):
        tape = gf.Tape()
        x = tape.param("x", np.array([2.0, -3.0]))
        grads = gf.backward(tape, gf.mean(gf.abs_(x)))
        np.testing.assert_array_equal(grads[x], [0.5, -0.5])

    def test_constant_loss(self):
        tape = gf.Tape()
        x = tape.param("x", np.array([1.0, 2.0]))
        c = tape.const(np.array(4.0))
        grads = gf.backward(tape, c)
        np.testing.assert_array_equal(grads[x], [0.0, 0.0])

    def test_half_sum_of_squares(self):
        tape = gf.Tape()
        x = tape.param("x", np.array([1.0, 2.0]))
        grads = gf.backward(tape, gf.scale(gf.sum_(gf.mul(x, x)), 0.5))
        np.testing.assert_array_equal(grads[x], [1.0, 2.0])

    def test_only_parameters_receive_gradients(self):
        tape = gf.Tape()
        x = tape.param("x", np.array([1.0]))
        c = tape.const(np.array([3.0]))
        grads = gf.backward(tape, gf.sum_(gf.mul(x, c)))
        assert list(grads) == [x]

    def test_abs_and_relu_subgradient_at_zero(self):
        tape = gf.Tape()
        x = tape.param("x", np.array([0.0]))
        grads = gf.backward(tape, gf.sum_(gf.add(gf.abs_(x), gf.relu(x))))
        np.testing.assert_array_equal(grads[x], [0.0])

    def test_non_scalar_loss(self):
        tape = gf.Tape()
        x = tape.param("x", np.ones(3))
        with pytest.raises(NonScalarLoss):
            gf.backward(tape, gf.scale(x, 2.0))

    def test_shared_parent_accumulates(self):
        tape = gf.Tape()
        x = tape.param("x", np.array([3.0]))
        grads = gf.backward(tape, gf.sum_(gf.add(x, gf.mul(x, x))))
        np.testing.assert_array_equal(grads[x], [7.0])

    def test_replay_is_bit_identical(self, rng):
        a = rng.normal(size=(3, 4))

        def run():
            tape = gf.Tape()
            x = tape.param("x", a)
            loss = gf.mean(gf.relu(gf.matmul(x, gf.transpose_last(x))))
            return loss.value, gf.backward(tape, loss)[x]

        (l1, g1), (l2, g2) = run(), run()
        assert l1.tobytes() == l2.tobytes()
        assert g1.tobytes() == g2.tobytes()


class TestGradCheck:
    """Finite-difference checks for every primitive"""

    def test_quadratic(self, rng):
        err = gf.grad_check(lambda t, x: gf.sum_(gf.mul(x, x)), rng.normal(size=(3, 3)))
        assert err < 1e-7

    def test_linear(self, rng):
        weights = np.array([1.0, -2.0, 3.0, 0.5])
        err = gf.grad_check(lambda t, x: gf.sum_(gf.mul(x, t.const(weights))),
                            rng.normal(size=(4,)), eps=1e-3)
        assert err < 1e-9

    def test_matmul(self, rng):
        point = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(4, 2))}
        err = gf.grad_check(lambda t, p: weighted_sum(t, gf.matmul(p["a"], p["b"])), point)
        assert err < 1e-6

    def test_batched_matmul_with_shared_weight(self, rng):
        point = {"a": rng.normal(size=(2, 3, 4)), "b": rng.normal(size=(4, 2))}
        err = gf.grad_check(lambda t, p: weighted_sum(t, gf.matmul(p["a"], p["b"])), point)
        assert err < 1e-6

    def test_broadcast_add_sub_mul(self, rng):
        point = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(4,))}

        def f(t, p):
            return weighted_sum(t, gf.mul(gf.sub(p["a"], p["b"]), gf.add(p["a"], p["b"])))

        assert gf.grad_check(f, point) < 1e-6

    def test_scale(self, rng):
        assert gf.grad_check(lambda t, x: weighted_sum(t, gf.scale(x, -2.5)), rng.normal(size=(2, 3))) < 1e-6

    def test_relu(self, rng):
        x = away_from_zero(rng, (4, 4))
        assert gf.grad_check(lambda t, n: weighted_sum(t, gf.relu(n)), x) < 1e-6

    def test_abs(self, rng):
        x = away_from_zero(rng, (4, 4))
        assert gf.grad_check(lambda t, n: weighted_sum(t, gf.abs_(n)), x) < 1e-6

    def test_softmax(self, rng):
        x = rng.normal(size=(3, 4))
        assert gf.grad_check(lambda t, n: weighted_sum(t, gf.softmax_lastdim(n)), x) < 1e-6

    def test_layer_norm(self, rng):
        point = {
            "x": rng.normal(size=(3, 4)),
            "gamma": rng.normal(1.0, 0.3, size=(4,)),
            "beta": rng.normal(size=(4,)),
        }

        def f(t, p):
            return weighted_sum(t, gf.layer_norm(p["x"], p["gamma"], p["beta"], eps=1e-5))

        assert gf.grad_check(f, point) < 1e-6

    def test_concat_and_slice(self, rng):
        point = {"a": rng.normal(size=(2, 3)), "b": rng.normal(size=(2, 2))}

        def f(t, p):
            joined = gf.concat([p["a"], p["b"]], axis=-1)
            return weighted_sum(t, gf.slice_axis(joined, -1, 1, 4))

        assert gf.grad_check(f, point) < 1e-6

    def test_transpose_reshape_mean(self, rng):
        def f(t, n):
            return gf.mean(gf.mul(gf.reshape(gf.transpose_last(n), (6,)), t.const(np.arange(1.0, 7.0))))

        assert gf.grad_check(f, rng.normal(size=(2, 3))) < 1e-6
