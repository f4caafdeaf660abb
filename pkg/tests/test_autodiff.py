"""Finite-difference checks for every reverse-mode primitive."""

import math

import numpy as np
import pytest

from seekqa.autodiff import (
    Tensor,
    add_n,
    concat,
    dot,
    log_softmax,
    matvec,
    pack,
    parameters_of,
    softmax,
    stack,
)


def numeric_grad(f, x0, eps=1e-6):
    """Central differences of a scalar function of one ndarray."""
    g = np.zeros_like(x0, dtype=np.float64)
    it = np.nditer(x0, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x0.copy()
        xp[idx] += eps
        xm = x0.copy()
        xm[idx] -= eps
        g[idx] = (f(xp) - f(xm)) / (2.0 * eps)
    return g


def assert_grad_matches(build_loss, x0, tol=1e-6):
    """build_loss maps an ndarray to (Tensor loss, Tensor input)."""
    loss, x = build_loss(x0)
    loss.backward()
    num = numeric_grad(lambda a: build_loss(a)[0].item(), x0)
    np.testing.assert_allclose(x.grad, num, rtol=tol, atol=tol)


class TestElementwise:
    def test_unary_ops(self):
        rng = np.random.default_rng(0)
        cases = [
            (lambda t: t.tanh(), lambda a: a),
            (lambda t: t.sigmoid(), lambda a: a),
            (lambda t: t.exp(), lambda a: a),
            (lambda t: t.log(), lambda a: np.abs(a) + 0.5),
            (lambda t: -t, lambda a: a),
            (lambda t: t / 3.0, lambda a: a),
        ]
        for op, domain in cases:
            for _ in range(5):
                x0 = domain(rng.standard_normal(6))
                w = rng.standard_normal(6)

                def build(a, op=op, w=w):
                    x = Tensor(a)
                    return (op(x) * Tensor(w)).sum(), x

                assert_grad_matches(build, x0)

    def test_forward_values(self):
        x = Tensor([0.0, 1.0, -1.0])
        np.testing.assert_allclose(x.tanh().data, np.tanh(x.data))
        np.testing.assert_allclose(x.sigmoid().data, 1.0 / (1.0 + np.exp(-x.data)))
        np.testing.assert_allclose(x.exp().data, np.exp(x.data))

    def test_sigmoid_is_stable_at_extremes(self):
        x = Tensor([600.0, -600.0])
        s = x.sigmoid()
        np.testing.assert_allclose(s.data, [1.0, 0.0], atol=1e-12)
        s.sum().backward()
        assert np.all(np.isfinite(x.grad))

    def test_binary_ops(self):
        rng = np.random.default_rng(1)
        ops = [
            lambda a, b: a + b,
            lambda a, b: a * b,
            lambda a, b: a - b,
        ]
        for op in ops:
            for _ in range(5):
                a0 = rng.standard_normal(5)
                b0 = rng.standard_normal(5)
                a, b = Tensor(a0), Tensor(b0)
                loss = (op(a, b) * op(a, b)).sum()
                loss.backward()
                num_a = numeric_grad(
                    lambda v: float((op(v, b0) * op(v, b0)).sum()), a0
                )
                num_b = numeric_grad(
                    lambda v: float((op(a0, v) * op(a0, v)).sum()), b0
                )
                np.testing.assert_allclose(a.grad, num_a, rtol=1e-6, atol=1e-6)
                np.testing.assert_allclose(b.grad, num_b, rtol=1e-6, atol=1e-6)

    def test_python_float_operands(self):
        x = Tensor([1.0, 2.0])
        y = (2.0 * x + 1.0 - x) * 3.0
        np.testing.assert_allclose(y.data, [6.0, 9.0])
        y.sum().backward()
        np.testing.assert_allclose(x.grad, [3.0, 3.0])

    def test_rsub(self):
        x = Tensor([1.0, 4.0])
        y = 10.0 - x
        np.testing.assert_allclose(y.data, [9.0, 6.0])
        y.sum().backward()
        np.testing.assert_allclose(x.grad, [-1.0, -1.0])

    def test_scalar_broadcast_reduces_gradient(self):
        v = Tensor([1.0, 2.0, 3.0])
        c = Tensor(2.0)
        (v * c).sum().backward()
        np.testing.assert_allclose(c.grad, 6.0)  # sum of v
        np.testing.assert_allclose(v.grad, [2.0, 2.0, 2.0])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            Tensor([1.0, 2.0]) + Tensor([1.0, 2.0, 3.0])
        with pytest.raises(ValueError, match="shape mismatch"):
            Tensor([[1.0]]) * Tensor([1.0, 2.0])


class TestReductions:
    def test_sum_mean_grads(self):
        x = Tensor(np.arange(4.0))
        x.sum().backward()
        np.testing.assert_allclose(x.grad, np.ones(4))
        y = Tensor(np.arange(4.0))
        y.mean().backward()
        np.testing.assert_allclose(y.grad, np.full(4, 0.25))

    def test_pick_scatters(self):
        x = Tensor([1.0, 2.0, 3.0])
        (x.pick(1) * 5.0).backward()
        np.testing.assert_allclose(x.grad, [0.0, 5.0, 0.0])

    def test_row_scatters(self):
        m = Tensor(np.arange(6.0).reshape(2, 3))
        m.row(1).sum().backward()
        np.testing.assert_allclose(m.grad, [[0, 0, 0], [1, 1, 1]])

    def test_pick_requires_1d(self):
        with pytest.raises(ValueError, match="1-D"):
            Tensor(np.zeros((2, 2))).pick(0)

    def test_row_requires_2d(self):
        with pytest.raises(ValueError, match="2-D"):
            Tensor(np.zeros(3)).row(0)


class TestLinalg:
    def test_matvec_grads(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            w0 = rng.standard_normal((4, 3))
            x0 = rng.standard_normal(3)
            s = rng.standard_normal(4)
            w, x = Tensor(w0), Tensor(x0)
            (matvec(w, x) * Tensor(s)).sum().backward()
            num_w = numeric_grad(lambda a: float(((a @ x0) * s).sum()), w0)
            num_x = numeric_grad(lambda a: float(((w0 @ a) * s).sum()), x0)
            np.testing.assert_allclose(w.grad, num_w, rtol=1e-6, atol=1e-6)
            np.testing.assert_allclose(x.grad, num_x, rtol=1e-6, atol=1e-6)

    def test_matvec_shape_errors(self):
        with pytest.raises(ValueError, match="matvec"):
            matvec(Tensor(np.zeros((2, 3))), Tensor(np.zeros(2)))
        with pytest.raises(ValueError, match="matvec"):
            matvec(Tensor(np.zeros(3)), Tensor(np.zeros(3)))

    def test_dot_grads(self):
        rng = np.random.default_rng(3)
        u0 = rng.standard_normal(5)
        v0 = rng.standard_normal(5)
        u, v = Tensor(u0), Tensor(v0)
        dot(u, v).backward()
        np.testing.assert_allclose(u.grad, v0)
        np.testing.assert_allclose(v.grad, u0)

    def test_dot_shape_errors(self):
        with pytest.raises(ValueError, match="dot"):
            dot(Tensor(np.zeros(2)), Tensor(np.zeros(3)))


class TestAggregation:
    def test_concat_routes_gradient_slices(self):
        a = Tensor([1.0, 2.0])
        b = Tensor([3.0])
        c = Tensor([4.0, 5.0, 6.0])
        out = concat([a, b, c])
        np.testing.assert_allclose(out.data, [1, 2, 3, 4, 5, 6])
        w = np.arange(6.0)
        (out * Tensor(w)).sum().backward()
        np.testing.assert_allclose(a.grad, w[0:2])
        np.testing.assert_allclose(b.grad, w[2:3])
        np.testing.assert_allclose(c.grad, w[3:6])

    def test_add_n_accumulates_repeats(self):
        x = Tensor([1.0, 1.0])
        add_n([x, x, x]).sum().backward()
        np.testing.assert_allclose(x.grad, [3.0, 3.0])

    def test_add_n_value(self):
        parts = [Tensor([1.0]), Tensor([2.0]), Tensor([4.0])]
        np.testing.assert_allclose(add_n(parts).data, [7.0])

    def test_pack_gathers_scalars(self):
        xs = [Tensor(float(i)) for i in range(3)]
        out = pack(xs)
        np.testing.assert_allclose(out.data, [0.0, 1.0, 2.0])
        (out * Tensor([1.0, 10.0, 100.0])).sum().backward()
        assert [float(x.grad) for x in xs] == [1.0, 10.0, 100.0]

    def test_stack_rows(self):
        rows = [Tensor([1.0, 2.0]), Tensor([3.0, 4.0])]
        out = stack(rows)
        assert out.shape == (2, 2)
        out.row(1).sum().backward()
        np.testing.assert_allclose(rows[0].grad, [0.0, 0.0])
        np.testing.assert_allclose(rows[1].grad, [1.0, 1.0])

    def test_validation(self):
        with pytest.raises(ValueError):
            concat([])
        with pytest.raises(ValueError):
            add_n([])
        with pytest.raises(ValueError):
            add_n([Tensor([1.0]), Tensor([1.0, 2.0])])
        with pytest.raises(ValueError):
            pack([Tensor([1.0])])
        with pytest.raises(ValueError):
            stack([Tensor(1.0)])


class TestNormalizers:
    def test_softmax_forward(self):
        x = Tensor([1.0, 2.0, 3.0])
        y = softmax(x)
        e = np.exp(x.data)
        np.testing.assert_allclose(y.data, e / e.sum(), atol=1e-12)
        np.testing.assert_allclose(y.data.sum(), 1.0, atol=1e-12)

    def test_softmax_shift_invariant_and_stable(self):
        a = softmax(Tensor([1.0, 2.0, 3.0])).data
        b = softmax(Tensor([1001.0, 1002.0, 1003.0])).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_softmax_grads(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            x0 = rng.standard_normal(6)
            w = rng.standard_normal(6)

            def build(a, w=w):
                x = Tensor(a)
                return (softmax(x) * Tensor(w)).sum(), x

            assert_grad_matches(build, x0)

    def test_log_softmax_matches_log_of_softmax(self):
        x0 = np.array([0.5, -1.0, 2.0])
        np.testing.assert_allclose(
            log_softmax(Tensor(x0)).data,
            np.log(softmax(Tensor(x0)).data),
            atol=1e-12,
        )

    def test_log_softmax_grads(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            x0 = rng.standard_normal(6)
            w = rng.standard_normal(6)

            def build(a, w=w):
                x = Tensor(a)
                return (log_softmax(x) * Tensor(w)).sum(), x

            assert_grad_matches(build, x0)

    def test_1d_required(self):
        with pytest.raises(ValueError):
            softmax(Tensor(np.zeros((2, 2))))
        with pytest.raises(ValueError):
            log_softmax(Tensor(1.0))


class TestGraphMechanics:
    def test_reused_node_accumulates_once_per_path(self):
        # f(x) = tanh(x)^2 + tanh(x); f'(x) = (2 tanh(x) + 1)(1 - tanh(x)^2)
        x = Tensor(0.7)
        t = x.tanh()
        (t * t + t).backward()
        th = math.tanh(0.7)
        np.testing.assert_allclose(float(x.grad), (2 * th + 1) * (1 - th * th),
                                   atol=1e-12)

    def test_self_addition(self):
        x = Tensor([2.0])
        (x + x).sum().backward()
        np.testing.assert_allclose(x.grad, [2.0])

    def test_deep_chain_beyond_recursion_limit(self):
        x = Tensor(0.5)
        y = x
        for _ in range(5000):
            y = y * 1.0
        y.backward()
        np.testing.assert_allclose(float(x.grad), 1.0)

    def test_diamond_topology_numeric(self):
        rng = np.random.default_rng(6)
        x0 = rng.standard_normal(4)

        def build(a):
            x = Tensor(a)
            t = x.tanh()
            left = t * Tensor([1.0, 2.0, 3.0, 4.0])
            right = t.sigmoid()
            return (left + right).sum(), x

        assert_grad_matches(build, x0)

    def test_backward_requires_scalar(self):
        with pytest.raises(ValueError, match="scalar"):
            Tensor([1.0, 2.0]).backward()

    def test_zero_grad(self):
        x = Tensor([1.0, 2.0])
        x.sum().backward()
        assert np.any(x.grad != 0)
        x.zero_grad()
        np.testing.assert_allclose(x.grad, [0.0, 0.0])

    def test_item(self):
        assert Tensor(3.5).item() == 3.5


class TestParametersOf:
    def test_collects_tensors_and_lists(self):
        class Holder:
            def __init__(self):
                self.b_weight = Tensor([1.0])
                self.a_list = [Tensor([2.0]), "not a tensor", Tensor([3.0])]
                self.other = 42

        found = parameters_of(Holder())
        assert len(found) == 3
        # attribute order is sorted by name, list items keep their order
        np.testing.assert_allclose(found[0].data, [2.0])
        np.testing.assert_allclose(found[1].data, [3.0])
        np.testing.assert_allclose(found[2].data, [1.0])
