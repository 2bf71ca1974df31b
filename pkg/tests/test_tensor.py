import math

import numpy as np
import pytest

from skimrnn.tensor import (
    ContractError,
    DimensionError,
    DomainError,
    Tape,
    Tensor,
    add,
    backward,
    clamp_min,
    concat,
    concat_all,
    dot,
    elementwise,
    exp,
    log,
    matvec,
    mul,
    neg,
    scale,
    sigmoid,
    smul,
    softmax,
    sub,
    take_row,
    tanh,
)

from gradcheck import assert_grads_close


class TestMatvec:
    def test_identity(self):
        out = matvec(Tensor(np.eye(3)), Tensor([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(out.data, [1.0, 2.0, 3.0])

    def test_hand_example(self):
        out = matvec(Tensor([[1.0, 1.0], [0.0, 2.0]]), Tensor([3.0, 4.0]))
        np.testing.assert_array_equal(out.data, [7.0, 8.0])

    def test_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2,\)"):
            matvec(Tensor(np.zeros((2, 3))), Tensor(np.zeros(2)))


class TestElementwise:
    def test_sigmoid_at_zero(self):
        assert sigmoid(Tensor([0.0])).data[0] == 0.5

    def test_mul(self):
        np.testing.assert_array_equal(
            mul(Tensor([1.0, 2.0]), Tensor([3.0, 4.0])).data, [3.0, 8.0])

    def test_sigmoid_sum_gradient_closed_form(self):
        x = Tensor([0.0, 0.0])
        with Tape():
            backward(sigmoid(x).sum())
        np.testing.assert_allclose(x.grad, [0.25, 0.25], atol=1e-15)

    def test_binary_shape_mismatch(self):
        with pytest.raises(DimensionError):
            add(Tensor([1.0]), Tensor([1.0, 2.0]))

    def test_log_domain(self):
        with pytest.raises(DomainError):
            log(Tensor([1.0, 0.0]))

    def test_dispatcher(self):
        np.testing.assert_array_equal(
            elementwise("add", Tensor([1.0]), Tensor([2.0])).data, [3.0])
        np.testing.assert_array_equal(elementwise("neg", Tensor([2.0])).data, [-2.0])
        with pytest.raises(ContractError):
            elementwise("add", Tensor([1.0]))
        with pytest.raises(ContractError):
            elementwise("banana", Tensor([1.0]))
        with pytest.raises(ContractError):
            elementwise("tanh", Tensor([1.0]), Tensor([1.0]))


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_array_equal(softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])

    def test_closed_form(self):
        out = softmax(Tensor([math.log(2.0), 0.0]))
        np.testing.assert_allclose(out.data, [2.0 / 3.0, 1.0 / 3.0], rtol=1e-15)

    def test_single_element(self):
        np.testing.assert_array_equal(softmax(Tensor([5.0])).data, [1.0])

    def test_empty(self):
        with pytest.raises(DimensionError):
            softmax(Tensor(np.zeros(0)))

    def test_probability_vector_property(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            z = rng.uniform(-50, 50, size=rng.integers(1, 9))
            y = softmax(Tensor(z)).data
            assert (y >= 0).all()
            assert abs(y.sum() - 1.0) <= 1e-12

    def test_shift_invariance(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            z = rng.uniform(-5, 5, size=4)
            c = rng.uniform(-100, 100)
            a = softmax(Tensor(z)).data
            b = softmax(Tensor(z + c)).data
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_overflow_safe(self):
        y = softmax(Tensor([1e6, 1e6 - 1.0])).data
        assert np.all(np.isfinite(y))


class TestConcatSlice:
    def test_round_trip(self):
        joined = concat(Tensor([1.0, 2.0]), Tensor([3.0]))
        np.testing.assert_array_equal(joined.slice(0, 2).data, [1.0, 2.0])
        np.testing.assert_array_equal(joined.slice(2, 3).data, [3.0])

    def test_slice(self):
        np.testing.assert_array_equal(Tensor([4.0, 5.0, 6.0]).slice(1, 3).data, [5.0, 6.0])

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            Tensor([4.0, 5.0]).slice(1, 3)

    def test_round_trip_bitwise(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = rng.standard_normal(rng.integers(0, 5))
            b = rng.standard_normal(rng.integers(1, 5))
            joined = concat(Tensor(a), Tensor(b))
            assert np.array_equal(joined.slice(0, len(a)).data, a)
            assert np.array_equal(joined.slice(len(a), len(a) + len(b)).data, b)

    def test_adjoint_routing(self):
        a, b = Tensor([1.0, 2.0]), Tensor([3.0])
        with Tape():
            backward(smul(concat(a, b).slice(1, 3).sum(), 2.0))
        np.testing.assert_array_equal(a.grad, [0.0, 2.0])
        np.testing.assert_array_equal(b.grad, [2.0])


class TestBackward:
    def test_sum_grad_ones(self):
        x = Tensor([1.0, 2.0, 3.0])
        with Tape():
            backward(x.sum())
        np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])

    def test_square_grad(self):
        x = Tensor([1.0, -2.0])
        with Tape():
            backward(mul(x, x).sum())
        np.testing.assert_array_equal(x.grad, [2.0, -4.0])

    def test_non_scalar_loss(self):
        x = Tensor([1.0, 2.0])
        with Tape():
            y = mul(x, x)
            with pytest.raises(ContractError):
                backward(y)

    def test_no_record(self):
        with pytest.raises(ContractError):
            backward(Tensor([1.0]))

    def test_grad_accumulates_across_uses(self):
        x = Tensor([3.0])
        with Tape():
            backward(add(mul(x, x), x).sum())  # d/dx (x^2 + x) = 2x + 1
        np.testing.assert_array_equal(x.grad, [7.0])


class TestGradientOracle:
    """Every differentiable primitive against central finite differences."""

    def test_primitives(self):
        rng = np.random.default_rng(42)
        v = rng.uniform(-2, 2, size=5)
        w = rng.uniform(-2, 2, size=5)
        m = rng.uniform(-2, 2, size=(3, 5))
        pos = rng.uniform(0.1, 2, size=5)
        s1 = rng.uniform(0.5, 1.5, size=1)

        cases = {
            "add": (lambda a, b: add(a, b).sum(), [v, w]),
            "sub": (lambda a, b: sub(a, b).sum(), [v, w]),
            "mul": (lambda a, b: mul(a, b).sum(), [v, w]),
            "neg": (lambda a: neg(a).sum(), [v]),
            "sigmoid": (lambda a: sigmoid(a).sum(), [v]),
            "tanh": (lambda a: tanh(a).sum(), [v]),
            "exp": (lambda a: exp(a).sum(), [v]),
            "log": (lambda a: log(a).sum(), [pos]),
            "matvec": (lambda a, b: matvec(a, b).sum(), [m, v]),
            "softmax": (lambda a, b: mul(softmax(a), b).sum(), [v, w]),
            "concat": (lambda a, b: mul(concat_all((a, b)), concat_all((b, a))).sum(), [v, w]),
            "slice": (lambda a: mul(a.slice(1, 4), a.slice(0, 3)).sum(), [v]),
            "dot": (lambda a, b: dot(a, b), [v, w]),
            "scale": (lambda a, b: scale(a, b).sum(), [v, s1]),
            "smul": (lambda a: smul(a, 1.7).sum(), [v]),
            "take_row": (lambda a: take_row(a, 1).sum(), [m]),
            "clamp_min": (lambda a: clamp_min(a, 0.5).sum(), [pos]),
        }
        for name, (fn, arrays) in cases.items():
            tensors = [Tensor(a.copy()) for a in arrays]
            err = assert_grads_close(lambda fn=fn, ts=tensors: fn(*ts), tensors,
                                     rtol=1e-5)
            assert err <= 1e-5, name


class TestDeterminism:
    def test_forward_bitwise_repeatable(self):
        rng = np.random.default_rng(11)
        m = rng.standard_normal((4, 6))
        v = rng.standard_normal(6)

        def run():
            out = softmax(tanh(matvec(Tensor(m), sigmoid(Tensor(v)))))
            return out.data.copy()

        first = run()
        for _ in range(5):
            assert np.array_equal(run(), first)

    def test_grad_bitwise_repeatable(self):
        rng = np.random.default_rng(12)
        mdata = rng.standard_normal((4, 6))
        vdata = rng.standard_normal(6)

        def run():
            m, v = Tensor(mdata), Tensor(vdata)
            with Tape():
                backward(mul(softmax(matvec(m, v)), softmax(matvec(m, v))).sum())
            return m.grad.copy(), v.grad.copy()

        g1 = run()
        g2 = run()
        assert np.array_equal(g1[0], g2[0]) and np.array_equal(g1[1], g2[1])


class TestTensorInvariants:
    def test_data_matches_shape(self):
        t = Tensor(np.zeros((3, 4)))
        assert t.data.size == 3 * 4 and t.shape == (3, 4)

    def test_grad_shape_matches(self):
        x = Tensor([1.0, 2.0])
        with Tape():
            backward(mul(x, x).sum())
        assert x.grad.shape == x.shape

    def test_rejects_3d(self):
        with pytest.raises(DimensionError):
            Tensor(np.zeros((2, 2, 2)))

    def test_finite_after_cell_like_ops(self):
        rng = np.random.default_rng(13)
        big = rng.uniform(-1e6, 1e6, size=16)
        assert np.all(np.isfinite(sigmoid(Tensor(big)).data))
        assert np.all(np.isfinite(tanh(Tensor(big)).data))
        assert np.all(np.isfinite(softmax(Tensor(big)).data))
