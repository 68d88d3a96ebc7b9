import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from adaptive_labels.errors import DegenerateVectorError, DimensionError, DomainError, GraphError, NumericError
from adaptive_labels.lwal import lwal_loss, repel_loss
from adaptive_labels.tensor import (
    Tensor, add, add_row, backward, cosine_sim, exp, grad_check, log, matmul, mean, mul, pick,
    relu, row_l2_distance, row_softmax, scale, sub, sum_squares, total,
)

finite = st.floats(-5, 5, allow_nan=False)


def central_diff(f, x, h=1e-6):
    """Gradient of scalar numpy function ``f`` by central differences."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


class TestMatmul:
    def test_identity(self):
        A = Tensor([[1.0, 2], [3, 4]])
        np.testing.assert_array_equal(matmul(Tensor(np.eye(2)), A).data, A.data)

    def test_basis_selection(self):
        assert matmul(Tensor([[1.0, 0]]), Tensor([[2.0], [5]])).data.tolist() == [[2.0]]

    def test_grad_against_finite_differences(self, rng):
        a0, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
        a = Tensor(a0, requires_grad=True)
        backward(total(matmul(a, Tensor(b))))
        np.testing.assert_allclose(a.grad, np.ones((3, 2)) @ b.T, atol=1e-12)
        numeric = central_diff(lambda x: (x @ b).sum(), a0)
        np.testing.assert_allclose(a.grad, numeric, atol=1e-8)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


class TestElementwise:
    def test_relu_values_and_grad(self):
        x = Tensor([-1.0, 0.0, 2.0], requires_grad=True)
        y = relu(x)
        assert y.data.tolist() == [0, 0, 2]
        backward(total(y))
        assert x.grad.tolist() == [0, 0, 1]

    def test_log_exp_inverse(self):
        assert log(exp(Tensor([0.5]))).data[0] == pytest.approx(0.5, abs=1e-15)

    def test_log_domain(self):
        with pytest.raises(DomainError):
            log(Tensor([1.0, 0.0]))

    def test_shape_check(self):
        with pytest.raises(DimensionError):
            add(Tensor([1.0, 2]), Tensor([1.0]))

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_nan_production_is_an_error(self):
        with pytest.raises(NumericError):
            exp(Tensor([1000.0]))

    def test_operators(self):
        a, b = Tensor([1.0, 2.0]), Tensor([3.0, 5.0])
        assert (a + b).data.tolist() == [4, 7]
        assert (a - b).data.tolist() == [-2, -3]
        assert (a * b).data.tolist() == [3, 10]
        assert (2 * a).data.tolist() == [2, 4]
        assert (-a).data.tolist() == [-1, -2]


class TestRowSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(row_softmax(Tensor([[0.0, 0, 0]])).data, [[1 / 3] * 3], atol=1e-15)

    def test_exact_ratios(self):
        P = row_softmax(Tensor([[np.log(1), np.log(2), np.log(3)]])).data
        np.testing.assert_allclose(P, [[1 / 6, 2 / 6, 3 / 6]], atol=1e-15)

    def test_large_logits_are_stable(self):
        P = row_softmax(Tensor([[1000.0, 1000, 999]])).data
        assert np.all(np.isfinite(P)) and P.sum() == pytest.approx(1, abs=1e-12)

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            row_softmax(Tensor([[0.0, np.nan]]))

    @given(arrays(np.float64, (3, 4), elements=st.floats(-50, 50)), st.floats(-100, 100))
    def test_rows_sum_to_one_and_shift_invariant(self, logits, c):
        P = row_softmax(Tensor(logits)).data
        np.testing.assert_allclose(P.sum(axis=1), 1, atol=1e-9)
        shifted = logits.copy()
        shifted[1] += c
        np.testing.assert_allclose(row_softmax(Tensor(shifted)).data, P, atol=1e-9)


class TestRowL2Distance:
    def test_three_four_five(self):
        assert row_l2_distance(Tensor([[0.0, 0]]), Tensor([[3.0, 4]])).data[0, 0] == pytest.approx(5, abs=1e-6)

    def test_coincident_point(self):
        z = Tensor([[1.0, 2.0]], requires_grad=True)
        D = row_l2_distance(z, Tensor([[1.0, 2.0]]))
        assert D.data[0, 0] == pytest.approx(1e-6, rel=1e-9)
        backward(total(D))
        assert np.all(np.isfinite(z.grad))

    def test_matches_double_loop(self, rng):
        Z, C = rng.normal(size=(4, 3)), rng.normal(size=(2, 3))
        D = row_l2_distance(Tensor(Z), Tensor(C)).data
        for i in range(4):
            for j in range(2):
                s = 0.0
                for k in range(3):
                    s += (Z[i, k] - C[j, k]) ** 2
                assert abs(D[i, j] - np.sqrt(s + 1e-12)) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            row_l2_distance(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 2))))

    @given(arrays(np.float64, (2, 3), elements=finite), arrays(np.float64, (2, 3), elements=finite))
    def test_symmetric_and_nonnegative(self, Z, C):
        D = row_l2_distance(Tensor(Z), Tensor(C)).data
        swapped = Z.copy(), C.copy()
        swapped[0][0], swapped[1][1] = C[1], Z[0]
        D2 = row_l2_distance(Tensor(swapped[1]), Tensor(swapped[0])).data
        assert np.all(D >= 0)
        assert D[0, 1] == pytest.approx(D2[1, 0], abs=1e-12)


class TestCosine:
    @pytest.mark.parametrize("u, v, expected", [
        ([1.0, 2], [1.0, 2], 1.0), ([1.0, 0], [0.0, 1], 0.0), ([1.0, 1], [-1.0, -1], -1.0)])
    def test_values(self, u, v, expected):
        assert cosine_sim(Tensor(u), Tensor(v)).item() == pytest.approx(expected, abs=1e-15)

    def test_degenerate(self):
        with pytest.raises(DegenerateVectorError):
            cosine_sim(Tensor([0.0, 0]), Tensor([1.0, 0]))

    @given(arrays(np.float64, 4, elements=finite), arrays(np.float64, 4, elements=finite))
    def test_bounds(self, u, v):
        if np.linalg.norm(u) > 1e-6:
            assert cosine_sim(Tensor(u), Tensor(u)).item() == pytest.approx(1, abs=1e-12)
            if np.linalg.norm(v) > 1e-6:
                assert abs(cosine_sim(Tensor(u), Tensor(v)).item()) <= 1 + 1e-12


class TestBackward:
    def test_sum(self):
        w = Tensor([1.0, 2, 3], requires_grad=True)
        backward(total(w))
        assert w.grad.tolist() == [1, 1, 1]

    def test_squared_norm(self):
        w = Tensor([1.0, 2], requires_grad=True)
        backward(sum_squares(w))
        assert w.grad.tolist() == [2, 4]

    def test_non_scalar_root(self):
        with pytest.raises(GraphError):
            backward(scale(Tensor([1.0, 2], requires_grad=True), 2))

    def test_single_use(self):
        w = Tensor([1.0, 2], requires_grad=True)
        loss = sum_squares(w)
        backward(loss)
        with pytest.raises(GraphError):
            backward(loss)

    def test_shared_subexpression_accumulates(self):
        x = Tensor([3.0], requires_grad=True)
        y = mul(x, x)
        backward(total(add(y, mul(y, x))))  # x^2 + x^3
        assert x.grad[0] == pytest.approx(2 * 3 + 3 * 9)

    def test_diamond_order(self):
        x = Tensor([2.0], requires_grad=True)
        a = scale(x, 3.0)
        b = mul(a, a)
        backward(total(add(b, a)))  # 9x^2 + 3x
        assert x.grad[0] == pytest.approx(18 * 2 + 3)


class TestGradCheck:
    def test_square(self):
        assert grad_check(lambda x: sum_squares(x), np.array([3.0])) < 1e-8

    def test_softmax_ce(self, rng):
        y = np.array([0, 2, 1])
        assert grad_check(lambda x: lwal_loss(row_softmax(x), y), rng.normal(size=(3, 3))) < 1e-5

    def test_repel(self, rng):
        y = np.array([0, 1, 0, 1])
        assert grad_check(lambda x: repel_loss(x, y), rng.normal(size=(4, 5))) < 1e-5

    @pytest.mark.parametrize("op", ["add", "sub", "mul", "scale", "relu", "log", "exp", "mean",
                                    "add_row", "pick", "matmul", "softmax", "distance", "cosine"])
    def test_every_op_at_random_points(self, op, rng):
        other = rng.normal(size=(3, 4))
        fixed = {
            "add": lambda x: total(mul(add(x, Tensor(other)), Tensor(other))),
            "sub": lambda x: total(mul(sub(Tensor(other), x), Tensor(other))),
            "mul": lambda x: total(mul(x, Tensor(other))),
            "scale": lambda x: sum_squares(scale(x, -1.7)),
            "relu": lambda x: total(mul(relu(x), Tensor(other))),
            "log": lambda x: total(mul(log(mul(x, x)), Tensor(other))),
            "exp": lambda x: total(exp(scale(x, 0.5))),
            "mean": lambda x: mean(mul(x, x)),
            "add_row": lambda x: sum_squares(add_row(x, Tensor(other[0]))),
            "pick": lambda x: sum_squares(pick(x, [0, 3, 1])),
            "matmul": lambda x: sum_squares(matmul(x, Tensor(other.T))),
            "softmax": lambda x: total(mul(row_softmax(x), Tensor(other))),
            "distance": lambda x: total(mul(row_l2_distance(x, Tensor(other[:2])), Tensor(other[:, :2]))),
            "cosine": lambda x: cosine_sim(x, Tensor(other[0])),
        }[op]
        for _ in range(100):
            x = rng.normal(size=4 if op == "cosine" else (3, 4))
            if op == "relu":
                x = np.where(np.abs(x) < 1e-3, 0.5, x)
            if op == "log":
                x = np.where(np.abs(x) < 0.2, 0.5, x)
            assert grad_check(fixed, x) < 1e-5
