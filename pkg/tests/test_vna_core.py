import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from vnhodge.errors import (
    EmptyAlgebraError,
    NotNormalizedError,
    ShapeMismatchError,
    ValidationFailure,
)
from vnhodge.vna_core import (
    FactorBlock,
    adjoint,
    cstar_norm,
    make_algebra,
    regular_cyclic_algebra,
    sample_frequencies,
    sampled_circle_algebra,
    trace,
    weighted_block_sum,
)


class TestMakeAlgebra:
    @pytest.mark.unittest
    def test_weights(self, two_block_algebra):
        assert_array_equal(two_block_algebra.weights, [0.5, 0.5])
        assert_array_equal(two_block_algebra.sizes, [1, 2])
        assert two_block_algebra.labels == ("a", "b")
        assert not two_block_algebra.is_factor

    @pytest.mark.unittest
    def test_not_normalized(self):
        with pytest.raises(NotNormalizedError):
            make_algebra([FactorBlock("a", 1, 0.5), FactorBlock("b", 1, 0.4)])

    @pytest.mark.unittest
    def test_normalize(self):
        A = make_algebra(
            [FactorBlock("a", 1, 1.0), FactorBlock("b", 3, 3.0)], normalize=True
        )
        assert_allclose(A.weights, [0.25, 0.75])
        assert_allclose(A.weights.sum(), 1.0, rtol=0, atol=1e-12)

    @pytest.mark.unittest
    def test_rho_enters_weight(self):
        A = make_algebra([FactorBlock("a", 2, 0.25, rho=2.0), FactorBlock("b", 1, 0.5)])
        assert_array_equal(A.weights, [0.5, 0.5])

    @pytest.mark.unittest
    def test_empty(self):
        with pytest.raises(EmptyAlgebraError):
            make_algebra([])

    @pytest.mark.unittest
    def test_duplicate_labels(self):
        with pytest.raises(ValidationFailure, match="unique"):
            make_algebra([FactorBlock("a", 1, 0.5), FactorBlock("a", 1, 0.5)])

    @pytest.mark.unittest
    @pytest.mark.parametrize("n, mu, rho", [(0, 1.0, 1.0), (1, 0.0, 1.0), (1, 1.0, -1.0)])
    def test_invalid_block(self, n, mu, rho):
        with pytest.raises(ValidationFailure):
            FactorBlock("x", n, mu, rho)

    @pytest.mark.unittest
    def test_error_codes(self):
        with pytest.raises(NotNormalizedError) as e:
            make_algebra([FactorBlock("a", 1, 0.3)])
        assert e.value.code == "NotNormalized"
        assert e.value.exit_code == 2


class TestTrace:
    @pytest.mark.unittest
    def test_unit_has_trace_one(self, two_block_algebra):
        assert trace(two_block_algebra, two_block_algebra.identity()) == 1.0

    @pytest.mark.unittest
    def test_diagonal(self, two_block_algebra):
        a = two_block_algebra.diagonal([2.0, 4.0])
        assert_allclose(trace(two_block_algebra, a), 0.5 * 2.0 + 0.5 * 4.0)

    @pytest.mark.unittest
    def test_trace_property(self, two_block_algebra):
        rng = np.random.default_rng(1)
        a = two_block_algebra.random_element(rng)
        b = two_block_algebra.random_element(rng)
        assert_allclose(
            trace(two_block_algebra, a @ b), trace(two_block_algebra, b @ a), atol=1e-12
        )

    @pytest.mark.unittest
    def test_positivity(self, two_block_algebra):
        rng = np.random.default_rng(2)
        a = two_block_algebra.random_element(rng)
        value = trace(two_block_algebra, adjoint(two_block_algebra, a) @ a)
        assert value.real > 0
        assert_allclose(value.imag, 0.0, atol=1e-12)

    @pytest.mark.unittest
    def test_faithful(self, two_block_algebra):
        zero = two_block_algebra.zero()
        assert trace(two_block_algebra, adjoint(two_block_algebra, zero) @ zero) == 0.0

        # nonzero in one block only: tau(a*a) = 0.5 * |1|^2 / 2
        nilpotent = np.array([[0.0, 1.0], [0.0, 0.0]])
        a = two_block_algebra.element([np.zeros((1, 1)), nilpotent])
        value = trace(two_block_algebra, adjoint(two_block_algebra, a) @ a)
        assert_allclose(value, 0.25)

        rng = np.random.default_rng(5)
        for _ in range(10):
            b = two_block_algebra.random_element(rng)
            assert trace(two_block_algebra, adjoint(two_block_algebra, b) @ b).real > 0

    @pytest.mark.unittest
    def test_linearity(self, two_block_algebra):
        rng = np.random.default_rng(3)
        a = two_block_algebra.random_element(rng)
        b = two_block_algebra.random_element(rng)
        lhs = trace(two_block_algebra, 2.0 * a - b)
        rhs = 2.0 * trace(two_block_algebra, a) - trace(two_block_algebra, b)
        assert_allclose(lhs, rhs, atol=1e-12)

    @pytest.mark.unittest
    def test_shape_mismatch(self, two_block_algebra):
        with pytest.raises(ShapeMismatchError):
            two_block_algebra.element([np.eye(1), np.eye(3)])

    @pytest.mark.unittest
    def test_weighted_block_sum_order(self):
        assert weighted_block_sum([0.5, 0.25], [2.0, 4.0]) == 2.0
        with pytest.raises(ValueError):
            weighted_block_sum([0.5], [1.0, 2.0])


class TestAdjoint:
    @pytest.mark.unittest
    def test_matrix_factor(self):
        A = make_algebra([FactorBlock("m", 2, 1.0)])
        a = A.element([np.array([[0.0, 1.0], [0.0, 0.0]])])
        assert_array_equal(adjoint(A, a).blocks[0], [[0.0, 0.0], [1.0, 0.0]])

    @pytest.mark.unittest
    def test_involution(self, two_block_algebra):
        rng = np.random.default_rng(6)
        a = two_block_algebra.random_element(rng)
        twice = adjoint(two_block_algebra, adjoint(two_block_algebra, a))
        for x, y in zip(twice.blocks, a.blocks):
            assert_array_equal(x, y)

    @pytest.mark.unittest
    def test_conjugates_entries(self):
        A = make_algebra([FactorBlock("c", 1, 1.0)])
        a = A.element([np.array([[2.0 + 3.0j]])])
        assert adjoint(A, a).blocks[0][0, 0] == 2.0 - 3.0j


class TestNorm:
    @pytest.mark.unittest
    def test_diagonal_norm(self, two_block_algebra):
        a = two_block_algebra.diagonal([3.0, -5.0])
        assert_allclose(cstar_norm(two_block_algebra, a), 5.0)

    @pytest.mark.unittest
    def test_cstar_identity(self, two_block_algebra):
        rng = np.random.default_rng(4)
        a = two_block_algebra.random_element(rng)
        norm = cstar_norm(two_block_algebra, a)
        gram = adjoint(two_block_algebra, a) @ a
        assert_allclose(cstar_norm(two_block_algebra, gram), norm**2, rtol=1e-10)


class TestGroupAlgebras:
    @pytest.mark.unittest
    @pytest.mark.parametrize("order", [1, 2, 3, 5])
    def test_regular_cyclic(self, order):
        A = regular_cyclic_algebra(order)
        assert len(A) == order
        assert A.labels[0] == "chi0"
        assert_allclose(A.weights, 1.0 / order)

    @pytest.mark.unittest
    def test_sampled_circle(self):
        A = sampled_circle_algebra(4)
        assert_allclose(sample_frequencies(4), [0.125, 0.375, 0.625, 0.875])
        assert_allclose(A.weights, 0.25)
        assert A.labels == ("w0", "w1", "w2", "w3")

    @pytest.mark.unittest
    def test_nonpositive_order(self):
        with pytest.raises(ValidationFailure):
            regular_cyclic_algebra(0)
        with pytest.raises(ValidationFailure):
            sampled_circle_algebra(0)
