"""Deterministic RNG, pinned-order matmul, and the finite-difference oracle."""

import numpy as np
import pytest

import shiftlab as sl
from shiftlab.numeric import Rng, derive_seed, finite_difference_gradient, matmul

from util import rel_err


class TestSplitMix:
    def test_known_first_word_for_seed_zero(self):
        assert Rng(0).next_uint64() == 0xE220A8397B1DCDAF

    def test_same_seed_same_stream(self):
        a = Rng(12345)
        b = Rng(12345)
        assert [a.next_uint64() for _ in range(1000)] == [b.next_uint64() for _ in range(1000)]

    def test_adjacent_seeds_diverge_immediately(self):
        assert Rng(1).next_uint64() != Rng(2).next_uint64()

    def test_uniform_range(self):
        rng = Rng(99)
        draws = [rng.uniform() for _ in range(10_000)]
        assert min(draws) >= 0.0
        assert max(draws) < 1.0

    def test_uniform_first_draw_matches_first_word(self):
        expected = (0xE220A8397B1DCDAF >> 11) * 2.0**-53
        assert Rng(0).uniform() == expected
        assert abs(expected - 0.8833) < 5e-4

    def test_uniform_mean(self):
        rng = Rng(7)
        mean = np.mean([rng.uniform() for _ in range(100_000)])
        assert abs(mean - 0.5) < 0.01

    def test_gaussian_moments(self):
        rng = Rng(13)
        draws = np.array([rng.gaussian() for _ in range(100_000)])
        assert abs(draws.mean()) < 0.02
        assert abs(draws.var() - 1.0) < 0.03

    def test_gaussian_determinism(self):
        a, b = Rng(5), Rng(5)
        assert [a.gaussian() for _ in range(100)] == [b.gaussian() for _ in range(100)]

    def test_permutation_is_bijective_and_deterministic(self):
        perm = Rng(3).permutation(257)
        assert sorted(perm.tolist()) == list(range(257))
        assert np.array_equal(perm, Rng(3).permutation(257))

    def test_derive_seed_separates_streams(self):
        seeds = {derive_seed(0, t, k) for t in range(10) for k in range(6)}
        assert len(seeds) == 60
        assert derive_seed(1, 2) != derive_seed(2, 1)


class TestMatmul:
    def test_identity(self):
        m = np.arange(12, dtype=np.float64).reshape(3, 4)
        assert np.array_equal(matmul(np.eye(3), m), m)

    def test_hand_product(self):
        out = matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0], [6.0]]))
        assert np.array_equal(out, np.array([[17.0], [39.0]]))

    def test_ones_row_times_ones_col(self):
        k = 17
        out = matmul(np.ones((1, k)), np.ones((k, 1)))
        assert out.shape == (1, 1)
        assert out[0, 0] == float(k)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="incompatible shapes"):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_associativity_on_random_chains(self):
        rng = Rng(42)
        for _ in range(20):
            dims = [2 + rng.below(7) for _ in range(4)]  # all <= 8
            a = rng.gaussian_matrix(dims[0], dims[1])
            b = rng.gaussian_matrix(dims[1], dims[2])
            c = rng.gaussian_matrix(dims[2], dims[3])
            left = matmul(matmul(a, b), c)
            right = matmul(a, matmul(b, c))
            assert np.abs(left - right).max() < 1e-9

    def test_non_contiguous_inputs_accepted(self):
        rng = Rng(1)
        a = rng.gaussian_matrix(4, 5)
        b = rng.gaussian_matrix(4, 6)
        assert np.allclose(matmul(a.T, b), a.T @ b, atol=1e-12)


class TestFiniteDifferences:
    def test_sum_of_squares(self):
        grad = finite_difference_gradient(lambda m: float((m**2).sum()), np.array([[3.0]]))
        assert abs(grad[0, 0] - 6.0) < 1e-8

    def test_constant_function(self):
        grad = finite_difference_gradient(lambda m: 7.5, np.ones((3, 2)))
        assert np.array_equal(grad, np.zeros((3, 2)))

    def test_matches_analytic_softmax_cross_entropy(self):
        rng = Rng(77)
        logits = rng.gaussian_matrix(4, 3)
        labels = np.array([0, 2, 1, 1])

        def f(z):
            loss, _ = sl.cross_entropy(z, labels)
            return loss

        _, analytic = sl.cross_entropy(logits, labels)
        fd = finite_difference_gradient(f, logits)
        assert rel_err(fd, analytic) <= 1e-6

    def test_non_finite_evaluation_names_entry(self):
        x = np.array([[1.0, 1e-9]])  # perturbing entry (0, 1) goes negative
        with np.errstate(invalid="ignore"), pytest.raises(ValueError, match=r"\(0, 1\)"):
            finite_difference_gradient(lambda m: float(np.log(m).sum()), x)

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError, match="h must be > 0"):
            finite_difference_gradient(lambda m: 0.0, np.ones((1, 1)), h=0.0)
