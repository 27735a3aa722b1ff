import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsgp.errors import DimensionMismatch, NonPositiveParam
from nsgp.kernels import GibbsInputs, RbfParams, cross_gram, gibbs, gram, rbf


def gibbs_loop(X, ell, sig):
    """Entrywise reference built from the scalar kernel."""
    n = X.shape[0]
    return np.array([[gibbs(X[i], X[j], ell[i], ell[j], sig[i], sig[j]) for j in range(n)] for i in range(n)])


class TestRbf:
    def test_diagonal(self):
        assert rbf(0.3, 0.3, RbfParams(1.7, 1.0)) == 1.0

    def test_sqrt2_lengthscale_distance(self):
        ell = 0.8
        np.testing.assert_allclose(rbf(0.0, ell * math.sqrt(2), RbfParams(ell, 1.0)), math.exp(-1), rtol=1e-14)

    def test_scalar_evaluation(self):
        np.testing.assert_allclose(rbf([0.0, 0.0], [2.0, 0.0], RbfParams(2.0, 3.0)), 3 * math.exp(-0.5), rtol=1e-14)
        np.testing.assert_allclose(rbf(1.0, 3.0, RbfParams(2.0, 3.0)), 1.8196, atol=1e-4)

    def test_symmetric(self):
        p = RbfParams(0.7, 2.0)
        assert rbf([1.0, 2.0], [0.5, -1.0], p) == rbf([0.5, -1.0], [1.0, 2.0], p)

    @pytest.mark.parametrize("ell, amp", [(0.0, 1.0), (1.0, -2.0), (np.nan, 1.0), (np.inf, 1.0)])
    def test_rejects_bad_params(self, ell, amp):
        with pytest.raises(NonPositiveParam):
            RbfParams(ell, amp)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            rbf([0.0, 1.0], [0.0], RbfParams(1.0, 1.0))


class TestGibbs:
    def test_diagonal_equals_amplitude_squared(self):
        assert gibbs(0.4, 0.4, 1.3, 1.3, 2.5, 2.5) == pytest.approx(6.25, rel=1e-15)

    def test_constant_lengthscale_reduces_to_rbf(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x, x2 = rng.normal(size=2)
            ell = rng.uniform(0.2, 3.0)
            np.testing.assert_allclose(gibbs(x, x2, ell, ell, 1.0, 1.0), rbf(x, x2, RbfParams(ell, 1.0)), rtol=1e-13)

    def test_prefactor(self):
        np.testing.assert_allclose(gibbs(0.0, 0.0, 1.0, 3.0, 1.0, 1.0), math.sqrt(0.6), rtol=1e-14)
        np.testing.assert_allclose(math.sqrt(0.6), 0.77460, atol=1e-5)

    def test_swap_symmetry_is_exact(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            x, x2 = rng.normal(size=(2, 3))
            l1, l2 = rng.uniform(0.1, 2, size=(2, 3))
            s1, s2 = rng.uniform(0.1, 2, size=2)
            assert gibbs(x, x2, l1, l2, s1, s2) == gibbs(x2, x, l2, l1, s2, s1)

    def test_ard_is_product_over_dimensions(self):
        x, x2 = np.array([0.1, -0.7]), np.array([0.9, 0.3])
        l1, l2 = np.array([0.5, 2.0]), np.array([1.5, 0.8])
        per_dim = [gibbs(x[d], x2[d], l1[d], l2[d], 1.0, 1.0) for d in range(2)]
        np.testing.assert_allclose(gibbs(x, x2, l1, l2, 1.3, 0.4), 1.3 * 0.4 * np.prod(per_dim), rtol=1e-14)

    def test_scalar_lengthscale_broadcasts(self):
        x, x2 = np.array([0.1, -0.7]), np.array([0.9, 0.3])
        assert gibbs(x, x2, 0.8, 1.1, 1.0, 1.0) == gibbs(x, x2, [0.8, 0.8], [1.1, 1.1], 1.0, 1.0)

    def test_monotone_in_distance(self):
        r = np.linspace(0, 5, 60)
        vals = [gibbs(0.0, ri, 0.7, 1.4, 1.2, 0.9) for ri in r]
        assert np.all(np.diff(vals) < 0)

    def test_rejects_nonpositive(self):
        with pytest.raises(NonPositiveParam):
            gibbs(0.0, 1.0, 0.0, 1.0, 1.0, 1.0)
        with pytest.raises(NonPositiveParam):
            gibbs(0.0, 1.0, 1.0, 1.0, -1.0, 1.0)


class TestGram:
    def test_single_point(self):
        np.testing.assert_allclose(gram(np.array([[0.2]]), GibbsInputs(np.array([0.9]), np.array([2.0]))), [[4.0]])

    def test_duplicate_points_rank_deficient(self):
        X = np.array([[1.0], [1.0]])
        K = gram(X, GibbsInputs(np.full(2, 0.5), np.full(2, 1.5)))
        np.testing.assert_allclose(K, np.full((2, 2), 2.25), rtol=1e-15)
        assert abs(np.linalg.det(K)) < 1e-12

    def test_constant_gibbs_matches_rbf(self):
        X = np.random.default_rng(2).uniform(-2, 2, (3, 1))
        ell, s = 0.6, 1.7
        K = gram(X, GibbsInputs(np.full(3, ell), np.full(3, s)))
        ref = np.array([[rbf(a, b, RbfParams(ell, s**2)) for b in X] for a in X])
        np.testing.assert_allclose(K, ref, atol=1e-12, rtol=0)

    def test_diagonal(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(7, 2))
        sig = rng.uniform(0.5, 2, 7)
        K = gram(X, GibbsInputs(rng.uniform(0.5, 2, (7, 2)), sig))
        np.testing.assert_allclose(np.diag(K), sig**2, rtol=1e-14)
        np.testing.assert_allclose(np.diag(gram(X, RbfParams(1.0, 2.5))), 2.5)

    def test_matches_scalar_kernel(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(6, 2))
        ell, sig = rng.uniform(0.3, 2, (6, 2)), rng.uniform(0.3, 2, 6)
        np.testing.assert_allclose(gram(X, GibbsInputs(ell, sig)), gibbs_loop(X, ell, sig), rtol=1e-13)

    def test_symmetric(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(9, 1))
        K = gram(X, GibbsInputs(rng.uniform(0.1, 3, 9), rng.uniform(0.1, 3, 9)))
        np.testing.assert_array_equal(K, K.T)

    def test_misaligned_inputs(self):
        with pytest.raises(DimensionMismatch):
            gram(np.zeros((3, 1)), GibbsInputs(np.ones(2), np.ones(2)))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 20), st.integers(1, 3), st.integers(0, 2**31 - 1))
    def test_psd(self, n, d, seed):
        rng = np.random.default_rng(seed)
        X = rng.uniform(-3, 3, (n, d))
        K = gram(X, GibbsInputs(np.exp(rng.uniform(-2, 1, (n, d))), np.exp(rng.uniform(-1, 1, n))))
        assert np.linalg.eigvalsh(K).min() >= -1e-8 * np.trace(K)


class TestCrossGram:
    def test_same_sets_equal_gram(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(5, 2))
        inp = GibbsInputs(rng.uniform(0.5, 2, 5), rng.uniform(0.5, 2, 5))
        np.testing.assert_allclose(cross_gram(X, X, inp, inp), gram(X, inp), rtol=1e-15)
        np.testing.assert_allclose(cross_gram(X, X, RbfParams(1.2, 0.7)), gram(X, RbfParams(1.2, 0.7)), rtol=1e-15)

    def test_single_pair(self):
        K = cross_gram(np.array([[0.3]]), np.array([[1.1]]), GibbsInputs(np.array([0.4]), np.array([1.2])),
                       GibbsInputs(np.array([0.9]), np.array([0.8])))
        assert K.shape == (1, 1)
        np.testing.assert_allclose(K[0, 0], gibbs(0.3, 1.1, 0.4, 0.9, 1.2, 0.8), rtol=1e-14)

    def test_rectangular_entries(self):
        rng = np.random.default_rng(7)
        A, B = rng.normal(size=(2, 2)), rng.normal(size=(3, 2))
        la, lb = rng.uniform(0.3, 2, 2), rng.uniform(0.3, 2, 3)
        sa, sb = rng.uniform(0.3, 2, 2), rng.uniform(0.3, 2, 3)
        K = cross_gram(A, B, GibbsInputs(la, sa), GibbsInputs(lb, sb))
        for i in range(2):
            for j in range(3):
                np.testing.assert_allclose(K[i, j], gibbs(A[i], B[j], la[i], lb[j], sa[i], sb[j]), rtol=1e-13)
        R = cross_gram(A, B, RbfParams(0.9, 1.4))
        for i in range(2):
            for j in range(3):
                np.testing.assert_allclose(R[i, j], rbf(A[i], B[j], RbfParams(0.9, 1.4)), rtol=1e-14)

    def test_gibbs_needs_both_inputs(self):
        with pytest.raises(TypeError):
            cross_gram(np.zeros((1, 1)), np.zeros((1, 1)), GibbsInputs(np.ones(1), np.ones(1)))
