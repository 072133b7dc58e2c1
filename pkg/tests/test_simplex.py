import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from rdpf import simplex
from rdpf.errors import DegenerateNormalizerError, DimensionError, NotOnSimplexError

from conftest import kernels, simplex_vectors

P = np.array([0.15, 0.85])
Q_EX = np.array([[0.9, 0.1], [0.2, 0.8]])


def direct_mi(p, Q):
    """Plain double sum, no masking tricks beyond skipping zero joint mass."""
    q = [sum(p[x] * Q[x][j] for x in range(len(p))) for j in range(len(Q[0]))]
    total = 0.0
    for x in range(len(p)):
        for j in range(len(Q[0])):
            if p[x] * Q[x][j] > 0:
                total += p[x] * Q[x][j] * math.log(Q[x][j] / q[j])
    return total


class TestValidation:
    def test_accepts_and_renormalizes(self):
        out = simplex.check_distribution([0.25, 0.75 + 1e-13])
        assert out.sum() == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("bad", [[0.2, 0.9], [-0.1, 1.1], [np.nan, 1.0]])
    def test_rejects_off_simplex(self, bad):
        with pytest.raises(NotOnSimplexError):
            simplex.check_distribution(bad)

    def test_rejects_wrong_shape(self):
        with pytest.raises(DimensionError):
            simplex.check_distribution([[0.5, 0.5]])
        with pytest.raises(DimensionError):
            simplex.check_distribution([])

    def test_source_rejects_zero_mass(self):
        with pytest.raises(NotOnSimplexError, match="zero mass"):
            simplex.source_distribution([0.0, 1.0])

    def test_kernel_rows(self):
        with pytest.raises(NotOnSimplexError):
            simplex.transition_kernel([[0.5, 0.6], [0.5, 0.5]])
        Q = simplex.transition_kernel(Q_EX)
        np.testing.assert_allclose(Q.sum(axis=1), 1.0)

    def test_distortion_checks(self):
        with pytest.raises(ValueError):
            simplex.distortion_matrix([[0.0, -1.0], [1.0, 0.0]])
        with pytest.raises(DimensionError):
            simplex.distortion_matrix([1.0, 2.0])

    def test_hamming(self):
        np.testing.assert_array_equal(simplex.hamming(2), [[0, 1], [1, 0]])
        assert simplex.hamming(2, 3).shape == (2, 3)


class TestInducedMarginal:
    def test_examples(self):
        np.testing.assert_allclose(simplex.induced_marginal([0.5, 0.5], np.eye(2)), [0.5, 0.5])
        const = np.array([[0.3, 0.7], [0.3, 0.7]])
        np.testing.assert_allclose(simplex.induced_marginal(P, const), [0.3, 0.7])
        np.testing.assert_allclose(simplex.induced_marginal(P, Q_EX), [0.305, 0.695], atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            simplex.induced_marginal(P, np.ones((3, 2)) / 2)

    @given(simplex_vectors(3), kernels(3, 4))
    def test_on_simplex(self, p, Q):
        assert simplex.induced_marginal(p, Q).sum() == pytest.approx(1.0, abs=1e-12)


class TestMutualInformation:
    def test_examples(self):
        assert simplex.mutual_information(P, np.array([[0.3, 0.7]] * 2)) == pytest.approx(0, abs=1e-16)
        assert simplex.mutual_information([0.5, 0.5], np.eye(2)) == pytest.approx(math.log(2), abs=1e-15)
        assert simplex.mutual_information(P, Q_EX) == pytest.approx(direct_mi(P, Q_EX), abs=1e-15)

    @given(simplex_vectors(3), kernels(3, 3))
    def test_matches_double_sum(self, p, Q):
        assert simplex.mutual_information(p, Q) == pytest.approx(direct_mi(p, Q), abs=1e-12)

    @given(simplex_vectors(3), simplex_vectors(4))
    def test_zero_for_equal_rows(self, p, row):
        assert simplex.mutual_information(p, np.tile(row, (3, 1))) == pytest.approx(0, abs=1e-14)

    @given(simplex_vectors(3), kernels(3, 3), st.permutations(range(3)))
    def test_relabeling_invariance(self, p, Q, perm):
        a = simplex.mutual_information(p, Q)
        b = simplex.mutual_information(p, Q[:, list(perm)])
        assert a == pytest.approx(b, abs=1e-13)

    @given(simplex_vectors(3), kernels(3, 2))
    def test_bounds(self, p, Q):
        info = simplex.mutual_information(p, Q)
        entropy = -float(np.sum(p * np.log(p)))
        assert 0 <= info <= min(entropy, math.log(2)) + 1e-12

    def test_zero_entries(self):
        Q = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert math.isfinite(simplex.mutual_information(P, Q))


class TestExpectedDistortion:
    def test_examples(self):
        d = simplex.hamming(2)
        assert simplex.expected_distortion(P, np.eye(2), d) == 0
        assert simplex.expected_distortion(P, np.full((2, 2), 0.5), d) == pytest.approx(0.5)
        assert simplex.expected_distortion(P, Q_EX, d) == pytest.approx(0.185, abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            simplex.expected_distortion(P, Q_EX, np.ones((2, 3)))


class TestLogNormalizer:
    def test_examples(self):
        assert simplex.log_normalizer(np.array([1.0, 0.0]), np.array([0.0, -100.0])) == 0.0
        assert simplex.log_normalizer(np.array([0.5, 0.5]), np.zeros(2)) == pytest.approx(0, abs=1e-16)
        assert simplex.log_normalizer(np.array([0.5, 0.5]), np.full(2, -1000.0)) == pytest.approx(-1000.0)

    def test_zero_weight_columns_ignored(self):
        # a huge exponent on a zero-weight entry must not swamp the rest
        out = simplex.log_normalizer(np.array([0.0, 1.0]), np.array([800.0, -3.0]))
        assert out == pytest.approx(-3.0)

    def test_degenerate(self):
        with pytest.raises(DegenerateNormalizerError):
            simplex.log_normalizer(np.array([1.0, 0.0]), np.array([-np.inf, 0.0]))
        with pytest.raises(DegenerateNormalizerError):
            simplex.log_normalizer(np.zeros(2), np.zeros(2))

    def test_matrix_rows(self):
        q = np.array([0.2, 0.3, 0.5])
        logA = np.array([[0.0, -1.0, -2.0], [-700.0, -701.0, -699.0]])
        np.testing.assert_allclose(simplex.log_normalizer(q, logA),
                                   logsumexp(logA, b=q, axis=1), rtol=1e-14)

    @settings(max_examples=50)
    @given(simplex_vectors(4), st.lists(st.floats(-50, 50), min_size=4, max_size=4),
           st.sampled_from([-500.0, 500.0]))
    def test_shift_equivariance(self, q, row, shift):
        row = np.array(row)
        base = simplex.log_normalizer(q, row)
        assert simplex.log_normalizer(q, row + shift) == pytest.approx(base + shift, abs=1e-10)
        assert base == pytest.approx(float(logsumexp(row, b=q)), abs=1e-12)
