import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdpf import fdiv
from rdpf.errors import CurvatureUnavailableError, DimensionError, SingularRatioError

from conftest import simplex_vectors

BUILTINS = ["kl", "tv", "chi2", "hellinger"]
SMOOTH = ["kl", "chi2", "hellinger"]
T_GRID = np.geomspace(0.01, 100, 61)


@pytest.mark.parametrize("name", BUILTINS)
class TestGenerators:
    def test_zero_at_one(self, name):
        assert fdiv.get_divergence(name).f(np.array(1.0)) == 0.0

    def test_midpoint_convexity(self, name):
        f = fdiv.get_divergence(name).f
        a, b = np.meshgrid(T_GRID, T_GRID)
        assert np.all(f((a + b) / 2) <= (f(a) + f(b)) / 2 + 1e-12)

    def test_subgradient_inequality(self, name):
        spec = fdiv.get_divergence(name)
        t, u = np.meshgrid(T_GRID, T_GRID)
        assert np.all(spec.f(u) >= spec.f(t) + spec.df(t) * (u - t) - 1e-9)

    def test_limits_at_zero(self, name):
        spec = fdiv.get_divergence(name)
        assert spec.generator(0.0) == spec.f0
        assert spec.f(np.array(1e-12)) == pytest.approx(spec.f0, abs=1e-5)

    def test_g_matches_finite_differences(self, name):
        spec = fdiv.get_divergence(name)
        t = np.array([0.3, 0.7, 1.6, 2.0, 5.0])
        h = 1e-6
        fd = (spec.f(t + h) - spec.f(t - h)) / (2 * h)
        np.testing.assert_allclose(spec.g(t), spec.f(t) - t * fd, rtol=1e-5)


class TestDivergenceValues:
    @pytest.mark.parametrize("name", BUILTINS)
    def test_zero_at_equality(self, name):
        p = np.array([0.2, 0.3, 0.5])
        assert fdiv.divergence(name, p, p) == 0.0

    def test_kl_example(self):
        val = fdiv.divergence("kl", [0.5, 0.5], [0.25, 0.75])
        assert val == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3), abs=1e-15)
        assert val == pytest.approx(0.143841, abs=1e-6)

    def test_tv_example(self):
        assert fdiv.divergence("tv", [0.15, 0.85], [0.3, 0.7]) == pytest.approx(0.15, abs=1e-15)

    def test_infinite_and_limits(self):
        assert fdiv.divergence("kl", [0.5, 0.5], [1.0, 0.0]) == math.inf
        assert fdiv.divergence("chi2", [0.5, 0.5], [1.0, 0.0]) == math.inf
        # TV stays finite: q(1) = 0 contributes p(1) / 2
        assert fdiv.divergence("tv", [0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)
        # p(i) = 0 contributes q(i) f(0)
        assert fdiv.divergence("chi2", [1.0, 0.0], [0.5, 0.5]) == pytest.approx(1.0)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            fdiv.divergence("kl", [0.5, 0.5], [0.2, 0.3, 0.5])

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown divergence"):
            fdiv.get_divergence("renyi")

    @pytest.mark.parametrize("name", BUILTINS)
    @given(p=simplex_vectors(3), q=simplex_vectors(3))
    def test_nonnegative(self, name, p, q):
        val = fdiv.divergence(name, p, q)
        assert val >= 0
        if val == 0:
            np.testing.assert_allclose(p, q, atol=1e-6)


class TestGTerm:
    def test_closed_forms_at_two(self):
        p, v = np.array([0.5, 0.5]), np.array([0.25, 0.75])
        assert fdiv.g_term("kl", p, v, 0) == pytest.approx(-2.0)
        assert fdiv.g_term("chi2", p, v, 0) == pytest.approx(-3.0)
        assert fdiv.g_term("tv", p, v, 0) == pytest.approx(-0.5)
        assert fdiv.g_term("tv", p, p, 0) == 0.0

    @given(p=simplex_vectors(4), v=simplex_vectors(4))
    def test_kl_is_minus_ratio(self, p, v):
        np.testing.assert_allclose(fdiv.g_vector("kl", p, v), -p / v, atol=1e-12, rtol=1e-12)

    @given(p=simplex_vectors(4), v=simplex_vectors(4))
    def test_chi2_closed_form(self, p, v):
        np.testing.assert_allclose(fdiv.g_vector("chi2", p, v), 1 - (p / v) ** 2, rtol=1e-12, atol=1e-12)

    def test_g_is_partial_derivative(self):
        # g(p(i)/q(i)) is the partial of D_f(p || q) with respect to q(i)
        p, q = np.array([0.15, 0.35, 0.5]), np.array([0.3, 0.3, 0.4])
        h = 1e-6
        for name in BUILTINS:
            for i in range(3):
                e = np.eye(3)[i] * h
                fd = (fdiv.divergence(name, p, q + e) - fdiv.divergence(name, p, q - e)) / (2 * h)
                assert fdiv.g_term(name, p, q, i) == pytest.approx(fd, rel=1e-5)

    def test_singular(self):
        with pytest.raises(SingularRatioError):
            fdiv.g_term("kl", [0.5, 0.5], [1.0, 0.0], 1)
        with pytest.raises(SingularRatioError):
            fdiv.g_vector("kl", [0.5, 0.5], [1.0, 0.0])


class TestCurvature:
    def test_examples(self):
        p, q = np.array([0.15, 0.85]), np.array([0.3, 0.7])
        assert fdiv.perception_curvature("kl", p, q, 0) == pytest.approx(0.15 / 0.09, rel=1e-14)
        assert fdiv.perception_curvature("chi2", p, q, 0) == pytest.approx(2 * 0.0225 / 0.027, rel=1e-14)

    @pytest.mark.parametrize("name,f2_at_one", [("kl", 1.0), ("chi2", 2.0), ("hellinger", 0.5)])
    def test_at_equality(self, name, f2_at_one):
        p = np.array([0.2, 0.8])
        np.testing.assert_allclose(fdiv.curvature_vector(name, p, p), f2_at_one / p)

    @pytest.mark.parametrize("name", SMOOTH)
    def test_finite_difference(self, name):
        p, q = np.array([0.15, 0.35, 0.5]), np.array([0.3, 0.25, 0.45])
        h = 1e-4
        for i in range(3):
            e = np.eye(3)[i] * h
            fd = (fdiv.divergence(name, p, q + e) - 2 * fdiv.divergence(name, p, q)
                  + fdiv.divergence(name, p, q - e)) / h**2
            assert fdiv.perception_curvature(name, p, q, i) == pytest.approx(fd, rel=1e-5)

    def test_tv_unavailable(self):
        with pytest.raises(CurvatureUnavailableError):
            fdiv.perception_curvature("tv", [0.5, 0.5], [0.5, 0.5], 0)

    def test_singular(self):
        with pytest.raises(SingularRatioError):
            fdiv.curvature_vector("kl", [0.5, 0.5], [1.0, 0.0])
