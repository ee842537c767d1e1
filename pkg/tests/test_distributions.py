import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from monovol import distributions as dist
from monovol.checks import moment_errors, normalization_errors
from monovol.errors import DomainError, SingularStateError
from monovol.quadrature import nested_quad, quad1


def _inner_b(a, f):
    # integrate f(a, b) over b in (0, 1 - a); the cos map absorbs both edge singularities
    return nested_quad(lambda b: f(a, b) if 0 < b < 1 - a else 0.0, [(0.0, 1 - a)],
                       tol=1e-12).value


class TestValues:
    def test_bivariate_center(self):
        want = 15 * (2 / 3) * math.sqrt(1 / 3) / (4 * math.pi * (1 / 3))
        assert dist.pdf_bivariate(1 / 3, 1 / 3) == pytest.approx(want, rel=1e-14)
        assert dist.pdf_bivariate(1 / 3, 1 / 3) == pytest.approx(1.3783, abs=1e-4)

    def test_peak_of_a_marginal(self):
        assert dist.pdf_a(1 / 3) == pytest.approx(5 / (2 * math.sqrt(3)), abs=1e-12)
        grid = np.linspace(0, 1, 3001)
        assert grid[np.argmax(dist.pdf_a(grid))] == pytest.approx(1 / 3, abs=1e-3)

    def test_a_marginal_is_beta(self):
        x = np.linspace(0.01, 0.99, 50)
        np.testing.assert_allclose(dist.pdf_a(x), stats.beta(1.5, 2).pdf(x), rtol=1e-12)
        np.testing.assert_allclose(dist.cdf_a(x), stats.beta(1.5, 2).cdf(x), rtol=1e-12)

    def test_six_vanishes_on_coordinate_axes(self):
        assert dist.pdf_six(0.3, 0.3, 0.0, 1.0) == 0.0
        assert dist.pdf_six(0.3, 0.3, 1.0, math.pi) == pytest.approx(0.0, abs=1e-15)

    def test_array_input(self):
        out = dist.pdf_bivariate(np.array([0.2, 0.3]), np.array([0.3, 0.3]))
        assert out.shape == (2,)


class TestDomain:
    def test_outside_simplex(self):
        with pytest.raises(DomainError):
            dist.SimplexPoint3(0.7, 0.5)
        with pytest.raises(DomainError):
            dist.pdf_a(1.5)
        with pytest.raises(DomainError):
            dist.pdf_bivariate(-0.1, 0.3)

    def test_boundary_singular(self):
        with pytest.raises(SingularStateError):
            dist.pdf_b(0.0)
        with pytest.raises(SingularStateError):
            dist.pdf_bivariate(0.5, 0.5)

    def test_point(self):
        assert dist.SimplexPoint3(0.2, 0.3).c == pytest.approx(0.5)


class TestNormalization:
    def test_every_density_integrates_to_one(self):
        for name, err in normalization_errors().items():
            assert err < 1e-8, name

    def test_marginalization_over_b(self):
        for a in np.linspace(0.02, 0.98, 20):
            assert _inner_b(a, dist.pdf_bivariate) == pytest.approx(dist.pdf_a(a), abs=1e-6)

    def test_marginalization_over_a(self):
        for b in np.linspace(0.02, 0.98, 20):
            got = nested_quad(lambda a: dist.pdf_bivariate(a, b) if a < 1 - b else 0.0,
                              [(0.0, 1 - b)], tol=1e-12).value
            assert got == pytest.approx(dist.pdf_b(b), abs=1e-6)

    def test_cdf_b_against_quadrature(self):
        for b in (0.05, 0.3, 0.7, 1.0):
            got = quad1(lambda x: dist.pdf_b(x) if x > 0 else 0.0, 0.0, b, singular=True)
            assert dist.cdf_b(b) == pytest.approx(got, abs=1e-10)

    @given(st.floats(0.01, 0.9), st.floats(0.01, 0.9))
    @settings(max_examples=100, deadline=None)
    def test_b_c_symmetry(self, a, b):
        c = 1 - a - b
        if c <= 0.01:
            return
        assert dist.pdf_bivariate(a, b) == pytest.approx(dist.pdf_bivariate(a, c), rel=1e-13)


class TestMoments:
    def test_table_by_quadrature(self):
        for name, err in moment_errors().items():
            assert err < 1e-8, name

    def test_table_consistency(self):
        m = dist.moments()
        assert m["a"] + m["b"] + m["c"] == 1
        assert Fraction(dist.a_moment(2)).limit_denominator(100) == m["a2"]
        assert dist.a_moment(1) == pytest.approx(3 / 7)

    def test_a_moments_against_beta(self):
        for k in range(1, 6):
            assert dist.a_moment(k) == pytest.approx(stats.beta(1.5, 2).moment(k), rel=1e-12)


N_DRAWS = 1_000_000


@pytest.fixture(scope="module")
def draws():
    return dist.sample_bivariate(N_DRAWS, seed=2024)


class TestSampler:
    def test_shape_and_simplex(self, draws):
        assert draws.shape == (N_DRAWS, 3)
        assert np.all(draws >= 0)
        np.testing.assert_allclose(draws.sum(axis=1), 1.0, atol=1e-14)

    def test_moments_within_four_sigma(self, draws):
        a, b, c = draws.T
        values = {"a": a, "b": b, "c": c, "ab": a * b, "a2": a * a, "b2": b * b, "c2": c * c}
        for name, want in dist.moments().items():
            x = values[name]
            se = x.std(ddof=1) / math.sqrt(x.size)
            assert abs(x.mean() - float(want)) < 4 * se, name

    def test_ks(self, draws):
        assert stats.kstest(draws[:, 0], stats.beta(1.5, 2).cdf).pvalue > 0.01
        assert stats.kstest(draws[:, 1], dist.cdf_b).pvalue > 0.01
        assert stats.kstest(draws[:, 2], dist.cdf_b).pvalue > 0.01

    def test_deterministic(self):
        np.testing.assert_array_equal(dist.sample_bivariate(70_000, 5),
                                      dist.sample_bivariate(70_000, 5))
        assert not np.array_equal(dist.sample_bivariate(100, 5), dist.sample_bivariate(100, 6))

    def test_invalid_count(self):
        with pytest.raises(DomainError):
            dist.sample_bivariate(0, 1)
