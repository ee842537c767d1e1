import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from monovol import distributions as dist
from monovol import quadrature as qd
from monovol.errors import AccuracyError, DomainError, IntegrandError


class TestNestedQuad:
    def test_inverse_sqrt_endpoint(self):
        est = qd.nested_quad(lambda b: b**-0.5 if b > 0 else 0.0, [(0.0, 1.0)], tol=1e-12)
        assert est.value == pytest.approx(2.0, abs=1e-11)
        assert est.method == "quad"

    def test_dirichlet_half_normalizer(self):
        # int over the simplex of (abc)^(-1/2) = Gamma(1/2)^3 / Gamma(3/2) = 2 pi
        def f(a, b):
            c = 1 - a - b
            return 0.0 if min(a, b, c) <= 0 else (a * b * c) ** -0.5

        est = qd.nested_quad(f, [(0.0, 1.0), (0.0, lambda a: 1 - a)], tol=1e-10)
        assert est.value == pytest.approx(2 * math.pi, abs=1e-9)

    def test_three_dimensions(self):
        est = qd.nested_quad(lambda x, y, z: x * y * z, [(0, 1), (0, 1), (0, 1)], singular=False)
        assert est.value == pytest.approx(0.125, abs=1e-12)

    def test_marginal_a_normalized(self):
        assert qd.quad1(dist.pdf_a, 0.0, 1.0, singular=True) == pytest.approx(1.0, abs=1e-11)

    def test_accuracy_error_carries_estimate(self):
        with pytest.raises(AccuracyError) as info:
            qd.nested_quad(lambda x: math.sin(1 / x) / x if x > 0 else 0.0, [(0.0, 1.0)],
                           tol=1e-14, singular=False, limit=5)
        assert info.value.estimate is not None

    def test_dimension_limit(self):
        with pytest.raises(DomainError):
            qd.nested_quad(lambda *x: 1.0, [(0, 1)] * 4)


def _calibration_cases():
    # (integrand on (m, d) points, box, exact value)
    cases = []
    for k in range(1, 6):
        cases.append((lambda x, k=k: x[:, 0] ** k, [(0, 1)], 1 / (k + 1)))
    for j in range(1, 5):
        cases.append((lambda x, j=j: x[:, 0] * x[:, 1] ** j, [(0, 1), (0, 2)],
                      0.5 * 2 ** (j + 1) / (j + 1)))
    for w in (1.0, 2.0, 3.0, 5.0):
        cases.append((lambda x, w=w: np.sin(w * x[:, 0]), [(0, math.pi)], (1 - math.cos(w * math.pi)) / w))
    for lam in (0.5, 1.0, 2.0):
        cases.append((lambda x, lam=lam: np.exp(-lam * x.sum(axis=1)), [(0, 1)] * 3,
                      ((1 - math.exp(-lam)) / lam) ** 3))
    cases.append((lambda x: np.sqrt(x[:, 0]), [(0, 4)], 16 / 3))
    cases.append((lambda x: 1 / (1 + x[:, 0] ** 2), [(0, 1)], math.pi / 4))
    cases.append((lambda x: np.cos(x[:, 0]) * np.cos(x[:, 1]), [(0, 1), (0, 1)], math.sin(1) ** 2))
    cases.append((lambda x: x[:, 0] ** 2 + x[:, 1] ** 2 + x[:, 2] ** 2 + x[:, 3] ** 2,
                  [(0, 1)] * 4, 4 / 3))
    return cases


class TestMonteCarlo:
    def test_product_integrand(self):
        est = qd.mc_integrate(lambda x: x[:, 0] * x[:, 1], [(0, 1), (0, 1)], 200_000, seed=1)
        assert abs(est.value - 0.25) < 4 * est.std_error

    def test_constant_over_box(self):
        est = qd.mc_integrate(lambda x: np.full(len(x), 3.0), [(0, 2), (1, 4)], 1000, seed=1)
        assert est.value == pytest.approx(18.0)
        assert est.std_error == pytest.approx(0.0, abs=1e-12)

    def test_calibration(self):
        cases = _calibration_cases()
        assert len(cases) == 20
        hits = 0
        for k, (f, box, truth) in enumerate(cases):
            est = qd.mc_integrate(f, box, 50_000, seed=100 + k)
            hits += abs(est.value - truth) < 4 * est.std_error
        assert hits >= 19

    def test_non_finite_integrand(self):
        with pytest.raises(IntegrandError), np.errstate(divide="ignore"):
            qd.mc_integrate(lambda x: 1 / (x[:, 0] - x[:, 0]), [(0, 1)], 100, seed=0)

    def test_thread_count_does_not_change_result(self):
        f = lambda x: np.exp(x[:, 0] * x[:, 1])  # noqa: E731
        one = qd.mc_integrate(f, [(0, 1), (0, 1)], 300_000, seed=7, threads=1)
        many = qd.mc_integrate(f, [(0, 1), (0, 1)], 300_000, seed=7, threads=4)
        assert one == many

    def test_seed_matters(self):
        f = lambda x: x[:, 0]  # noqa: E731
        assert (qd.mc_integrate(f, [(0, 1)], 1000, seed=1).value
                != qd.mc_integrate(f, [(0, 1)], 1000, seed=2).value)

    def test_argument_validation(self):
        with pytest.raises(DomainError):
            qd.run_blocks(lambda rng, m: rng.random(m), 1, seed=0)
        with pytest.raises(DomainError):
            qd.run_blocks(lambda rng, m: rng.random(m), 10, seed=-1)
        with pytest.raises(DomainError):
            qd.mc_integrate(lambda x: x[:, 0], [(1, 0)], 10, seed=0)


class TestJointBlocks:
    def test_columns_match_single_runs(self):
        samplers = [lambda rng, m, k=k: rng.random(m) ** k for k in (1, 2, 3)]
        joint = qd.run_blocks_multi(qd.common_draws(samplers), 150_000, seed=3)
        for k, f in enumerate(samplers):
            single = qd.run_blocks(f, 150_000, seed=3)
            assert joint.means[k] == pytest.approx(single.value, rel=1e-13)
            assert joint.estimate(k).std_error == pytest.approx(single.std_error, rel=1e-10)

    def test_covariance_of_linear_combination(self):
        # u and 1 - u are perfectly anticorrelated: their sum has no variance
        samplers = [lambda rng, m: rng.random(m), lambda rng, m: 1 - rng.random(m)]
        joint = qd.run_blocks_multi(qd.common_draws(samplers), 100_000, seed=4)
        value, err = joint.combine([1.0, 1.0])
        assert value == pytest.approx(1.0, abs=1e-12)
        assert err < 1e-9
        assert joint.cov[0, 1] == pytest.approx(-joint.cov[0, 0], rel=1e-8)


class TestExtrapolation:
    EPS = (0.2, 0.1, 0.05, 0.025)

    def test_sqrt_model_is_exact_on_its_basis(self):
        e = np.array(self.EPS)
        c0, amp = qd.extrapolate(self.EPS, 2 + 3 * np.sqrt(e) - e, "sqrt")
        assert c0 == pytest.approx(2.0, abs=1e-12)
        assert amp > 1

    def test_linear_model(self):
        e = np.array(self.EPS)
        assert qd.extrapolate(self.EPS, 1 - 4 * e, "linear")[0] == pytest.approx(1.0)

    def test_edge_models(self):
        x = qd.edge_variable(np.array(self.EPS))
        assert qd.extrapolate(self.EPS, 0.5 + 2 * x, "s_edge_x")[0] == pytest.approx(0.5)
        assert qd.extrapolate(self.EPS, 0.5 - x**2 + x**3, "r_edge_x")[0] == pytest.approx(0.5)
        y = 0.5 + x - 2 * x**2 + 0.3 * x**3
        assert qd.extrapolate(self.EPS, y, "joint_x")[0] == pytest.approx(0.5)

    def test_unknown_model(self):
        with pytest.raises(DomainError):
            qd.extrapolation_weights(self.EPS, "cubic")

    def test_too_few_cutoffs(self):
        with pytest.raises(DomainError):
            qd.extrapolation_weights((0.2, 0.1), "sqrt")

    def test_edge_variable(self):
        assert qd.edge_variable(0.0) == 0.0
        assert qd.edge_variable(1.0) == 1.0
        assert qd.edge_variable(0.19) == pytest.approx(math.sqrt(1 - 0.81**2))


class TestRadialBasis:
    @given(st.floats(1e-3, 0.5), st.floats(1e-3, 0.5))
    @settings(max_examples=25, deadline=None)
    def test_matches_direct_integrals(self, er, es):
        R, S = 1 - er, 1 - es

        def q(f, hi):
            return integrate.quad(f, 0, hi, epsabs=0, epsrel=1e-12, limit=200)[0]

        A = [q(lambda r, i=i: r**3 * (1 - r * r) ** (i - 2.5), R) for i in (0, 1)]
        B = [q(lambda s, j=j: s * (1 - s * s) ** (j - 1.5), S) for j in (0, 1)]
        N = q(lambda r: r * (1 - r * r) ** -2.5, R) * q(lambda s: s * (1 - s * s) ** -1.5, S)
        got = qd.radial_basis(er, es)
        for i in (0, 1):
            for j in (0, 1):
                assert got[f"{i}{j}"] == pytest.approx(A[i] * B[j] / N, rel=1e-8)

    def test_limit(self):
        got = qd.radial_basis(1e-9, 1e-9)
        assert got["00"] == pytest.approx(1.0, abs=1e-4)
        assert max(abs(got[k]) for k in ("10", "01", "11")) < 1e-4


class TestProposals:
    @pytest.mark.parametrize("k", [1.5, 2.5, 3.5])
    def test_edge_power_normalizer(self, k):
        upper = 0.9
        want = integrate.quad(lambda x: x * (1 - x * x) ** -k, 0, upper, epsrel=1e-13)[0]
        x, omx, norm = qd.edge_power_sample(np.array([0.0, 0.5, 1.0]), upper, k)
        assert norm == pytest.approx(want, rel=1e-12)
        np.testing.assert_allclose(x, [0.0, x[1], upper], atol=1e-12)
        # the median splits the mass in half
        half = integrate.quad(lambda t: t * (1 - t * t) ** -k, 0, x[1], epsrel=1e-13)[0]
        assert half == pytest.approx(want / 2, rel=1e-10)
        np.testing.assert_allclose(omx, 1 - x**2, atol=1e-14)

    def test_dirichlet_half_mean(self):
        x = qd.dirichlet_half(qd.block_rng(0, 0, 0), 200_000)
        np.testing.assert_allclose(x.sum(axis=1), 1.0)
        np.testing.assert_allclose(x.mean(axis=0), 1 / 3, atol=0.005)


class TestCutoffSchedule:
    def test_default(self):
        assert tuple(qd.CutoffSchedule()) == (0.2, 0.1, 0.05, 0.025)

    @pytest.mark.parametrize("eps", [(), (0.1, 0.2), (0.0, -0.1), (1.5,), (0.1, 0.1)])
    def test_invalid(self, eps):
        with pytest.raises(DomainError):
            qd.CutoffSchedule(eps)


class TestTruncatedIntegrals:
    def test_importance_agrees_with_plain(self):
        plain = qd.truncated_full_integral("maximal", 3, 0.5, 400_000, seed=5, importance=False)
        imp = qd.truncated_full_integral("maximal", 3, 0.5, 400_000, seed=5)
        assert abs(plain.value - imp.value) < 4 * math.hypot(plain.std_error, imp.std_error)

    def test_importance_agrees_with_plain_n4(self):
        plain = qd.truncated_full_integral("maximal", 4, 0.5, 400_000, seed=5, delta=0.1,
                                           importance=False)
        imp = qd.truncated_full_integral("maximal", 4, 0.5, 400_000, seed=5, delta=0.1)
        assert abs(plain.value - imp.value) < 4 * math.hypot(plain.std_error, imp.std_error)

    def test_grows_as_cutoff_shrinks(self):
        vals = [qd.truncated_full_integral("maximal", 3, e, 100_000, seed=6).value
                for e in (0.4, 0.2, 0.1, 0.05)]
        assert all(x < y for x, y in zip(vals, vals[1:]))

    def test_simplex4_against_quadrature(self):
        d = 0.1

        def f(a, b, c):
            return a**-2.5 * b**-1.5 * c**-1.5 * (1 - a - b - c) ** -0.5

        oracle = qd.nested_quad(
            f, [(d, 1 - 3 * d), (d, lambda a: 1 - a - 2 * d), (d, lambda a, b: 1 - a - b - d)],
            tol=1e-6, singular=False).value
        est = qd.simplex4_factor_integral(d, 400_000, seed=8)
        assert abs(est.value - oracle) < 4 * est.std_error

    def test_validation(self):
        with pytest.raises(DomainError):
            qd.truncated_full_integral("maximal", 5, 0.1, 100, seed=0)
        with pytest.raises(DomainError):
            qd.truncated_full_integral("maximal", 3, 1.2, 100, seed=0)
        with pytest.raises(DomainError):
            qd.truncated_full_integral("maximal", 4, 0.1, 100, seed=0, delta=0.3)


class TestGrowth:
    def test_fit_recovers_power(self):
        eps = [0.2, 0.1, 0.05, 0.025]
        ests = [qd.IntegralEstimate(3 * e**-1.5, 1e-3 * e**-1.5, 1, 0) for e in eps]
        slope, err = qd.fit_growth(eps, ests)
        assert slope == pytest.approx(1.5, abs=1e-10)
        assert err < 0.01

    def test_control_does_not_diverge(self):
        rep = qd.divergence_probe("maximal", 3, (0.2, 0.1, 0.05, 0.025), 50_000, seed=9,
                                  integrand="control")
        assert not rep.diverges

    def test_unknown_integrand(self):
        with pytest.raises(DomainError):
            qd.divergence_probe("maximal", 3, (0.2, 0.1, 0.05, 0.025), 100, seed=0,
                                integrand="other")


class TestLimitingRatio:
    def test_small_run_near_closed_form(self):
        pts = [(1 / 3, 1 / 3), (0.6, 0.2)]
        est = qd.limiting_ratio_marginal("bivariate_ab", pts, (0.2, 0.1, 0.05, 0.025),
                                         100_000, seed=11)
        for e in est:
            want = dist.pdf_bivariate(*e.point)
            assert abs(e.value - want) < max(5 * e.std_error, 0.05 * want)
            assert len(e.ratios) == 4

    def test_validation(self):
        sched = (0.2, 0.1, 0.05)
        with pytest.raises(DomainError):
            qd.limiting_ratio_marginal("bivariate_ab", [(0.5, 0.6)], sched, 100, seed=0)
        with pytest.raises(DomainError):
            qd.limiting_ratio_marginal("six_dim", [(0.3, 0.3)], sched, 100, seed=0)
        with pytest.raises(DomainError):
            qd.limiting_ratio_marginal("bivariate_ab", [(0.3, 0.3)], sched, 100, seed=0,
                                       order="sideways")
        with pytest.raises(DomainError):
            qd.limiting_ratio_marginal("six_dim", [(0.3, 0.3, 1, 1, 1, 1)], sched, 100, seed=0,
                                       model="exact")
        with pytest.raises(DomainError):
            qd.limiting_ratio_marginal("other", [(0.3, 0.3)], sched, 100, seed=0)
