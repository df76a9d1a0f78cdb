import math

import numpy as np
import pytest
from scipy import integrate, stats

from randhmc.diagnostics import (
    ConcentrationSet,
    CoordinateLaw,
    DegenerateProposalError,
    NotApplicableError,
    acceptance_lower_bound,
    concentration_measure,
    cos_product_tail,
    cos_time_probability,
    density_ratio,
    energy_statistic,
    gaussian_tv_same_variance,
    kstep_coordinate_law,
    ks_critical_value,
    ks_statistic,
    numerical_tv,
    proposal_density,
    tv_bound_modified,
    warmness_gap_bound,
)
from randhmc.kernels import TimeSet, build_time_set, choose_step_size
from randhmc.model import Spectrum, make_spectrum, make_target, sample_exact


def unit_spectrum(omega_sq=1.0, d=1):
    return Spectrum(np.full(d, omega_sq), omega_sq, omega_sq)


class TestCosTimeProbability:
    def test_lower_bound_on_omega_grid(self):
        for alpha, beta in [(1.0, 1.0), (1.0, 100.0), (0.01, 1.0)]:
            ts = build_time_set(alpha, beta, math.pi / (20 * math.sqrt(beta)))
            for w in np.geomspace(math.sqrt(alpha), math.sqrt(beta), 40):
                assert cos_time_probability(float(w), ts) >= 0.5

    def test_right_angle_resonance(self):
        # omega * delta = pi/2 makes cos(omega k delta) cycle {0, -1, 0, 1};
        # |cos| <= 0.9 exactly at odd k.
        ts = build_time_set(1.0, 1.0, math.pi / 20)
        w = (math.pi / 2) / ts.delta
        odd = sum(1 for k in range(1, ts.k_max + 1) if k % 2 == 1)
        assert cos_time_probability(w, ts) == pytest.approx(odd / ts.k_max)

    def test_singleton_set_enumeration(self):
        ts = TimeSet(delta=math.pi / 20, k_max=1)
        assert cos_time_probability(1.0, ts) in (0.0, 1.0)

    def test_bit_for_bit_reproducible(self):
        ts = build_time_set(1.0, 4.0, math.pi / 40)
        assert cos_time_probability(1.7, ts) == cos_time_probability(1.7, ts)


class TestCosProductTail:
    def test_deterministic_given_seed(self):
        ts = build_time_set(1.0, 1.0, math.pi / 20)
        a = cos_product_tail(1.0, ts, K=8, n_mc=10_000, seed=5)
        b = cos_product_tail(1.0, ts, K=8, n_mc=10_000, seed=5)
        assert a == b

    def test_k_one_matches_enumeration(self):
        ts = build_time_set(1.0, 1.0, math.pi / 20)
        est = cos_product_tail(1.3, ts, K=1, n_mc=200_000, seed=2)
        exact = 1.0 - cos_time_probability(1.3, ts, threshold=0.9**0.25)
        se = math.sqrt(max(exact * (1 - exact), 1e-6) / 200_000)
        assert abs(est - exact) <= 4 * se + 1e-5

    def test_exponential_bound(self):
        ts = build_time_set(1.0, 4.0, math.pi / 40)
        for K in (8, 16):
            for w in (1.0, 1.7):
                est = cos_product_tail(w, ts, K=K, n_mc=50_000, seed=K)
                se = math.sqrt(max(est * (1 - est), 1e-9) / 50_000)
                assert est <= math.exp(-K / 8) + 3 * se

    def test_preconditions(self):
        ts = build_time_set(1.0, 1.0, math.pi / 20)
        with pytest.raises(ValueError):
            cos_product_tail(1.0, ts, K=0, n_mc=10_000)
        with pytest.raises(ValueError):
            cos_product_tail(1.0, ts, K=4, n_mc=100)


class TestKStepLaw:
    def test_quarter_period(self):
        law = kstep_coordinate_law(2.5, 2.0, [math.pi / 4])
        assert law.mean == pytest.approx(0.0, abs=1e-15)
        assert law.variance == pytest.approx(0.25)

    def test_two_thirds_angle(self):
        # two steps at angle pi/3: cos = 1/2 twice
        law = kstep_coordinate_law(1.0, 1.0, [math.pi / 3, math.pi / 3])
        assert law.mean == pytest.approx(0.25)
        assert law.variance == pytest.approx(15.0 / 16.0)

    def test_variance_identity(self):
        # (1 - p^2) + p^2 = 1 for p = prod cos: variance*w^2 + mean^2/x0^2 = 1.
        rng = np.random.default_rng(4)
        for _ in range(50):
            x0 = float(rng.uniform(0.5, 3.0))
            w = float(rng.uniform(0.3, 5.0))
            times = rng.uniform(0.0, 10.0, size=rng.integers(1, 8))
            law = kstep_coordinate_law(x0, w, times)
            assert law.variance * w**2 + law.mean**2 / x0**2 == pytest.approx(1.0, rel=1e-12)

    def test_matches_velocity_recursion_simulation(self):
        # Brute-force the recursion x <- cos(wt) x + sin(wt)/w * v over fresh
        # velocities and compare moments.
        rng = np.random.default_rng(9)
        x0, w = 1.7, 1.3
        times = np.array([0.9, 2.3, 0.4])
        n = 20_000
        z = np.full(n, x0)
        for t in times:
            z = math.cos(w * t) * z + math.sin(w * t) / w * rng.standard_normal(n)
        law = kstep_coordinate_law(x0, w, times)
        assert abs(z.mean() - law.mean) <= 4 * z.std() / math.sqrt(n)
        se_var = np.var(z) * math.sqrt(2.0 / (n - 1))
        assert abs(np.var(z) - law.variance) <= 4 * se_var

    def test_empty_times_rejected(self):
        with pytest.raises(ValueError):
            kstep_coordinate_law(1.0, 1.0, [])

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            CoordinateLaw(mean=0.0, variance=-1e-3)


class TestProposalDensity:
    def test_quarter_period_is_stationary_density(self):
        w = 2.0
        t = math.pi / 4  # w t = pi/2
        for z in (-1.0, 0.0, 0.7):
            want = stats.norm.pdf(z, scale=1.0 / w)
            assert proposal_density(5.0, z, w, t) == pytest.approx(want, rel=1e-12)

    def test_integrates_to_one(self):
        w, t, x = 1.5, 0.7, 2.0
        val, err = integrate.quad(lambda z: proposal_density(x, z, w, t), -30, 30)
        assert abs(val - 1.0) <= 1e-6

    def test_degenerate_time_raises(self):
        with pytest.raises(DegenerateProposalError):
            proposal_density(1.0, 0.0, 1.0, math.pi)


class TestConcentrationSet:
    def test_one_dimensional_chi_squared(self):
        # d=1, omega=1, gamma=1: membership is x^2 <= 2, so the measure is
        # the chi-squared(1) CDF at 2.
        cset = ConcentrationSet(gamma=1.0, spectrum=unit_spectrum())
        est = concentration_measure(cset, "pi", delta=0.0, n_mc=200_000, seed=3)
        want = stats.chi2(df=1).cdf(2.0)
        se = math.sqrt(want * (1 - want) / 200_000)
        assert abs(est - want) <= 4 * se

    def test_large_gamma_near_full_measure(self):
        spec = make_spectrum(10, "log_uniform", 1.0, 9.0, seed=1)
        cset = ConcentrationSet(gamma=20.0, spectrum=spec)
        assert concentration_measure(cset, "pi", 0.0, n_mc=100_000, seed=4) >= 0.999

    def test_deterministic(self):
        spec = make_spectrum(5, "geometric", 1.0, 4.0, seed=0)
        cset = ConcentrationSet(gamma=2.0, spectrum=spec)
        a = concentration_measure(cset, "pi", 0.0, n_mc=50_000, seed=8)
        b = concentration_measure(cset, "pi", 0.0, n_mc=50_000, seed=8)
        assert a == b

    def test_membership_nested_in_gamma(self):
        spec = make_spectrum(6, "log_uniform", 1.0, 16.0, seed=2)
        xs = sample_exact(make_target(spec), 5000, seed=5)
        inner = ConcentrationSet(gamma=1.0, spectrum=spec).contains(xs)
        outer = ConcentrationSet(gamma=3.0, spectrum=spec).contains(xs)
        assert np.all(outer[inner])

    def test_pi_hat_hypothesis_gate(self):
        spec = make_spectrum(4, "two_point", 1.0, 4.0, seed=0)
        cset = ConcentrationSet(gamma=2.0, spectrum=spec)
        ok_delta = 0.9 / (math.sqrt(4.0) * 4**0.25)
        concentration_measure(cset, "pi_hat", ok_delta, n_mc=1000, seed=0)
        with pytest.raises(ValueError, match="pi_hat"):
            concentration_measure(cset, "pi_hat", 2 * ok_delta, n_mc=1000, seed=0)

    def test_gamma_below_one_rejected(self):
        with pytest.raises(ValueError):
            ConcentrationSet(gamma=0.5, spectrum=unit_spectrum())


class TestDensityRatio:
    def test_zero_step_is_unity(self):
        spec = make_spectrum(3, "geometric", 1.0, 4.0, seed=0)
        assert density_ratio(np.zeros(3), spec, 0.0) == pytest.approx(1.0)

    def test_origin_value(self):
        got = density_ratio(np.zeros(1), unit_spectrum(), 1.0)
        assert got == pytest.approx(math.sqrt(3.0) / 2.0, rel=1e-12)

    def test_shell_samples_within_ten_percent(self):
        d, beta, gamma = 16, 9.0, 2.0
        spec = make_spectrum(d, "log_uniform", 1.0, beta, seed=3)
        delta = 1.0 / (10 * math.sqrt(gamma * beta) * d**0.25)
        xs = sample_exact(make_target(spec), 10_000, seed=6)
        cset = ConcentrationSet(gamma=gamma, spectrum=spec)
        on_shell = xs[cset.contains(xs)]
        assert on_shell.shape[0] > 0
        ratios = density_ratio(on_shell, spec, delta)
        assert np.all(ratios >= 0.9) and np.all(ratios <= 1.1)

    def test_normalization_against_quadrature(self):
        # ratio(x) * pi(x) must integrate to 1 over the line (d = 1).
        w2, delta = 2.0, 0.4
        spec = unit_spectrum(w2)
        w = math.sqrt(w2)

        def integrand(x):
            return density_ratio(np.array([x]), spec, delta) * stats.norm.pdf(x, scale=1.0 / w)

        val, _ = integrate.quad(integrand, -20, 20)
        assert abs(val - 1.0) <= 1e-6


class TestTvBound:
    def test_zero_step(self):
        assert tv_bound_modified(unit_spectrum(), 0.0) == 0.0

    def test_equal_spectrum_closed_form(self):
        d, beta = 7, 4.0
        spec = Spectrum(np.full(d, beta), beta, beta)
        delta = 0.3
        want = 0.375 * delta**2 * beta * math.sqrt(d)
        assert tv_bound_modified(spec, delta) == pytest.approx(want, rel=1e-12)

    def test_caps_at_one(self):
        spec = Spectrum(np.full(100, 1.0), 1.0, 1.0)
        assert tv_bound_modified(spec, 1.0) == 1.0

    def test_dominates_numerical_tv(self):
        rng = np.random.default_rng(12)
        for d in (1, 2):
            for _ in range(10):
                beta = float(rng.uniform(1.0, 16.0))
                spec = make_spectrum(d, "log_uniform", 0.5, beta, seed=int(rng.integers(10_000)))
                delta = float(rng.uniform(0.1, 1.0)) / math.sqrt(beta)
                tv = numerical_tv(spec, delta)
                assert tv <= tv_bound_modified(spec, delta) + 1e-9

    def test_numerical_tv_rejects_high_dimension(self):
        spec = make_spectrum(3, "geometric", 1.0, 4.0, seed=0)
        with pytest.raises(ValueError):
            numerical_tv(spec, 0.1)


class TestGaussianTv:
    def test_exact_value_below_mean_shift_bound(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            mu = float(rng.uniform(-2, 2))
            sigma = float(rng.uniform(0.2, 3.0))
            tv = gaussian_tv_same_variance(0.0, mu, sigma)
            assert 0.0 <= tv < 1.0
            assert tv <= abs(mu) / sigma + 1e-15

    def test_matches_quadrature(self):
        mu, sigma = 0.7, 1.3
        val, _ = integrate.quad(
            lambda x: abs(stats.norm.pdf(x, 0, sigma) - stats.norm.pdf(x, mu, sigma)), -30, 30
        )
        assert gaussian_tv_same_variance(0.0, mu, sigma) == pytest.approx(0.5 * val, abs=1e-9)


class TestAcceptanceLowerBound:
    def test_zero_step(self):
        assert acceptance_lower_bound(2.0, 0.0, 9.0, 16) == 1.0

    def test_choice_delta_value(self):
        gamma, beta, d = 3.0, 25.0, 64
        delta = 1.0 / (10 * math.sqrt(gamma * beta) * d**0.25)
        assert acceptance_lower_bound(gamma, delta, beta, d) == pytest.approx(
            math.exp(-1.0 / 400.0), rel=1e-12
        )

    def test_empirical_acceptance_dominates_bound_on_shell(self):
        from randhmc.dynamics import LeapfrogSchedule, PhaseState, leapfrog_evolve
        from randhmc.model import FirstOrderOracle

        d, beta, gamma = 8, 4.0, 2.0
        spec = make_spectrum(d, "two_point", 1.0, beta, seed=0)
        target = make_target(spec)
        delta = 1.0 / (10 * math.sqrt(gamma * beta) * d**0.25)
        ts = build_time_set(1.0, beta, delta)
        cset = ConcentrationSet(gamma=gamma, spectrum=spec)
        bound = acceptance_lower_bound(gamma, delta, beta, d)
        rng = np.random.default_rng(17)
        xs = sample_exact(target, 4000, seed=18)
        xs = xs[cset.contains(xs)]
        from randhmc.kernels import closed_form_acceptance

        count = 0
        for x in xs[:200]:
            v = rng.standard_normal(d)
            k = ts.draw_k(rng)
            res = leapfrog_evolve(PhaseState(x, v), LeapfrogSchedule(ts.delta, k), FirstOrderOracle(target))
            if cset.contains(res.state.x[None, :])[0]:
                assert closed_form_acceptance(x, res.state.x, spec, delta) >= bound
                count += 1
        assert count > 100  # the shell really was exercised

    def test_gamma_validation(self):
        with pytest.raises(ValueError):
            acceptance_lower_bound(0.9, 0.1, 1.0, 4)


class TestWarmnessGap:
    def test_value(self):
        d, beta = 16, 4.0
        spec = make_spectrum(d, "two_point", 1.0, beta, seed=0)
        s = 0.01
        gamma = math.log(1.0 / s)
        delta = 0.9 / (10 * math.sqrt(gamma * beta) * d**0.25)
        assert warmness_gap_bound(s, delta, spec) == pytest.approx(0.03)

    def test_s_range(self):
        spec = make_spectrum(4, "two_point", 1.0, 4.0, seed=0)
        with pytest.raises(ValueError):
            warmness_gap_bound(0.5, 1e-4, spec)
        with pytest.raises(ValueError):
            warmness_gap_bound(0.0, 1e-4, spec)

    def test_hypothesis_gate(self):
        spec = make_spectrum(4, "two_point", 1.0, 4.0, seed=0)
        with pytest.raises(NotApplicableError):
            warmness_gap_bound(0.01, 0.5, spec)


class TestKsStatistic:
    def test_matches_scipy(self):
        rng = np.random.default_rng(10)
        xs = rng.standard_normal(500)
        ours = ks_statistic(xs, stats.norm.cdf)
        theirs = stats.kstest(xs, stats.norm.cdf).statistic
        assert ours == pytest.approx(theirs, abs=1e-12)

    def test_reference_samples_below_critical_value(self):
        rng = np.random.default_rng(11)
        xs = rng.standard_normal(10_000)
        crit = ks_critical_value(0.01, 10_000)
        assert crit == pytest.approx(1.6276 / 100.0, rel=1e-3)
        assert ks_statistic(xs, stats.norm.cdf) <= crit

    def test_constant_samples(self):
        xs = np.zeros(200)
        assert ks_statistic(xs, stats.norm.cdf) >= 0.5

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            ks_statistic(np.zeros(99), stats.norm.cdf)


class TestEnergyStatistic:
    def test_exact_samples_pass_at_one_percent(self):
        spec = make_spectrum(8, "log_uniform", 1.0, 16.0, seed=7)
        xs = sample_exact(make_target(spec), 10_000, seed=8)
        assert energy_statistic(xs, spec) <= ks_critical_value(0.01, 10_000)

    def test_wrong_scale_fails(self):
        spec = make_spectrum(8, "log_uniform", 1.0, 16.0, seed=7)
        xs = 1.15 * sample_exact(make_target(spec), 10_000, seed=9)
        assert energy_statistic(xs, spec) > ks_critical_value(0.01, 10_000)

    def test_shape_validation(self):
        spec = make_spectrum(3, "geometric", 1.0, 4.0, seed=0)
        with pytest.raises(ValueError):
            energy_statistic(np.zeros((100, 4)), spec)


class TestChoiceDeltaInterplay:
    def test_choice_delta_passes_all_gates(self):
        # The pipeline default stepsize satisfies the time-set bound, the
        # pi_hat concentration hypothesis, and the warm-start threshold.
        for d in (4, 64):
            for kappa in (4.0, 64.0):
                eps = 0.05
                delta = choose_step_size(1.0, kappa, d, eps)
                spec = make_spectrum(d, "two_point", 1.0, kappa, seed=0)
                build_time_set(1.0, kappa, delta)
                warmness_gap_bound(eps / 12.0, delta, spec)
                cset = ConcentrationSet(gamma=1.0, spectrum=spec)
                concentration_measure(cset, "pi_hat", delta, n_mc=100, seed=0)
