import math

import numpy as np
import pytest
from scipy.special import erfcx

from mobw.base import DomainError, HyperMismatchError, InsufficientSampleError, InvalidInputError
from mobw.data import CompetingRisksDataset, TypeII, load_dataset
from mobw.distributions import WeibullParams
from mobw.inference import (
    BFHyper,
    CredibleInterval,
    IntervalKind,
    _residual_tail,
    bayes_factor_reading,
    conditional_expected_lifetime,
    empirical_jumps,
    expected_lifetime,
    fitted_min_cdf,
    functional_estimate,
    hpd_cri,
    ks_test,
    log_bayes_factor,
    point_estimates,
    pooled_weibull_fit,
    summarize,
    symmetric_cri,
)
from mobw.samplers import AlphaMarginal, WeightedSample

from conftest import RETINOPATHY


def constant_scales(m):
    return np.ones((m, 3))


def log_integral_on_grid(target: AlphaMarginal, hi: float = 40.0) -> float:
    x = np.linspace(1e-6, hi, 400_001)
    log_f = target(x)
    peak = log_f.max()
    return float(peak + np.log(np.sum(0.5 * (np.exp(log_f[1:] - peak) + np.exp(log_f[:-1] - peak)) * np.diff(x))))


def shortest_on_grid(target: AlphaMarginal, level: float, lo: float = 0.5, hi: float = 3.0) -> tuple[float, float]:
    """Shortest interval of posterior mass `level` for the shape, by trapezoid quadrature on a fine grid."""
    x = np.linspace(lo, hi, 250_001)
    log_f = target(x)
    f = np.exp(log_f - log_f.max())
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(x))])
    cdf /= cdf[-1]
    upper = np.searchsorted(cdf, cdf + level)
    lengths = np.where(upper < x.size, x[np.minimum(upper, x.size - 1)] - x, np.inf)
    j = int(np.argmin(lengths))
    return float(x[j]), float(x[upper[j]])


class TestPointEstimates:
    def test_constant_draws(self):
        s = WeightedSample(np.full(10, 1.7), np.tile([0.1, 0.2, 0.3], (10, 1)))
        report = point_estimates(s)
        assert report.means == pytest.approx([1.7, 0.1, 0.2, 0.3])
        assert report["alpha"].variance == pytest.approx(0.0, abs=1e-15)

    def test_weights_shift_the_mean(self):
        s = WeightedSample([1.0, 2.0], constant_scales(2), weights=[0.25, 0.75])
        report = point_estimates(s)
        assert report["alpha"].mean == pytest.approx(1.75)
        assert report["alpha"].variance == pytest.approx(0.1875)

    def test_uniform_is_arithmetic_mean(self, rng):
        alpha = rng.gamma(3.0, 1.0, 500)
        s = WeightedSample(alpha, rng.gamma(2.0, 1.0, (500, 3)))
        report = point_estimates(s)
        assert report["alpha"].mean == pytest.approx(alpha.mean())
        assert report["alpha"].variance == pytest.approx(alpha.var())

    def test_single_draw_has_no_variance(self):
        with pytest.raises(InsufficientSampleError):
            point_estimates(WeightedSample([1.0], constant_scales(1)))


class TestSymmetricInterval:
    def test_ranks(self):
        ci = symmetric_cri(np.arange(1, 21), None, 0.1)
        assert (ci.lower, ci.upper) == (1.0, 19.0)
        ci = symmetric_cri(np.arange(100, 0, -1), None, 0.05)
        assert (ci.lower, ci.upper) == (3.0, 97.0)
        assert ci.kind == IntervalKind.SYMMETRIC
        assert ci.level == pytest.approx(0.95)

    def test_single_atom(self):
        ci = symmetric_cri(np.full(20, 5.0), None, 0.1)
        assert (ci.lower, ci.upper) == (5.0, 5.0)
        assert ci.length == 0.0

    def test_weighted_single_atom(self):
        weights = np.zeros(20)
        weights[4] = 1.0
        ci = symmetric_cri(np.arange(1.0, 21.0), weights, 0.05)
        assert (ci.lower, ci.upper) == (5.0, 5.0)

    def test_weighted_tails(self):
        weights = np.full(20, 0.01)
        weights[2] = 0.81
        ci = symmetric_cri(np.arange(1.0, 21.0), weights, 0.1)
        assert (ci.lower, ci.upper) == (3.0, 15.0)

    def test_bad_gamma(self):
        with pytest.raises(InvalidInputError):
            symmetric_cri([1.0, 2.0], None, 1.5)


class TestHPDInterval:
    def test_flat_sample(self):
        ci = hpd_cri(np.arange(1, 21), None, 0.1)
        assert (ci.lower, ci.upper) == (1.0, 19.0)
        assert ci.kind == IntervalKind.HPD

    def test_uniform_weights_match_unweighted(self, rng):
        values = rng.normal(size=1000)
        assert hpd_cri(values, np.ones(1000), 0.05) == hpd_cri(values, None, 0.05)
        assert symmetric_cri(values, np.full(1000, 3.0), 0.05) == symmetric_cri(values, None, 0.05)

    def test_skewed_sample_is_shorter_than_equal_tails(self, rng):
        values = rng.lognormal(0.0, 1.0, 10_000)
        hpd = hpd_cri(values, None, 0.05)
        sym = symmetric_cri(values, None, 0.05)
        assert hpd.length < sym.length
        assert hpd.lower < sym.lower

    def test_never_longer_than_equal_tails(self, rng):
        for _ in range(20):
            values = rng.gamma(rng.uniform(0.5, 5.0), 1.0, 300)
            weights = rng.uniform(0.1, 1.0, 300)
            for gamma in (0.01, 0.05, 0.1):
                assert hpd_cri(values, None, gamma).length <= symmetric_cri(values, None, gamma).length
                assert hpd_cri(values, weights, gamma).length <= symmetric_cri(values, weights, gamma).length

    def test_bounds_are_sample_values(self, rng):
        values = rng.normal(size=777)
        members = set(values.tolist())
        for weights in (None, rng.uniform(size=777)):
            ci = hpd_cri(values, weights, 0.1)
            assert ci.lower in members and ci.upper in members

    def test_levels_nest_on_random_samples(self, rng):
        for i in range(300):
            m = int(rng.integers(100, 401))
            values = rng.gamma(rng.uniform(0.5, 6.0), 1.0, m)
            weights = rng.uniform(0.05, 1.0, m) if i % 2 else None
            inner, middle, outer = (hpd_cri(values, weights, gamma) for gamma in (0.10, 0.05, 0.01))
            assert outer.lower <= middle.lower <= inner.lower
            assert inner.upper <= middle.upper <= outer.upper

    def test_summary_levels_nest(self, rng):
        s = WeightedSample(rng.lognormal(0.0, 0.5, 500), rng.gamma(2.0, 0.2, (500, 3)), weights=rng.uniform(size=500))
        for p in summarize(s).parameters:
            inner, middle, outer = (p.interval(level, IntervalKind.HPD) for level in (0.9, 0.95, 0.99))
            assert outer.lower <= middle.lower <= inner.lower
            assert inner.upper <= middle.upper <= outer.upper

    def test_single_atom(self):
        weights = np.zeros(20)
        weights[4] = 1.0
        ci = hpd_cri(np.arange(1.0, 21.0), weights, 0.05)
        assert (ci.lower, ci.upper) == (5.0, 5.0)

    def test_concentrated_weights(self):
        # one heavy atom near the bottom of a sample that spreads out upwards
        values = np.arange(1, 21) ** 2 / 10
        weights = np.full(20, 0.01)
        weights[2] = 0.81
        ci = hpd_cri(values, weights, 0.1)
        sym = symmetric_cri(values, weights, 0.1)
        assert (sym.lower, sym.upper) == (values[2], values[14])
        assert (ci.lower, ci.upper) == (values[0], values[12])

    def test_weighted_windows_match_exhaustive_search(self, rng):
        for _ in range(40):
            values = np.sort(rng.lognormal(0.0, 0.7, 60))
            weights = rng.uniform(size=60) ** 3
            w = weights / weights.sum()
            sym = symmetric_cri(values, weights, 0.1)
            target = w[(values >= sym.lower) & (values <= sym.upper)].sum()
            best = None
            for i in range(60):
                mass = np.cumsum(w[i:])
                j = i + int(np.searchsorted(mass, target - 1e-12))
                if j < 60 and (best is None or values[j] - values[i] < best[1] - best[0]):
                    best = (values[i], values[j])
            ci = hpd_cri(values, weights, 0.1, nested_with=())
            assert (ci.lower, ci.upper) == best
            assert ci.length <= sym.length

    def test_weighted_mass_is_respected(self, rng):
        values = rng.normal(size=2000)
        weights = np.exp(-0.5 * values)
        ci = hpd_cri(values, weights, 0.1)
        w = weights / weights.sum()
        inside = (values >= ci.lower) & (values <= ci.upper)
        assert w[inside].sum() >= 0.9 - 1e-9

    def test_too_few_draws(self):
        with pytest.raises(InsufficientSampleError):
            hpd_cri(np.arange(5.0), None, 0.1)
        with pytest.raises(InsufficientSampleError):
            symmetric_cri(np.arange(50.0), None, 0.01)


def test_credible_interval_validation():
    ci = CredibleInterval(1.0, 2.0, 0.95, IntervalKind.HPD)
    assert 1.5 in ci and 2.0 in ci and 2.5 not in ci
    with pytest.raises(InvalidInputError):
        CredibleInterval(2.0, 1.0, 0.95, IntervalKind.HPD)


def test_summarize_covers_all_parameters_and_levels(rng):
    s = WeightedSample(rng.gamma(4.0, 0.5, 2000), rng.gamma(2.0, 0.2, (2000, 3)))
    report = summarize(s, levels=(0.9, 0.95))
    assert [p.name for p in report.parameters] == ["alpha", "lambda0", "lambda1", "lambda2"]
    for p in report.parameters:
        assert len(p.intervals) == 4
        assert p.interval(0.9, "hpd").length <= p.interval(0.9, "symmetric").length
        assert p.interval(0.95, IntervalKind.HPD).lower <= p.mean
    with pytest.raises(KeyError):
        report["alpha"].interval(0.99, "hpd")


class TestRetinopathy:
    @pytest.fixture(scope="class")
    def shortest_95(self, retinopathy, default_prior):
        return shortest_on_grid(AlphaMarginal.from_dataset(retinopathy, default_prior), 0.95)

    def test_unrestricted_estimates(self, unrestricted_posterior, shortest_95):
        report = summarize(unrestricted_posterior)
        assert report["alpha"].mean == pytest.approx(1.5393, abs=0.03)
        assert report.means[1:] == pytest.approx([0.0714, 0.1872, 0.2207], abs=0.01)
        hpd = report["alpha"].interval(0.95, "hpd")
        assert hpd.lower == pytest.approx(shortest_95[0], abs=0.01)
        assert hpd.upper == pytest.approx(shortest_95[1], abs=0.015)
        sym = report["alpha"].interval(0.95, "symmetric")
        assert (sym.lower, sym.upper) == pytest.approx((1.2868, 1.8397), abs=0.01)

    def test_restricted_estimates(self, restricted_posterior, shortest_95):
        report = summarize(restricted_posterior)
        assert report.restricted
        assert report["lambda1"].mean < report["lambda2"].mean
        # the order restriction on lambda1, lambda2 leaves the shape marginal almost untouched
        hpd = report["alpha"].interval(0.95, "hpd")
        assert hpd.lower == pytest.approx(shortest_95[0], abs=0.02)
        assert hpd.upper == pytest.approx(shortest_95[1], abs=0.02)

    def test_ks_unrestricted(self, retinopathy, unrestricted_posterior):
        report = summarize(unrestricted_posterior)
        result = ks_test(retinopathy, lambda t: fitted_min_cdf(t, report))
        assert result.n == 71
        assert result.statistic == pytest.approx(0.0579, abs=0.005)
        assert result.p_value == pytest.approx(0.9598, abs=0.02)
        asymptotic = ks_test(retinopathy, lambda t: fitted_min_cdf(t, report), method="asymptotic")
        assert asymptotic.statistic == result.statistic
        assert asymptotic.p_value > result.p_value

    def test_ks_restricted(self, retinopathy, restricted_posterior):
        report = summarize(restricted_posterior)
        result = ks_test(retinopathy, lambda t: fitted_min_cdf(t, report))
        assert result.statistic == pytest.approx(0.0572, abs=0.005)
        assert result.p_value == pytest.approx(0.9637, abs=0.02)

    def test_pooled_fit(self, retinopathy, default_prior, unrestricted_posterior):
        fit = pooled_weibull_fit(retinopathy, BFHyper.matching(default_prior), np.random.default_rng(3), 100_000)
        assert fit.alpha == pytest.approx(1.5358, abs=0.03)
        assert fit.lam == pytest.approx(0.4795, abs=0.02)
        assert fit.lam == pytest.approx(unrestricted_posterior.scales.sum(axis=1).mean(), rel=0.02)
        result = ks_test(retinopathy, lambda t: fitted_min_cdf(t, fit.params))
        assert result.statistic == pytest.approx(0.0582, abs=0.005)

    def test_bayes_factor(self, retinopathy, default_prior):
        log_bf = log_bayes_factor(retinopathy, default_prior, BFHyper.matching(default_prior))
        assert log_bf / math.log(10) == pytest.approx(32.3667, abs=0.01)
        assert "do not reject" in bayes_factor_reading(log_bf)


class TestBayesFactor:
    def test_one_failure_per_cause(self, unit_prior):
        d = CompetingRisksDataset.from_observations([(0.5, 0), (1.0, 1), (1.5, 2)])
        log_bf = log_bayes_factor(d, unit_prior, BFHyper(1.0, 1.0, 1.0, 1.0))
        assert log_bf == pytest.approx(math.log(60.0))

    def test_time_units_do_not_matter(self, default_prior):
        h0 = BFHyper.matching(default_prior)
        days = load_dataset(RETINOPATHY)
        years = load_dataset(RETINOPATHY, time_divisor=365)
        assert log_bayes_factor(days, default_prior, h0) == pytest.approx(log_bayes_factor(years, default_prior, h0))

    def test_closed_form_needs_matching_hypers(self, retinopathy, default_prior):
        with pytest.raises(HyperMismatchError):
            log_bayes_factor(retinopathy, default_prior, BFHyper(1.0, 1.0, 1.0, 1.0))
        with pytest.raises(InvalidInputError):
            log_bayes_factor(retinopathy, default_prior, BFHyper.matching(default_prior), mode="other")

    def test_numeric_agrees_with_closed_when_matching(self, small_dataset, unit_prior):
        h0 = BFHyper.matching(unit_prior)
        closed = log_bayes_factor(small_dataset, unit_prior, h0)
        numeric = log_bayes_factor(small_dataset, unit_prior, h0, mode="numeric")
        assert numeric == pytest.approx(closed, rel=1e-9, abs=1e-9)

    def test_numeric_with_other_hypers(self, small_dataset, unit_prior):
        h0 = BFHyper(d1=2.0, d2=3.0, d3=1.5, d4=0.5)
        n = small_dataset.n
        counts = small_dataset.counts
        g = unit_prior.gd
        lg = math.lgamma
        pooled = h0.d4 * math.log(h0.d3) + lg(n + h0.d4) - lg(h0.d4)
        full = (
            g.a * math.log(g.b) + lg(g.abar) + sum(lg(k + s) - lg(s) for k, s in zip(counts, g.shapes))
            + lg(n + g.a) - lg(g.a) - lg(n + g.abar)
        )
        priors = (h0.d2 * math.log(h0.d1) - lg(h0.d2)) - (unit_prior.c2 * math.log(unit_prior.c1) - lg(unit_prior.c2))
        stats = small_dataset.stats
        integrals = log_integral_on_grid(AlphaMarginal(stats, h0.d4, h0.d3, h0.d1, h0.d2)) - log_integral_on_grid(
            AlphaMarginal(stats, g.a, g.b, unit_prior.c1, unit_prior.c2)
        )
        expected = pooled - full + priors + integrals
        assert log_bayes_factor(small_dataset, unit_prior, h0, mode="numeric") == pytest.approx(expected, abs=1e-5)

    def test_needs_complete_data(self, unit_prior):
        d = CompetingRisksDataset.from_observations([(0.5, 0), (1.0, 1)], n=4, scheme=TypeII(2))
        with pytest.raises(InvalidInputError):
            log_bayes_factor(d, unit_prior, BFHyper.matching(unit_prior))

    def test_reading(self):
        assert "reject H0" in bayes_factor_reading(-1.0)
        assert "do not reject" in bayes_factor_reading(0.0)


class TestFittedCDF:
    def test_edges_and_monotone(self):
        w = WeibullParams(1.5, 0.5)
        assert fitted_min_cdf(0.0, w) == 0.0
        grid = np.linspace(0.0, 10.0, 101)
        values = fitted_min_cdf(grid, w)
        assert np.all(np.diff(values) >= 0)
        assert values[-1] == pytest.approx(1 - math.exp(-0.5 * 10**1.5))

    def test_negative_time(self):
        with pytest.raises(DomainError):
            fitted_min_cdf(-1.0, WeibullParams(1.0, 1.0))


class TestKS:
    def test_single_observation(self):
        d = CompetingRisksDataset.from_observations([(1.0, 1)])
        result = ks_test(d, lambda t: np.full_like(t, 0.5))
        assert result.statistic == pytest.approx(0.5)
        assert result.n == 1

    def test_monotone_transform_invariance(self, small_dataset):
        w = WeibullParams(1.3, 0.6)
        cubed = CompetingRisksDataset(small_dataset.times**3, small_dataset.causes, small_dataset.n)
        plain = ks_test(small_dataset, lambda t: fitted_min_cdf(t, w))
        transformed = ks_test(cubed, lambda s: fitted_min_cdf(np.cbrt(s), w))
        assert transformed.statistic == pytest.approx(plain.statistic)

    def test_ties_make_one_jump(self):
        jumps = empirical_jumps([1.0, 2.0, 2.0, 3.0])
        assert jumps.t.tolist() == [1.0, 2.0, 3.0]
        assert jumps.after.tolist() == [0.25, 0.75, 1.0]
        assert jumps.before.tolist() == [0.0, 0.25, 0.75]

    def test_perfect_fit_scores_well(self, rng):
        times = rng.weibull(2.0, 2000)
        d = CompetingRisksDataset(times, np.zeros(times.size, dtype=int), times.size)
        result = ks_test(d, lambda t: fitted_min_cdf(t, WeibullParams(2.0, 1.0)))
        assert result.statistic < 0.05
        assert result.p_value > 0.01

    def test_unknown_method(self, small_dataset):
        with pytest.raises(InvalidInputError):
            ks_test(small_dataset, lambda t: fitted_min_cdf(t, WeibullParams(1.0, 1.0)), method="bootstrap")


def test_pooled_fit_single_unit_observation():
    d = CompetingRisksDataset.from_observations([(1.0, 2)])
    fit = pooled_weibull_fit(d, BFHyper(1.0, 1.0, 1.0, 1.0), np.random.default_rng(5), 50_000)
    # alpha* ~ Gamma(2, 1) and lambda* | alpha* ~ Gamma(2, rate 2)
    assert fit.alpha == pytest.approx(2.0, abs=0.03)
    assert fit.lam == pytest.approx(1.0, abs=0.02)


def test_pooled_fit_rejects_bad_draws(small_dataset, unit_prior):
    with pytest.raises(InvalidInputError):
        pooled_weibull_fit(small_dataset, BFHyper.matching(unit_prior), np.random.default_rng(0), 0)


class TestLifetimes:
    def test_exponential(self):
        assert expected_lifetime(1.0, 2.0) == pytest.approx(0.5)
        assert conditional_expected_lifetime(1.0, 2.0, 3.0) == pytest.approx(3.5)

    def test_weibull(self):
        assert expected_lifetime(2.0, 1.0) == pytest.approx(math.gamma(1.5))
        assert conditional_expected_lifetime(2.0, 1.0, 0.0) == pytest.approx(math.gamma(1.5))
        assert conditional_expected_lifetime(2.0, 1.0, 1.0) > 1.0

    def test_far_in_the_tail(self):
        # S(30 + u) / S(30) = exp(-60u - u**2) integrates to sqrt(pi)/2 * erfcx(30)
        assert conditional_expected_lifetime(2.0, 1.0, 30.0) == pytest.approx(30 + math.sqrt(math.pi) / 2 * erfcx(30.0))
        assert conditional_expected_lifetime(1.0, 2.0, 400.0) == pytest.approx(400.5)

    def test_integral_agrees_with_gamma_ratio(self):
        # hazard 400 stays on the gamma-ratio side; the integral must agree there
        closed = conditional_expected_lifetime(2.0, 1.0, 20.0)
        assert closed == pytest.approx(20 + math.sqrt(math.pi) / 2 * erfcx(20.0))
        assert 20.0 + _residual_tail(2.0, 400.0, 20.0) == pytest.approx(closed, rel=1e-9)

    def test_mixed_hazards(self):
        out = conditional_expected_lifetime(np.array([1.0, 1.0]), np.array([0.5, 100.0]), 6.0)
        assert out == pytest.approx([8.0, 6.01])

    def test_vectorized(self):
        out = expected_lifetime(np.array([1.0, 1.0]), np.array([1.0, 4.0]))
        assert out == pytest.approx([1.0, 0.25])

    def test_negative_age(self):
        with pytest.raises(DomainError):
            conditional_expected_lifetime(1.0, 1.0, -1.0)


class TestFunctionalEstimate:
    def test_total_risk(self, rng):
        scales = rng.gamma(2.0, 0.1, (1000, 3))
        s = WeightedSample(rng.gamma(3.0, 0.5, 1000), scales)
        summary = functional_estimate(s, lambda a, l0, l1, l2: l0 + l1 + l2, levels=(0.95,), name="lambda")
        assert summary.name == "lambda"
        assert summary.mean == pytest.approx(scales.sum(axis=1).mean())
        assert len(summary.intervals) == 2

    def test_weighted(self):
        s = WeightedSample(np.arange(1.0, 21.0), constant_scales(20), weights=np.r_[np.ones(10), 3 * np.ones(10)])
        summary = functional_estimate(s, lambda a, *_: 2 * a, levels=(0.9,))
        assert summary.mean == pytest.approx(2 * (np.arange(1, 11).sum() + 3 * np.arange(11, 21).sum()) / 40)

    def test_one_value_per_draw(self, rng):
        s = WeightedSample(rng.gamma(3.0, 0.5, 100), constant_scales(100))
        with pytest.raises(InvalidInputError):
            functional_estimate(s, lambda a, *_: 1.0)
