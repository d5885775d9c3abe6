"""Log-normal duration models: closed forms, quadrature, and sampling oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from lcdur.errors import (
    DegenerateSampleError,
    DomainError,
    EmptySampleError,
    MissingGroupError,
    NonPositiveDurationError,
)
from lcdur.extract import LaneChangeEvent
from lcdur.model import (
    LogNormalModel,
    cdf,
    fit,
    fit_models,
    goodness_of_fit,
    pdf,
    quantile,
    read_models_json,
    sample,
    write_models_json,
)


def model_of(mu, sigma):
    return LogNormalModel("car", "left", mu, sigma, n=0, log_likelihood=0.0)


class TestFit:
    def test_closed_form_two_points(self):
        result = fit([math.e, math.e**3], "car", "left")
        assert abs(result.mu - 2.0) < 1e-12
        assert abs(result.sigma - 1.0) < 1e-12
        assert result.n == 2

    def test_scale_equivariance(self):
        rng = np.random.default_rng(17)
        durations = rng.uniform(4.0, 15.0, 200)
        base = fit(durations, "car", "left")
        scaled = fit(2.5 * durations, "car", "left")
        assert abs(scaled.mu - (base.mu + math.log(2.5))) < 1e-12
        assert abs(scaled.sigma - base.sigma) < 1e-12

    def test_degenerate_sample(self):
        with pytest.raises(DegenerateSampleError):
            fit([7.4, 7.4, 7.4], "car", "left")

    def test_non_positive_duration(self):
        with pytest.raises(NonPositiveDurationError):
            fit([3.0, -1.0], "car", "left")
        with pytest.raises(NonPositiveDurationError):
            fit([3.0, 0.0], "car", "left")

    def test_too_small_sample(self):
        with pytest.raises(EmptySampleError):
            fit([5.0], "car", "left")

    def test_log_likelihood_matches_direct_sum(self):
        rng = np.random.default_rng(4)
        durations = rng.lognormal(2.0, 0.3, 500)
        result = fit(durations, "truck", "right")
        direct = sum(
            math.log(pdf(result, float(x))) for x in durations
        )
        assert abs(result.log_likelihood - direct) < 1e-6

    def test_sigma_uses_mle_denominator(self):
        durations = [math.e, math.e**3]
        result = fit(durations, "car", "left")
        # the n-1 convention would give sqrt(2), not 1
        assert abs(result.sigma - 1.0) < 1e-12

    def test_refit_recovers_parameters_at_clt_rate(self):
        mu, sigma = 2.0, 0.25
        for n, factor in ((10**3, 3.0), (10**4, 3.0), (10**5, 2.0)):
            draws = sample(model_of(mu, sigma), n, seed=1234)
            refit = fit(draws, "car", "left")
            band = factor * sigma / math.sqrt(n)
            assert abs(refit.mu - mu) <= band
            assert abs(refit.sigma - sigma) <= factor * sigma / math.sqrt(2 * n) * 2


class TestDistributionFunctions:
    def test_median_round_trips(self):
        m = model_of(1.8, 0.4)
        assert cdf(m, math.exp(1.8)) == 0.5
        assert quantile(m, 0.5) == math.exp(1.8)

    def test_quantile_inverts_cdf(self):
        m = model_of(2.0, 0.3)
        for x in np.linspace(2.0, 25.0, 23):
            back = quantile(m, cdf(m, float(x)))
            assert abs(back - x) <= 1e-9 * x

    def test_pdf_integrates_to_one(self):
        m = model_of(math.log(7.5), 0.2)
        total, err = integrate.quad(lambda x: pdf(m, x), 1e-12, np.inf)
        assert abs(total - 1.0) < 1e-6

    def test_cdf_limits_and_monotonicity(self):
        m = model_of(2.0, 0.5)
        xs = np.linspace(0.01, 100.0, 500)
        values = [cdf(m, float(x)) for x in xs]
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert values[0] < 1e-6
        assert values[-1] > 0.99

    def test_domain_errors(self):
        m = model_of(2.0, 0.5)
        with pytest.raises(DomainError):
            pdf(m, 0.0)
        with pytest.raises(DomainError):
            cdf(m, -1.0)
        with pytest.raises(DomainError):
            quantile(m, 0.0)
        with pytest.raises(DomainError):
            quantile(m, 1.0)

    def test_model_mean_exceeds_median(self):
        m = model_of(2.0, 0.5)
        assert m.mean > m.median


class TestSampling:
    def test_deterministic_for_fixed_seed(self):
        m = model_of(math.log(7.0), 0.2)
        first = sample(m, 1000, seed=42)
        second = sample(m, 1000, seed=42)
        assert np.array_equal(first, second)
        assert not np.array_equal(first, sample(m, 1000, seed=43))

    def test_all_draws_positive(self):
        draws = sample(model_of(0.0, 2.0), 10**5, seed=7)
        assert np.all(draws > 0.0)

    def test_moments_match_analytic_values(self):
        m = model_of(math.log(7.0), 0.2)
        draws = sample(m, 2 * 10**5, seed=11)
        analytic_mean = 7.0 * math.exp(0.02)
        assert abs(np.mean(draws) - analytic_mean) < 0.02 * analytic_mean
        assert abs(np.median(draws) - 7.0) < 0.02 * 7.0

    def test_n_validation(self):
        with pytest.raises(ValueError):
            sample(model_of(1.0, 1.0), 0, seed=1)


class TestGoodnessOfFit:
    def test_self_sample_distance_small(self):
        m = model_of(2.0, 0.3)
        draws = sample(m, 10**4, seed=3)
        report = goodness_of_fit(m, draws)
        assert report.statistic < 0.02
        assert report.n == 10**4

    def test_wrong_family_scores_worse(self):
        rng = np.random.default_rng(8)
        uniform_data = rng.uniform(4.0, 12.0, 10**4)
        fitted = fit(uniform_data, "car", "left")
        self_draws = sample(fitted, 10**4, seed=3)
        self_distance = goodness_of_fit(fitted, self_draws).statistic
        uniform_distance = goodness_of_fit(fitted, uniform_data).statistic
        assert uniform_distance > self_distance

    def test_single_point_formula(self):
        m = model_of(2.0, 0.5)
        x = 9.0
        report = goodness_of_fit(m, [x])
        assert abs(report.statistic - max(cdf(m, x), 1.0 - cdf(m, x))) < 1e-15

    def test_empty_sample(self):
        with pytest.raises(EmptySampleError):
            goodness_of_fit(model_of(1.0, 1.0), [])


def _events_for_groups(groups):
    events = []
    rng = np.random.default_rng(1)
    for index, (vc, direction) in enumerate(groups):
        for k in range(8):
            frames = int(rng.integers(100, 300))
            events.append(
                LaneChangeEvent.from_frames(
                    recording_id=1,
                    track_id=index * 100 + k,
                    vehicle_class=vc,
                    direction=direction,
                    origin_lane_rank=1,
                    target_lane_rank=2,
                    start_frame=0,
                    cross_frame=frames // 2,
                    end_frame=frames,
                    frame_dt=0.04,
                    nav_speed_mps=25.0,
                )
            )
    return events


class TestModelSet:
    FULL = (("car", "left"), ("car", "right"), ("truck", "left"), ("truck", "right"))

    def test_full_set_has_four_ordered_models(self):
        models = fit_models(_events_for_groups(self.FULL))
        assert [(m.vehicle_class, m.direction) for m in models] == list(self.FULL)

    def test_missing_group_is_an_error(self):
        partial = _events_for_groups(self.FULL[:3])
        with pytest.raises(MissingGroupError):
            fit_models(partial)

    def test_models_json_round_trip_is_lossless(self, tmp_path):
        models = fit_models(_events_for_groups(self.FULL))
        path = tmp_path / "models.json"
        write_models_json(models, path)
        assert read_models_json(path) == models
