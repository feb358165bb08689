import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtaprop.errors import ConfigError
from rtaprop.kalman import FilterConfig, propagate_plan, waypoint_velocity_variances
from rtaprop.rta import (
    RtaEstimate,
    cumulative_variance,
    estimate_rta,
    mean_cruise_speed,
    normal_quantile,
    rta_bounds,
    segment_kinematics,
    segment_time_variance,
)


def erf_quantile(confidence, lo=0.0, hi=10.0):
    """Independent two-sided normal quantile via bisection on math.erf."""
    target = confidence
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if math.erf(mid / math.sqrt(2.0)) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def metric_local(points, times):
    from rtaprop.geo import GeoWaypoint, LocalPlan
    return LocalPlan(origin=GeoWaypoint(39.7, -104.9, 1700.0, 0.0),
                     points=np.asarray(points, dtype=float),
                     times=np.asarray(times, dtype=float), plan_id="M")


class TestKinematics:
    def test_straight_east(self):
        local = metric_local([[0, 0, 0], [600, 0, 0]], [0.0, 60.0])
        kin = segment_kinematics(local, 1)
        np.testing.assert_allclose(kin.v, [10.0, 0.0, 0.0], atol=1e-12)
        assert kin.speed == pytest.approx(10.0, abs=1e-12)

    def test_diagonal_three_four_five(self):
        local = metric_local([[0, 0, 0], [300, 400, 0]], [0.0, 50.0])
        kin = segment_kinematics(local, 1)
        assert kin.speed == pytest.approx(10.0, rel=1e-12)

    def test_rta_difference_recovered_from_norms(self, six_wp_local):
        local, _ = six_wp_local
        for k in range(1, len(local.times)):
            kin = segment_kinematics(local, k)
            dt_from_norms = np.linalg.norm(kin.delta_p) / kin.speed
            assert dt_from_norms == pytest.approx(kin.delta_t, rel=1e-9)

    def test_index_out_of_range(self, straight_local):
        local, _ = straight_local
        with pytest.raises(IndexError):
            segment_kinematics(local, 0)
        with pytest.raises(IndexError):
            segment_kinematics(local, 2)


class TestSegmentTimeVariance:
    def kin(self):
        local = metric_local([[0, 0, 0], [600, 0, 0]], [0.0, 60.0])
        return segment_kinematics(local, 1)

    def test_zero_velocity_variance_gives_zero(self):
        assert segment_time_variance(self.kin(), np.zeros(3), 1.0, 10.0) == 0.0

    def test_direct_substitution(self):
        # delta_t * ||sigma2_v|| / ||v|| = 60 * 1 / 10 = 6.0 s^2
        out = segment_time_variance(self.kin(), [1.0, 0.0, 0.0], 1.0, 10.0)
        assert out == pytest.approx(6.0, rel=1e-9)

    def test_threshold_boundary_is_zero(self):
        # ratio == delta * v_bar0 exactly: strict inequality fails -> 0
        kin = self.kin()
        v_bar0 = 10.0
        delta = 1.0
        sigma2 = np.array([delta * v_bar0 * kin.speed, 0.0, 0.0])
        assert np.linalg.norm(sigma2) / kin.speed == pytest.approx(delta * v_bar0)
        assert segment_time_variance(kin, sigma2, delta, v_bar0) == 0.0

    def test_just_below_threshold_contributes(self):
        # ratio 9.9999 is just under delta * v_bar0 = 10 -> still counts
        kin = self.kin()
        sigma2 = np.array([99.999, 0.0, 0.0])
        out = segment_time_variance(kin, sigma2, 1.0, 10.0)
        assert out == pytest.approx(60.0 * 99.999 / 10.0, rel=1e-12)
        assert out > 0.0

    def test_above_threshold_is_zero(self):
        assert segment_time_variance(self.kin(), [1e6, 0, 0], 1.0, 10.0) == 0.0

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ConfigError):
            segment_time_variance(self.kin(), [1, 0, 0], 0.0, 10.0)
        with pytest.raises(ConfigError):
            segment_time_variance(self.kin(), [1, 0, 0], 1.0, -5.0)
        with pytest.raises(ConfigError):
            segment_time_variance(self.kin(), [-1, 0, 0], 1.0, 10.0)


class TestCumulativeVariance:
    def test_basic(self):
        np.testing.assert_array_equal(cumulative_variance([1.0, 2.0, 3.0]),
                                      [1.0, 3.0, 6.0])

    def test_zeros(self):
        np.testing.assert_array_equal(cumulative_variance([0.0, 0.0]), [0.0, 0.0])

    @given(st.lists(st.floats(0.0, 1e6), min_size=1, max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_monotone_and_totals(self, values):
        cum = cumulative_variance(values)
        assert np.all(np.diff(cum) >= 0.0)
        assert cum[-1] == pytest.approx(sum(values), rel=1e-12, abs=1e-12)


class TestBounds:
    def test_zero_variance_degenerate(self):
        assert rta_bounds(120.0, 0.0, 0.95) == (120.0, 120.0)

    def test_two_sigma_confidence(self):
        lo, hi = rta_bounds(100.0, 4.0, 0.9545)
        z_oracle = erf_quantile(0.9545)
        assert z_oracle == pytest.approx(2.0, abs=1e-3)
        assert hi - 100.0 == pytest.approx(z_oracle * 2.0, rel=1e-9)
        assert hi - 100.0 == pytest.approx(4.0, abs=5e-3)
        assert lo == pytest.approx(200.0 - hi, rel=1e-12)

    def test_quantile_matches_erf_oracle_across_levels(self):
        for c in (0.5, 0.8, 0.9, 0.95, 0.99, 0.999):
            assert normal_quantile(c) == pytest.approx(erf_quantile(c), abs=1e-9)

    def test_negative_variance_rejected(self):
        with pytest.raises(ConfigError):
            rta_bounds(0.0, -1.0, 0.95)

    def test_confidence_range_enforced(self):
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ConfigError):
                rta_bounds(0.0, 1.0, bad)


class TestEstimatePipeline:
    def test_bounds_widen_along_route(self, six_wp_local):
        local, spline = six_wp_local
        traces = propagate_plan(spline, local, FilterConfig())
        ests = estimate_rta(local, waypoint_velocity_variances(traces))
        widths = [e.upper - e.lower for e in ests]
        assert widths[0] == 0.0
        assert all(w2 >= w1 - 1e-12 for w1, w2 in zip(widths[1:], widths[2:]))
        variances = [e.time_variance for e in ests]
        assert all(v2 >= v1 for v1, v2 in zip(variances, variances[1:]))

    def test_bounds_symmetric_with_exact_width(self, six_wp_local):
        local, spline = six_wp_local
        traces = propagate_plan(spline, local, FilterConfig())
        ests = estimate_rta(local, waypoint_velocity_variances(traces),
                            confidence=0.9)
        z = normal_quantile(0.9)
        for e in ests:
            assert e.upper - e.nominal_rta == pytest.approx(
                e.nominal_rta - e.lower, rel=1e-12, abs=1e-12)
            assert e.upper - e.lower == pytest.approx(
                2.0 * z * math.sqrt(e.time_variance), rel=1e-12, abs=1e-12)

    def test_zero_noise_collapses_to_nominal(self, six_wp_local):
        local, spline = six_wp_local
        cfg = FilterConfig(sigma_a2=0.0, q_max_scale=1.0, q_min_scale=1.0)
        traces = propagate_plan(spline, local, cfg)
        ests = estimate_rta(local, waypoint_velocity_variances(traces))
        for e in ests:
            assert abs(e.upper - e.nominal_rta) < 1e-6
            assert abs(e.lower - e.nominal_rta) < 1e-6
            assert e.nominal_rta == pytest.approx(local.times[e.waypoint_index])

    def test_threshold_zeroes_all_contributions(self, six_wp_local):
        local, spline = six_wp_local
        traces = propagate_plan(spline, local, FilterConfig())
        vv = waypoint_velocity_variances(traces)
        huge = vv * 1e12  # push every ratio past delta * v_bar0
        ests = estimate_rta(local, huge)
        for e in ests:
            assert e.time_variance == 0.0

    def test_rta_offset_shifts_nominals(self, straight_local):
        local, spline = straight_local
        traces = propagate_plan(spline, local, FilterConfig())
        ests = estimate_rta(local, waypoint_velocity_variances(traces),
                            rta_offset=1000.0)
        assert ests[0].nominal_rta == 1000.0
        assert ests[1].nominal_rta == 1060.0

    def test_mean_cruise_speed(self):
        local = metric_local([[0, 0, 0], [600, 0, 0], [600, 1200, 0]],
                             [0.0, 60.0, 120.0])
        assert mean_cruise_speed(local) == pytest.approx(15.0, rel=1e-12)

    def test_shape_mismatch_rejected(self, straight_local):
        local, _ = straight_local
        with pytest.raises(ConfigError):
            estimate_rta(local, np.zeros((3, 3)))
