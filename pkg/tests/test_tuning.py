import numpy as np
import pytest

from conftest import FIXTURES, plan_from_legs, prepared, straight_plan
from rtaprop.errors import AdsbError, ConfigError
from rtaprop.geo import to_local_frame
from rtaprop.kalman import FilterConfig
from rtaprop.rta import RtaEstimate, normal_quantile
from rtaprop.tuning import (
    AdsbTrack,
    TuningOptions,
    arrival_accuracy,
    average_covariances,
    extract_covariance,
    load_adsb,
    match_track_to_plan,
    observed_arrival_times,
    parse_adsb,
    prune_tracks,
    run_tuning,
    serialize_adsb,
    split_train_verify,
    synthesize_track,
)

WELL_FORMED = """\
timestamp,flight_id,lat,lon,alt_m
100.0,N123,39.70,-104.90,1700.0
101.0,N123,39.71,-104.90,1705.0
102.0,N123,39.72,-104.90,1710.0
"""


class TestParsing:
    def test_three_rows(self):
        track = parse_adsb(WELL_FORMED)
        assert track.flight_id == "N123"
        assert len(track.times) == 3
        assert track.report.rows_total == 3
        assert track.report.rows_dropped == 0

    def test_out_of_range_rows_dropped_and_reported(self):
        doc = WELL_FORMED + "103.0,N123,999.0,-104.90,1700.0\n"
        track = parse_adsb(doc)
        assert len(track.times) == 3
        assert track.report.rows_dropped == 1

    def test_unsorted_timestamps_sorted_and_flagged(self):
        lines = WELL_FORMED.splitlines()
        doc = "\n".join([lines[0], lines[3], lines[1], lines[2]]) + "\n"
        track = parse_adsb(doc)
        assert np.all(np.diff(track.times) > 0)
        assert track.report.sorted_applied

    def test_duplicate_timestamps_deduplicated(self):
        doc = WELL_FORMED + "102.0,N123,39.73,-104.90,1700.0\n"
        track = parse_adsb(doc)
        assert len(track.times) == 3
        assert track.report.duplicates_removed == 1

    def test_unknown_columns_rejected(self):
        doc = WELL_FORMED.replace("alt_m", "alt_ft")
        with pytest.raises(AdsbError, match="unknown columns|missing columns"):
            parse_adsb(doc)

    def test_empty_file_rejected(self):
        with pytest.raises(AdsbError):
            parse_adsb("timestamp,flight_id,lat,lon,alt_m\n")

    def test_multiple_flights_rejected(self):
        doc = WELL_FORMED + "103.0,N999,39.73,-104.90,1700.0\n"
        with pytest.raises(AdsbError, match="one flight per file"):
            parse_adsb(doc)

    def test_serialize_round_trip(self):
        track = parse_adsb(WELL_FORMED)
        again = parse_adsb(serialize_adsb(track))
        assert np.array_equal(track.times, again.times)
        assert np.array_equal(track.positions, again.positions)

    def test_optional_ground_speed(self):
        doc = WELL_FORMED.replace("alt_m", "alt_m,gs_mps").replace(
            "1700.0\n", "1700.0,52.0\n").replace(
            "1705.0\n", "1705.0,53.0\n").replace(
            "1710.0\n", "1710.0,51.0\n")
        track = parse_adsb(doc)
        assert track.ground_speed is not None
        assert track.ground_speed.tolist() == [52.0, 53.0, 51.0]


def exact_track(plan, spline, rate_hz=1.0, flight_id="EXACT", epoch=500.0):
    return synthesize_track(plan, spline, np.zeros((3, 3)), seed=0,
                            flight_id=flight_id, rate_hz=rate_hz,
                            epoch_offset=epoch)


class TestMatching:
    def test_exact_track_has_zero_deviations(self, six_wp_local):
        plan = plan_from_legs("SIX-WP", [
            (0.0, 0.0, 0.0, 0.0),
            (550.0, 80.0, 30.0, 50.0),
            (1150.0, 300.0, 60.0, 105.0),
            (1600.0, 750.0, 80.0, 160.0),
            (1850.0, 1400.0, 60.0, 220.0),
            (1900.0, 2100.0, 20.0, 285.0),
        ])
        local, spline = six_wp_local
        track = exact_track(plan, spline)
        dev = match_track_to_plan(track, plan, spline)
        assert np.abs(dev.deviations).max() < 1e-5
        assert dev.rms < 1e-5

    def test_constant_offset_recovered(self):
        plan = straight_plan()
        local, spline = prepared(plan)
        base = exact_track(plan, spline)
        from rtaprop.geo import enu_to_geodetic, geodetic_to_enu
        local_pos = geodetic_to_enu(base.positions[:, 0], base.positions[:, 1],
                                    base.positions[:, 2], plan.waypoints[0])
        shifted = enu_to_geodetic(local_pos + np.array([5.0, 0.0, 0.0]),
                                  plan.waypoints[0])
        track = AdsbTrack(flight_id="OFF", times=base.times, positions=shifted)
        dev = match_track_to_plan(track, plan, spline)
        np.testing.assert_allclose(
            dev.deviations, np.tile([5.0, 0.0, 0.0], (len(dev.times), 1)),
            atol=1e-5)

    def test_gaussian_noise_covariance_recovered(self):
        plan = straight_plan(speed=40.0, duration=999.0, plan_id="LONG")
        local, spline = prepared(plan)
        track = synthesize_track(plan, spline, 100.0 * np.eye(3), seed=77,
                                 flight_id="NOISY", epoch_offset=123.0)
        dev = match_track_to_plan(track, plan, spline)
        assert len(dev.times) >= 900
        cov = extract_covariance(dev)
        np.testing.assert_allclose(np.diag(cov), 100.0, rtol=0.15)

    def test_no_overlap_rejected(self):
        # after alignment only one sample can land inside the 60 s horizon
        plan = straight_plan()
        _, spline = prepared(plan)
        track = AdsbTrack(
            flight_id="FAR", times=np.array([0.0, 10_000.0]),
            positions=np.array([[39.7, -104.9, 1700.0], [39.7, -104.0, 1700.0]]))
        with pytest.raises(AdsbError, match="overlap"):
            match_track_to_plan(track, plan, spline)

    def test_epoch_alignment_recovers_offset(self):
        plan = straight_plan()
        _, spline = prepared(plan)
        track = exact_track(plan, spline, epoch=321.5)
        dev = match_track_to_plan(track, plan, spline)
        assert dev.time_offset == pytest.approx(321.5, abs=1.0)


class TestCovarianceOps:
    def test_zero_deviations_zero_matrix(self):
        from rtaprop.tuning import DeviationSeries
        dev = DeviationSeries("Z", np.arange(5.0), np.zeros((5, 3)))
        np.testing.assert_array_equal(extract_covariance(dev), np.zeros((3, 3)))

    def test_two_samples_unbiased(self):
        from rtaprop.tuning import DeviationSeries
        a = 3.0
        dev = DeviationSeries("2S", np.array([0.0, 1.0]),
                              np.array([[a, 0, 0], [-a, 0, 0]]))
        cov = extract_covariance(dev)
        assert cov[0, 0] == pytest.approx(2 * a * a)

    def test_insufficient_samples_rejected(self):
        from rtaprop.tuning import DeviationSeries
        dev = DeviationSeries("1S", np.array([0.0]), np.zeros((1, 3)))
        with pytest.raises(AdsbError):
            extract_covariance(dev)

    def test_average_single_is_identity_op(self):
        m = np.diag([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(average_covariances([m]), m)

    def test_average_of_zero_and_two_eye(self):
        out = average_covariances([np.zeros((3, 3)), 2.0 * np.eye(3)])
        np.testing.assert_array_equal(out, np.eye(3))

    def test_average_matches_brute_force_sum(self):
        rng = np.random.default_rng(13)
        mats = []
        for _ in range(9):
            m = rng.normal(size=(3, 3))
            mats.append(m @ m.T)
        total = np.zeros((3, 3))
        for m in mats:
            total = total + m
        np.testing.assert_allclose(average_covariances(mats), total / 9.0,
                                   atol=1e-12)

    def test_average_empty_rejected(self):
        with pytest.raises(ConfigError):
            average_covariances([])


class TestPruning:
    def make_dev(self, fid, magnitude):
        from rtaprop.tuning import DeviationSeries
        devs = np.full((10, 3), magnitude / np.sqrt(3.0))
        return DeviationSeries(fid, np.arange(10.0), devs)

    def test_exact_matches_retained(self):
        devs = [self.make_dev(f"F{i}", 1.0) for i in range(4)]
        retained, report = prune_tracks(devs, 500.0)
        assert len(retained) == 4
        assert report.rejected == ()

    def test_large_offset_rejected(self):
        devs = [self.make_dev("GOOD", 10.0), self.make_dev("BAD", 10_000.0)]
        retained, report = prune_tracks(devs, 500.0)
        assert [d.flight_id for d in retained] == ["GOOD"]
        assert report.rejected[0][0] == "BAD"
        assert report.rejected[0][1] == pytest.approx(10_000.0)

    def test_threshold_sweep_monotone(self):
        devs = [self.make_dev(f"F{i}", m) for i, m in
                enumerate([1.0, 50.0, 200.0, 800.0, 5000.0])]
        counts = [len(prune_tracks(devs, rms)[0])
                  for rms in (10_000.0, 1000.0, 400.0, 100.0, 10.0, 0.5)]
        assert counts == sorted(counts, reverse=True)
        assert counts[0] == 5

    def test_pure_filter_subset(self):
        devs = [self.make_dev(f"F{i}", m) for i, m in enumerate([1.0, 999.0])]
        retained, _ = prune_tracks(devs, 100.0)
        assert {d.flight_id for d in retained} <= {d.flight_id for d in devs}


class TestSplit:
    def test_disjoint_and_complete(self):
        ids = [f"F{i:03d}" for i in range(30)]
        train, verify = split_train_verify(ids, 0.7, seed=5)
        assert set(train) | set(verify) == set(ids)
        assert set(train) & set(verify) == set()
        assert len(train) == 21

    def test_seed_deterministic(self):
        ids = [f"F{i:03d}" for i in range(20)]
        assert split_train_verify(ids, 0.7, 9) == split_train_verify(ids, 0.7, 9)
        assert split_train_verify(ids, 0.7, 9) != split_train_verify(ids, 0.7, 10)

    def test_order_insensitive(self):
        ids = [f"F{i:03d}" for i in range(20)]
        shuffled = list(reversed(ids))
        assert split_train_verify(ids, 0.7, 3) == split_train_verify(shuffled, 0.7, 3)


class TestArrivalAccuracy:
    def est(self, nominal, sigma, confidence=0.95, idx=1):
        z = normal_quantile(confidence)
        return RtaEstimate(idx, nominal, sigma**2,
                           nominal - z * sigma, nominal + z * sigma, confidence)

    def test_all_at_nominal_scores_one(self):
        preds = [self.est(60.0, 2.0) for _ in range(10)]
        assert arrival_accuracy(preds, [60.0] * 10) == 1.0

    def test_all_outside_scores_zero(self):
        preds = [self.est(60.0, 1.0) for _ in range(10)]
        assert arrival_accuracy(preds, [1000.0] * 10) == 0.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            arrival_accuracy([self.est(60.0, 1.0)], [60.0, 61.0])

    def test_binomial_coverage_of_generative_draws(self):
        # actual arrivals drawn from the predicted normal law: coverage at
        # 95% confidence over 200 flights stays inside the binomial band
        sigma = 3.77
        n = 200
        gen = np.random.Generator(np.random.Philox(key=[2024, 95]))
        actuals = 60.0 + sigma * gen.standard_normal(n)
        preds = [self.est(60.0, sigma) for _ in range(n)]
        acc = arrival_accuracy(preds, actuals)
        assert 0.90 <= acc <= 0.99

    def test_nan_actuals_excluded(self):
        preds = [self.est(60.0, 1.0) for _ in range(3)]
        acc = arrival_accuracy(preds, [60.0, np.nan, 60.0])
        assert acc == 1.0


class TestObservedArrival:
    def test_exact_track_arrives_at_rta(self):
        plan = straight_plan()
        local, spline = prepared(plan)
        track = exact_track(plan, spline, epoch=77.0)
        arrivals = observed_arrival_times(track, plan, local)
        assert arrivals[-1] == pytest.approx(60.0, abs=0.2)

    def test_delayed_track_arrives_late(self):
        plan = straight_plan()
        local, spline = prepared(plan)
        track = synthesize_track(plan, spline, np.zeros((3, 3)), seed=1,
                                 flight_id="LATE", arrival_offset=7.5, pad=20.0)
        arrivals = observed_arrival_times(track, plan, local)
        assert arrivals[-1] == pytest.approx(67.5, abs=0.5)


class TestEndToEnd:
    def corpus(self, n_flights, noise_var, duration=999.0, seed0=100,
               arrival_sigma=0.0):
        plan = straight_plan(speed=40.0, duration=duration, plan_id="CORPUS")
        _, spline = prepared(plan)
        gen = np.random.Generator(np.random.Philox(key=[4242, 1]))
        pairs = []
        for i in range(n_flights):
            offset = (float(np.clip(gen.standard_normal() * arrival_sigma,
                                    -3.5 * arrival_sigma, 3.5 * arrival_sigma))
                      if arrival_sigma else 0.0)
            track = synthesize_track(
                plan, spline, noise_var * np.eye(3), seed=seed0 + i,
                flight_id=f"syn_{i:04d}", epoch_offset=float(gen.uniform(0, 300)),
                arrival_offset=offset, pad=25.0 if arrival_sigma else 0.0)
            pairs.append((plan, track))
        return pairs

    def test_known_covariance_recovered_within_20_percent(self):
        pairs = self.corpus(n_flights=20, noise_var=100.0)
        result = run_tuning(pairs, FilterConfig(), TuningOptions(seed=3))
        diag = np.diag(result.q_max_estimate)
        np.testing.assert_allclose(diag, 100.0, rtol=0.20)
        assert result.flights_used == 14  # 70% of 20
        assert len(result.verify_ids) == 6
        assert result.prune_report.rejected == ()
        # estimate and every per-flight covariance are symmetric PSD
        for cov in [result.q_max_estimate, *result.per_flight.values()]:
            np.testing.assert_allclose(cov, cov.T, atol=1e-12)
            assert np.linalg.eigvalsh(cov).min() >= -1e-9

    def test_tuning_is_seed_deterministic(self):
        pairs = self.corpus(n_flights=8, noise_var=50.0, duration=199.0)
        r1 = run_tuning(pairs, FilterConfig(), TuningOptions(seed=11))
        r2 = run_tuning(pairs, FilterConfig(), TuningOptions(seed=11))
        assert np.array_equal(r1.q_max_estimate, r2.q_max_estimate)
        assert r1.train_ids == r2.train_ids
        assert r1.accuracy == r2.accuracy

    def test_jobs_do_not_change_results(self):
        pairs = self.corpus(n_flights=6, noise_var=50.0, duration=199.0)
        r1 = run_tuning(pairs, FilterConfig(), TuningOptions(seed=2, jobs=1))
        r4 = run_tuning(pairs, FilterConfig(), TuningOptions(seed=2, jobs=4))
        assert np.array_equal(r1.q_max_estimate, r4.q_max_estimate)
        assert r1.verify_ids == r4.verify_ids
        assert r1.accuracy == r4.accuracy

    def test_pruning_removes_mismatched_flight(self):
        pairs = self.corpus(n_flights=5, noise_var=25.0, duration=199.0)
        plan = pairs[0][0]
        local = to_local_frame(plan)
        _, spline = prepared(plan)
        bad = synthesize_track(plan, spline, 1e8 * np.eye(3), seed=999,
                               flight_id="syn_bad", epoch_offset=10.0)
        pairs.append((plan, bad))
        result = run_tuning(pairs, FilterConfig(),
                            TuningOptions(seed=1, max_rms=500.0))
        assert "syn_bad" in [fid for fid, _ in result.prune_report.rejected]
        assert "syn_bad" not in result.train_ids + result.verify_ids

    def test_empty_after_pruning_raises(self):
        pairs = self.corpus(n_flights=3, noise_var=400.0, duration=199.0)
        with pytest.raises(ConfigError, match="no flights retained"):
            run_tuning(pairs, FilterConfig(), TuningOptions(max_rms=0.001))

    def test_no_pairs_raises(self):
        with pytest.raises(ConfigError):
            run_tuning([], FilterConfig(), TuningOptions())


class TestFixtureCorpus:
    def test_ga_fixture_files_parse_and_tune(self):
        adsb_dir = FIXTURES / "adsb"
        plans_dir = FIXTURES / "plans"
        from rtaprop.geo import load_flight_plan
        pairs = []
        for track_file in sorted(adsb_dir.glob("ga_*.csv")):
            plan = load_flight_plan(plans_dir / (track_file.stem + ".yaml"))
            pairs.append((plan, load_adsb(track_file)))
        assert len(pairs) >= 3
        result = run_tuning(pairs, FilterConfig(), TuningOptions(seed=8))
        diag = np.diag(result.q_max_estimate)
        assert np.all(diag > 0.0)
        assert result.flights_used >= 2
