"""Topology sampling, mobility, and scheduling against the closed forms."""

import numpy as np
import pytest

from airfed import analytics, network
from airfed.network import (
    NetworkRealization,
    SchedulingScheme,
    advance_round,
    sample_radii,
    sample_topology,
    schedule,
    topology_csv,
)
from airfed.rng import derived_rng

R_CELL = 100.0


class TestSampleTopology:
    def test_radius_cdf_at_half_cell(self):
        # F(R/2) = 1/4 under the 2r/R^2 density.
        radii = sample_radii(1, R_CELL, derived_rng(7, "cdf"), size=100000).ravel()
        assert np.mean(radii <= R_CELL / 2) == pytest.approx(0.25, abs=0.01)

    def test_single_device_mean_radius(self):
        # Matches the K = 1 furthest-distance mean, (2/3) R.
        radii = sample_radii(1, R_CELL, derived_rng(7, "mean"), size=100000).ravel()
        assert radii.mean() == pytest.approx(2.0 / 3.0 * R_CELL, rel=0.01)

    def test_same_seed_bit_identical(self):
        net_a = sample_topology(50, R_CELL, 123)
        net_b = sample_topology(50, R_CELL, 123)
        assert np.array_equal(net_a.radii, net_b.radii)
        assert np.array_equal(net_a.angles, net_b.angles)

    def test_positions_view(self):
        net = sample_topology(5, R_CELL, 1)
        positions = net.positions
        assert [p.device_id for p in positions] == [0, 1, 2, 3, 4]
        assert all(0 <= p.radius <= R_CELL for p in positions)
        assert all(0 <= p.angle < 2 * np.pi for p in positions)

    def test_validation(self):
        with pytest.raises(ValueError):
            sample_topology(0, R_CELL, 1)
        with pytest.raises(ValueError):
            NetworkRealization(radii=np.array([150.0]), angles=np.array([0.0]), r_cell=R_CELL)
        with pytest.raises(ValueError):
            NetworkRealization(
                radii=np.array([10.0]), angles=np.array([0.0]), r_cell=R_CELL, mobility="walk"
            )


class TestAdvanceRound:
    def test_static_keeps_positions(self):
        net = sample_topology(20, R_CELL, 5)
        stepped = advance_round(net, derived_rng(5, "step"))
        assert np.array_equal(stepped.radii, net.radii)
        assert stepped.round_index == net.round_index + 1

    def test_resample_draws_fresh_positions(self):
        net = sample_topology(20, R_CELL, 5)
        net = NetworkRealization(net.radii, net.angles, R_CELL, mobility="iid-resample")
        stepped = advance_round(net, derived_rng(5, "step"))
        assert stepped.round_index == 1
        assert stepped.mobility == "iid-resample"
        assert not np.array_equal(stepped.radii, net.radii)

    def test_round_index_strictly_increments(self):
        net = sample_topology(3, R_CELL, 9)
        for expected in range(1, 6):
            net = advance_round(net, derived_rng(9, "walk", expected))
            assert net.round_index == expected

    def test_mobility_covers_all_devices_at_predicted_rate(self):
        # 2000 independent training periods of 31 rounds with 200 devices
        # redropped each round: the fraction of periods in which every
        # device was ever interior tracks the closed-form probability.
        k, n_cr, runs = 200, 31, 2000
        r_in = 0.5 * R_CELL
        scheme = SchedulingScheme.cell_interior(r_in)
        exact, _ = analytics.p_all_exploited(k, n_cr, analytics.fraction_exploited(r_in, R_CELL))
        hits = 0
        for run in range(runs):
            rng = derived_rng(31337, "mobility-run", run)
            net = sample_topology(k, R_CELL, rng)
            net = NetworkRealization(net.radii, net.angles, R_CELL, mobility="iid-resample")
            ever = np.zeros(k, dtype=bool)
            for rnd in range(n_cr):
                if rnd > 0:
                    net = advance_round(net, rng)
                decision = schedule(net, scheme, rnd)
                ever[list(decision.scheduled_ids)] = True
            hits += bool(ever.all())
        assert hits / runs == pytest.approx(exact, abs=0.02)


class TestSchedule:
    def test_full_interior_equals_all_inclusive(self):
        net = sample_topology(30, R_CELL, 11)
        interior = schedule(net, SchedulingScheme.cell_interior(R_CELL), 0)
        everyone = schedule(net, SchedulingScheme.all_inclusive(), 0)
        assert interior.scheduled_ids == everyone.scheduled_ids
        assert interior.r_max_scheduled == everyone.r_max_scheduled

    def test_interior_mean_count(self):
        # E[k_in] = K (r_in/R)^2 = 5 for K = 20 at half the cell radius.
        k, trials = 20, 10000
        counts = (sample_radii(k, R_CELL, derived_rng(3, "kin"), size=trials) <= 50.0).sum(axis=1)
        assert counts.mean() == pytest.approx(5.0, abs=0.5)

    def test_interior_members_within_radius(self):
        net = sample_topology(50, R_CELL, 2)
        decision = schedule(net, SchedulingScheme.cell_interior(40.0), 0)
        assert not decision.empty
        assert all(net.radii[i] <= 40.0 for i in decision.scheduled_ids)
        assert decision.r_max_scheduled == net.radii[list(decision.scheduled_ids)].max()
        assert decision.k_in == len(decision.scheduled_ids)

    def test_alternating_pattern(self):
        net = sample_topology(30, R_CELL, 11)
        scheme = SchedulingScheme.alternating(50.0, period=1)
        interior = schedule(net, SchedulingScheme.cell_interior(50.0), 0)
        for rnd in range(6):
            decision = schedule(net, scheme, rnd)
            if rnd % 2 == 0:
                assert decision.scheduled_ids == interior.scheduled_ids
            else:
                assert len(decision.scheduled_ids) == 30

    def test_alternating_longer_period(self):
        net = sample_topology(10, R_CELL, 4)
        scheme = SchedulingScheme.alternating(50.0, period=3)
        kinds = ["interior" if len(schedule(net, scheme, r).scheduled_ids) < 10 else "all"
                 for r in range(12)]
        assert kinds == ["interior"] * 3 + ["all"] * 3 + ["interior"] * 3 + ["all"] * 3

    def test_empty_round_flagged(self):
        net = NetworkRealization(
            radii=np.array([60.0, 80.0]), angles=np.array([0.1, 0.2]), r_cell=R_CELL
        )
        decision = schedule(net, SchedulingScheme.cell_interior(10.0), 0)
        assert decision.empty
        assert np.isnan(decision.r_max_scheduled)

    def test_replay_is_identical(self):
        net = sample_topology(25, R_CELL, 8)
        scheme = SchedulingScheme.alternating(55.0, period=2)
        first = [schedule(net, scheme, r) for r in range(10)]
        second = [schedule(net, scheme, r) for r in range(10)]
        assert [d.scheduled_ids for d in first] == [d.scheduled_ids for d in second]

    def test_scheme_validation(self):
        with pytest.raises(ValueError):
            SchedulingScheme("cell-interior")
        with pytest.raises(ValueError):
            SchedulingScheme("alternating", r_in=10.0, period=0)
        with pytest.raises(ValueError):
            SchedulingScheme("round-robin")


class TestDistributionValidation:
    def test_interior_count_histogram_total_variation(self):
        # Empirical interior-count law vs the binomial PMF at 1e5 draws.
        k, ratio, trials = 20, 0.5, 100000
        radii = sample_radii(k, R_CELL, derived_rng(17, "tv"), size=trials)
        counts = (radii <= ratio * R_CELL).sum(axis=1)
        hist = np.bincount(counts, minlength=k + 1) / trials
        pmf = np.array([analytics.k_in_pmf(k, ratio * R_CELL, R_CELL, j) for j in range(k + 1)])
        assert 0.5 * np.abs(hist - pmf).sum() < 0.01

    def test_max_distance_mean(self):
        k, trials = 10, 100000
        radii = sample_radii(k, R_CELL, derived_rng(17, "rmax"), size=trials)
        _, expected = analytics.max_distance_moments(k, R_CELL)
        assert radii.max(axis=1).mean() == pytest.approx(expected, rel=0.005)

    def test_fraction_exploited_monte_carlo(self):
        k, trials = 20, 100000
        radii = sample_radii(k, R_CELL, derived_rng(17, "frac"), size=trials)
        empirical = (radii <= 50.0).sum(axis=1).mean() / k
        assert empirical == pytest.approx(analytics.fraction_exploited(50.0, R_CELL), rel=0.01)


class TestTopologyExport:
    def test_csv_roundtrip(self):
        net = sample_topology(4, R_CELL, 21)
        text = topology_csv(net)
        lines = text.strip().split("\n")
        assert lines[0] == "device_id,radius_m,angle_rad"
        assert len(lines) == 5
        radius = float(lines[1].split(",")[1])
        assert radius == pytest.approx(net.radii[0], rel=1e-10)
