"""Closed-form analytics against independent numerical oracles.

The exponential integral is checked against adaptive quadrature of its
defining integral; distribution moments against symbolic/quadrature
results; latency and tradeoff identities against direct evaluation.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from airfed import analytics
from airfed.analytics import (
    ScenarioParams,
    SystemParams,
    TradeoffCurve,
    cutoff_for_ratio,
    exp_integral,
    expected_snr_all_inclusive,
    expected_snr_cell_interior,
    fraction_exploited,
    k_in_pmf,
    latency_baa,
    latency_digital,
    latency_reduction_ratio,
    latency_report,
    max_distance_moments,
    mqam_snr_factor,
    p_all_exploited,
    rate_digital_expected,
    receive_snr,
    reliability_quantity_curve,
    snr_gain,
    snr_truncation_curve,
    truncation_ratio,
)

# Reference deployment: 0.1 W budget, 1000 sub-channels, 100 m cell,
# alpha = 3, noise -80 dBm = 1e-11 W.
FIG_PARAMS = SystemParams(p0=0.1, m=1000, b=1e6, alpha=3.0, r_cell=100.0, g_th=0.2, n0=1e-11)


def quad_e1(x: float) -> float:
    """Independent oracle: adaptive quadrature of int_x^inf exp(-t)/t dt."""
    value, _ = integrate.quad(lambda t: math.exp(-t) / t, x, np.inf, limit=400)
    return value


class TestExpIntegral:
    # Frozen from the quadrature oracle above.
    ORACLE_VALUES = {
        0.1: 1.8229239584193715,
        0.5: 0.55977359477614785,
        1.0: 0.21938393439551238,
        2.0: 0.048900510708058224,
    }

    def test_matches_quadrature_oracle_live(self):
        for x in [0.01, 0.05, 0.1, 0.3, 0.5, 0.9, 1.0, 1.5, 2.0, 5.0, 10.0, 30.0]:
            assert abs(exp_integral(x) - quad_e1(x)) < 1e-10

    def test_matches_frozen_oracle_values(self):
        for x, expected in self.ORACLE_VALUES.items():
            assert abs(exp_integral(x) - expected) < 1e-10

    def test_tail_negligible(self):
        assert exp_integral(50.0) < 1e-20

    @pytest.mark.parametrize("x", [0.0, -1.0, -1e-9])
    def test_domain_error(self, x):
        with pytest.raises(ValueError):
            exp_integral(x)

    def test_strictly_decreasing_and_convex(self):
        xs = np.linspace(0.01, 10.0, 1000)
        values = np.array([exp_integral(float(x)) for x in xs])
        first = np.diff(values)
        assert np.all(first < 0)
        assert np.all(np.diff(first) > 0)


class TestTruncationRatio:
    def test_no_cutoff(self):
        assert truncation_ratio(0.0) == 0.0

    def test_half_at_log_two(self):
        assert truncation_ratio(math.log(2.0)) == pytest.approx(0.5, abs=1e-15)

    def test_unit_threshold(self):
        assert truncation_ratio(1.0) == pytest.approx(0.6321205588285577, abs=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            truncation_ratio(-0.1)

    def test_inverse_identity_on_open_interval(self):
        for zeta in np.linspace(1e-6, 1 - 1e-6, 500):
            assert abs(truncation_ratio(cutoff_for_ratio(float(zeta))) - zeta) < 1e-12


class TestReceiveSnr:
    def test_decreasing_in_distance(self):
        assert receive_snr(FIG_PARAMS, 100.0) < receive_snr(FIG_PARAMS, 50.0)

    def test_linear_in_power(self):
        doubled = SystemParams(
            p0=0.2, m=1000, b=1e6, alpha=3.0, r_cell=100.0, g_th=0.2, n0=1e-11
        )
        assert receive_snr(doubled, 80.0) == 2.0 * receive_snr(FIG_PARAMS, 80.0)

    def test_zero_threshold_collapses_with_warning(self):
        params = SystemParams(g_th=0.0)
        with pytest.warns(RuntimeWarning):
            assert receive_snr(params, 50.0) == 0.0

    def test_reference_point_curve_increasing(self):
        # 0.1 W, 1000 sub-channels, 100 m, -80 dBm: SNR rises monotonically
        # with the tolerated truncation ratio.
        curve = snr_truncation_curve(FIG_PARAMS, 100.0, np.arange(0.1, 0.91, 0.1))
        assert len(curve.points) == 9
        assert all(b > a for a, b in zip(curve.ys, curve.ys[1:]))

    def test_curve_roundtrip_matches_threshold_form(self):
        for g_th in [0.1, 0.5, 1.2]:
            zeta = truncation_ratio(g_th)
            curve = snr_truncation_curve(FIG_PARAMS, 100.0, [zeta])
            direct = receive_snr(FIG_PARAMS, 100.0, cutoff_for_ratio(zeta))
            assert curve.ys[0] == direct

    def test_unbounded_growth_near_full_truncation(self):
        low = snr_truncation_curve(FIG_PARAMS, 100.0, [0.5]).ys[0]
        high = snr_truncation_curve(FIG_PARAMS, 100.0, [1 - 1e-9]).ys[0]
        assert high > 1e6 * low

    @pytest.mark.parametrize("zeta", [0.0, 1.0, -0.2, 1.4])
    def test_grid_rejects_boundary(self, zeta):
        with pytest.raises(ValueError):
            snr_truncation_curve(FIG_PARAMS, 100.0, [zeta])


class TestTradeoffCurveType:
    def test_rejects_non_increasing_abscissae(self):
        with pytest.raises(ValueError):
            TradeoffCurve(((0.2, 1.0), (0.2, 2.0)))

    def test_rejects_unknown_labels(self):
        with pytest.raises(ValueError):
            TradeoffCurve(((0.1, 1.0),), x_label="bogus")


class TestInteriorFraction:
    def test_full_cell(self):
        assert fraction_exploited(100.0, 100.0) == 1.0

    def test_square_law(self):
        assert fraction_exploited(50.0, 100.0) == 0.25

    def test_domain_error(self):
        with pytest.raises(ValueError):
            fraction_exploited(101.0, 100.0)


class TestInteriorCountPmf:
    def test_degenerate_full_cell(self):
        assert k_in_pmf(7, 100.0, 100.0, 7) == 1.0
        assert k_in_pmf(7, 100.0, 100.0, 3) == 0.0

    def test_two_device_arithmetic(self):
        assert k_in_pmf(2, 50.0, 100.0, 1) == pytest.approx(0.375, abs=1e-12)

    @pytest.mark.parametrize("k_devices,ratio", [(5, 0.3), (20, 0.5), (200, 0.8), (200, 0.1)])
    def test_pmf_sums_to_one(self, k_devices, ratio):
        total = sum(k_in_pmf(k_devices, ratio * 100.0, 100.0, k) for k in range(k_devices + 1))
        assert abs(total - 1.0) < 1e-12

    @pytest.mark.parametrize("k_devices,ratio", [(5, 0.3), (20, 0.5), (50, 0.9)])
    def test_mean_identity_with_fraction(self, k_devices, ratio):
        r_in, r_cell = ratio * 100.0, 100.0
        mean = sum(k * k_in_pmf(k_devices, r_in, r_cell, k) for k in range(k_devices + 1))
        assert abs(mean / k_devices - fraction_exploited(r_in, r_cell)) < 1e-12

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            k_in_pmf(5, 50.0, 100.0, 6)


class TestMaxDistance:
    def test_pdf_normalized(self):
        for k in [1, 5, 20]:
            pdf, _ = max_distance_moments(k, 100.0)
            mass, _ = integrate.quad(pdf, 0.0, 100.0)
            assert abs(mass - 1.0) < 1e-10

    def test_single_device_mean_matches_symbolic_oracle(self):
        # One device: E[r] = int_0^R r * 2r/R^2 dr = (2/3) R.
        pdf, mean = max_distance_moments(1, 90.0)
        assert mean == pytest.approx(2.0 / 3.0 * 90.0, rel=1e-12)
        quad_mean, _ = integrate.quad(lambda r: r * pdf(r), 0.0, 90.0)
        assert quad_mean == pytest.approx(mean, rel=1e-10)

    def test_pdf_at_cell_edge(self):
        for k in [1, 3, 10]:
            pdf, _ = max_distance_moments(k, 100.0)
            assert pdf(100.0) == pytest.approx(2.0 * k / 100.0, rel=1e-12)

    def test_zero_outside_support(self):
        pdf, _ = max_distance_moments(4, 100.0)
        assert pdf(-1.0) == 0.0
        assert pdf(100.5) == 0.0


class TestExpectedSnr:
    def test_no_path_loss_limit(self):
        # alpha -> 0: the prefactor goes to 1 and the cell radius drops out.
        tiny_alpha = 1e-12
        p_small = SystemParams(alpha=tiny_alpha, r_cell=50.0)
        p_large = SystemParams(alpha=tiny_alpha, r_cell=400.0)
        snr_small = expected_snr_all_inclusive(p_small, 10)
        snr_large = expected_snr_all_inclusive(p_large, 10)
        assert snr_small == pytest.approx(snr_large, rel=1e-9)
        assert snr_small == pytest.approx(receive_snr(p_small, 50.0), rel=1e-9)

    def test_prefactor_arithmetic(self):
        ratio = expected_snr_all_inclusive(FIG_PARAMS, 200) / receive_snr(FIG_PARAMS, 100.0)
        assert ratio == pytest.approx(400.0 / 397.0, rel=1e-12)

    def test_convergence_error(self):
        with pytest.raises(ValueError, match="diverges"):
            expected_snr_all_inclusive(SystemParams(alpha=3.5), 2)
        with pytest.raises(ValueError, match="diverges"):
            expected_snr_all_inclusive(FIG_PARAMS, 1)

    def test_interior_degenerate_full_cell(self):
        # r_in = r_cell puts all binomial mass at k = K.
        for k in [5, 20, 200]:
            scenario = ScenarioParams(k_devices=k, r_in=100.0, n_cr=1, q_dim=1)
            _, c = expected_snr_cell_interior(FIG_PARAMS, scenario)
            assert c == pytest.approx(2.0 * k / (2.0 * k - 3.0), rel=1e-12)

    def test_interior_scaling_factor_bounds(self):
        # The [1, 4] band holds once the expected interior count is large
        # enough for rounds with < 2 interior devices to be negligible.
        grid = (
            [(200, 0.1 * i) for i in range(1, 10)] + [(200, 1.0)]
            + [(20, 0.1 * i) for i in range(3, 10)] + [(20, 1.0)]
            + [(10, 0.1 * i) for i in range(5, 10)] + [(10, 1.0)]
            + [(5, 0.1 * i) for i in range(5, 10)] + [(5, 1.0)]
        )
        for k, ratio in grid:
            scenario = ScenarioParams(k_devices=k, r_in=float(ratio) * 100.0, n_cr=1, q_dim=1)
            _, c = expected_snr_cell_interior(FIG_PARAMS, scenario)
            assert 1.0 <= c <= 4.0, (k, ratio, c)

    def test_interior_small_count_underflows_bound_with_warning(self):
        # Outside the large-count regime the dropped 0/1-device rounds pull
        # the factor below 1; the implementation warns instead of lying.
        for k, ratio in [(5, 0.1), (10, 0.3), (20, 0.2)]:
            scenario = ScenarioParams(k_devices=k, r_in=ratio * 100.0, n_cr=1, q_dim=1)
            with pytest.warns(RuntimeWarning):
                _, c = expected_snr_cell_interior(FIG_PARAMS, scenario)
            assert c < 1.0

    def test_interior_needs_two_devices(self):
        with pytest.raises(ValueError):
            expected_snr_cell_interior(FIG_PARAMS, ScenarioParams(k_devices=1, r_in=50.0, n_cr=1, q_dim=1))


class TestSnrGain:
    def test_identity_at_full_cell(self):
        scenario = ScenarioParams(k_devices=20, r_in=100.0, n_cr=1, q_dim=1)
        assert snr_gain(FIG_PARAMS, scenario) == 1.0

    def test_increasing_as_interior_shrinks(self):
        gains = [
            snr_gain(FIG_PARAMS, ScenarioParams(k_devices=20, r_in=r, n_cr=1, q_dim=1))
            for r in [100.0, 80.0, 60.0, 40.0]
        ]
        assert all(b > a for a, b in zip(gains, gains[1:]))

    def test_matches_power_law_form(self):
        for ratio in [0.4, 0.6, 0.9]:
            scenario = ScenarioParams(k_devices=50, r_in=ratio * 100.0, n_cr=1, q_dim=1)
            gain = snr_gain(FIG_PARAMS, scenario)
            _, c = expected_snr_cell_interior(FIG_PARAMS, scenario)
            a = (2 * 50 - 3.0) / (2 * 50) * c
            assert gain == pytest.approx(a * (1.0 / ratio) ** 3, rel=1e-12)


class TestReliabilityQuantityCurve:
    def test_unit_gain_at_full_data(self):
        curve = reliability_quantity_curve(FIG_PARAMS, 20, [0.5, 1.0])
        assert curve.ys[-1] == 1.0

    def test_larger_alpha_costs_more(self):
        f_grid = np.arange(0.1, 0.91, 0.1)
        k = 200
        curve3 = reliability_quantity_curve(SystemParams(alpha=3.0), k, f_grid)
        curve4 = reliability_quantity_curve(SystemParams(alpha=4.0), k, f_grid)
        assert all(y4 > y3 for y3, y4 in zip(curve3.ys, curve4.ys))

    def test_consistent_with_snr_gain(self):
        for f_dat in [0.2, 0.5, 0.8]:
            curve = reliability_quantity_curve(FIG_PARAMS, 30, [f_dat])
            scenario = ScenarioParams(
                k_devices=30, r_in=100.0 * math.sqrt(f_dat), n_cr=1, q_dim=1
            )
            assert abs(curve.ys[0] - snr_gain(FIG_PARAMS, scenario)) < 1e-9

    def test_rejects_nonpositive_fraction(self):
        with pytest.raises(ValueError):
            reliability_quantity_curve(FIG_PARAMS, 20, [0.0])


class TestEverScheduledProbability:
    def test_certain_interior(self):
        exact, approx = p_all_exploited(17, 9, 1.0)
        assert exact == 1.0
        assert approx == 1.0

    def test_single_device_single_round(self):
        exact, _ = p_all_exploited(1, 1, 0.37)
        assert exact == pytest.approx(0.37, rel=1e-12)

    def test_approximation_accuracy(self):
        # 200 devices, interior probability 0.25, 31 rounds: the linear
        # approximation sits within 1e-3 of the exact product form.
        exact, approx = p_all_exploited(200, 31, 0.25)
        assert 200 * 0.75**31 < 0.03
        assert abs(exact - approx) < 1e-3
        assert exact == pytest.approx(0.9735665376730876, rel=1e-12)

    def test_nondecreasing_in_rounds(self):
        values = [p_all_exploited(50, n, 0.2)[0] for n in range(1, 40)]
        assert all(b >= a for a, b in zip(values, values[1:]))


class TestLatency:
    SCENARIO = ScenarioParams(k_devices=200, r_in=50.0, n_cr=50, q_dim=582026)

    def test_analog_one_symbol_block(self):
        assert latency_baa(1000, FIG_PARAMS) == FIG_PARAMS.t_s

    def test_analog_padding_rounds_up(self):
        # 582,026 parameters over 1000 sub-channels need 583 OFDM symbols.
        assert latency_baa(582026, FIG_PARAMS) == 583 * FIG_PARAMS.t_s

    def test_analog_independent_of_device_count(self):
        # The signature takes no device count; the same q gives the same
        # latency no matter the scenario population.
        assert latency_baa(10000, FIG_PARAMS) == latency_baa(10000, FIG_PARAMS)

    def test_digital_increasing_in_distance(self):
        near = latency_digital(FIG_PARAMS, self.SCENARIO, 50.0)
        far = latency_digital(FIG_PARAMS, self.SCENARIO, 100.0)
        assert far > near

    def test_digital_linear_in_quant_bits(self):
        p8 = SystemParams(q_bits=8)
        p16 = SystemParams(q_bits=16)
        assert latency_digital(p16, self.SCENARIO, 50.0) == pytest.approx(
            2.0 * latency_digital(p8, self.SCENARIO, 50.0), rel=1e-12
        )

    def test_digital_approximately_linear_in_devices(self):
        for k in [50, 100, 200, 500]:
            t1 = latency_digital(FIG_PARAMS, ScenarioParams(k, 50.0, 50, 582026), 100.0)
            t2 = latency_digital(FIG_PARAMS, ScenarioParams(2 * k, 50.0, 50, 582026), 100.0)
            assert 1.6 <= t2 / t1 <= 2.0

    def test_ratio_linear_in_quant_bits(self):
        p8 = SystemParams(q_bits=8)
        p16 = SystemParams(q_bits=16)
        r8 = latency_reduction_ratio(p8, self.SCENARIO, 50.0)
        r16 = latency_reduction_ratio(p16, self.SCENARIO, 50.0)
        assert r16 == pytest.approx(2.0 * r8, rel=1e-12)

    def test_ratio_matches_quotient_when_q_divides(self):
        scenario = ScenarioParams(k_devices=100, r_in=50.0, n_cr=50, q_dim=5000)
        quotient = latency_digital(FIG_PARAMS, scenario, 70.0) / latency_baa(5000, FIG_PARAMS)
        closed = latency_reduction_ratio(FIG_PARAMS, scenario, 70.0)
        assert abs(quotient - closed) / closed < 1e-9

    def test_ratio_scaling_law(self):
        # gamma * log2(K) / K drifts by < 25% across K = 64, 256, 1024.
        values = []
        for k in [64, 256, 1024]:
            scenario = ScenarioParams(k_devices=k, r_in=50.0, n_cr=50, q_dim=582026)
            gamma = latency_reduction_ratio(SystemParams(g_th=0.1), scenario, 100.0)
            values.append(gamma * math.log2(k) / k)
        assert (max(values) - min(values)) / min(values) < 0.25

    def test_ratio_in_reported_band(self):
        # Reference experiment parameters: Q = 16, BER = 1e-3, M = 1000,
        # P0 = 0.1 W, alpha = 3, -80 dBm noise, interior radius half the
        # cell: the analog advantage spans roughly 10x to 1000x.
        for g_th in [0.1, 0.2, 0.5]:
            params = SystemParams(g_th=g_th)
            for k in [10, 20, 50, 100, 200]:
                scenario = ScenarioParams(k_devices=k, r_in=50.0, n_cr=50, q_dim=582026)
                gamma = latency_reduction_ratio(params, scenario, 50.0)
                assert 10.0 <= gamma <= 1000.0, (g_th, k, gamma)

    def test_ratio_increases_as_ber_drops(self):
        ratios = [
            latency_reduction_ratio(SystemParams(ber=ber), self.SCENARIO, 50.0)
            for ber in [1e-2, 1e-3, 1e-4, 1e-5]
        ]
        assert all(b > a for a, b in zip(ratios, ratios[1:]))

    def test_report_bundles_all_three(self):
        report = latency_report(FIG_PARAMS, self.SCENARIO, 50.0)
        assert report.t_analog_s == latency_baa(582026, FIG_PARAMS)
        assert report.t_digital_s == latency_digital(FIG_PARAMS, self.SCENARIO, 50.0)
        assert report.reduction_ratio == latency_reduction_ratio(FIG_PARAMS, self.SCENARIO, 50.0)


class TestDigitalRate:
    def test_vanishes_under_aggressive_cutoff(self):
        gentle = rate_digital_expected(SystemParams(g_th=0.2), 20, 80.0)
        harsh = rate_digital_expected(SystemParams(g_th=50.0), 20, 80.0)
        assert harsh < gentle * 1e-15

    def test_decreasing_in_distance(self):
        rates = [rate_digital_expected(FIG_PARAMS, 20, r) for r in [20.0, 50.0, 90.0]]
        assert all(b < a for a, b in zip(rates, rates[1:]))

    def test_mqam_factor_value(self):
        # -1.5 / ln(5 * 1e-3), direct arithmetic.
        assert mqam_snr_factor(1e-3) == pytest.approx(0.2831087487266323, rel=1e-12)

    @pytest.mark.parametrize("ber", [0.2, 0.5, 0.999])
    def test_ber_bound_enforced(self, ber):
        with pytest.raises(ValueError):
            mqam_snr_factor(ber)
        with pytest.raises(ValueError):
            rate_digital_expected(SystemParams(ber=ber), 20, 50.0)

    def test_expected_rate_matches_instantaneous_mean(self):
        # Simulation oracle: average the cutoff-gated instantaneous rate
        # over Rayleigh gain draws and compare with the closed form.
        params = FIG_PARAMS
        k, r_k = 20, 60.0
        rng = np.random.default_rng(2024)
        gains = rng.exponential(1.0, size=100000)
        snr = k * params.p0 / (params.m * r_k**params.alpha * exp_integral(params.g_th)) / params.n0
        per_channel = np.where(
            gains >= params.g_th,
            params.b_sub * np.log2(1.0 + mqam_snr_factor(params.ber) * snr),
            0.0,
        )
        empirical = (params.m / k) * per_channel.mean()
        assert empirical == pytest.approx(rate_digital_expected(params, k, r_k), rel=0.01)


class TestSystemParamsInvariants:
    def test_symbol_duration_times_bandwidth(self):
        for m, b in [(1000, 1e6), (64, 20e6), (1200, 30.72e6)]:
            params = SystemParams(m=m, b=b)
            assert params.t_s * params.b == pytest.approx(m, rel=1e-12)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"p0": 0.0},
            {"m": 0},
            {"alpha": -1.0},
            {"r_cell": 0.0},
            {"g_th": -0.5},
            {"n0": 0.0},
            {"ber": 0.0},
            {"ber": 1.0},
        ],
    )
    def test_invalid_parameters_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SystemParams(**kwargs)

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            ScenarioParams(k_devices=0, r_in=10.0, n_cr=1, q_dim=1)
        with pytest.raises(ValueError):
            ScenarioParams(k_devices=1, r_in=-1.0, n_cr=1, q_dim=1)
