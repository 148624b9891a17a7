"""Closed-form analytics for over-the-air model aggregation.

Pure, deterministic evaluation of every quantity the simulator is checked
against: the upper exponential integral driving truncated channel inversion,
the receive-SNR/truncation-ratio tradeoff, scheduling statistics over a
uniform disk topology, the SNR-gain/data-fraction tradeoff of cell-interior
scheduling, and per-round latency of analog versus digital (OFDMA)
aggregation.

All functions are pure; there is no shared mutable state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SystemParams",
    "ScenarioParams",
    "TradeoffCurve",
    "LatencyReport",
    "exp_integral",
    "truncation_ratio",
    "cutoff_for_ratio",
    "aligned_receive_power",
    "receive_snr",
    "snr_truncation_curve",
    "fraction_exploited",
    "k_in_pmf",
    "max_distance_moments",
    "expected_snr_all_inclusive",
    "expected_snr_cell_interior",
    "snr_gain",
    "reliability_quantity_curve",
    "p_all_exploited",
    "latency_baa",
    "mqam_snr_factor",
    "rate_digital_expected",
    "latency_digital",
    "latency_reduction_ratio",
    "latency_report",
]

_EULER_GAMMA = 0.5772156649015328606

# Axis labels allowed on TradeoffCurve
AXIS_LABELS = ("truncation-ratio", "snr-linear", "snr-db", "data-fraction", "gain")


@dataclass(frozen=True)
class SystemParams:
    """Physical-layer constants shared by the analytics and the simulator.

    Attributes:
        p0: per-device average transmit power budget (watts).
        m: number of OFDM sub-channels.
        b: total bandwidth (Hz); sub-carrier spacing is b/m.
        alpha: path-loss exponent (typically 2.5 to 4).
        r_cell: cell radius (meters).
        g_th: power-cutoff threshold on the sub-channel gain (dimensionless).
        n0: noise power (watts).  Set n0 = 1.0 to work in noise-normalized
            units; CLI configs ingest it from dBm.
        q_bits: quantization resolution of the digital baseline (bits/param).
        ber: target bit error rate of the digital baseline's adaptive MQAM.
    """

    p0: float = 0.1
    m: int = 1000
    b: float = 1e6
    alpha: float = 3.0
    r_cell: float = 100.0
    g_th: float = 0.2
    n0: float = 1e-11
    q_bits: int = 16
    ber: float = 1e-3

    def __post_init__(self):
        if self.p0 <= 0:
            raise ValueError(f"p0 must be positive, got {self.p0}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.b <= 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.r_cell <= 0:
            raise ValueError(f"r_cell must be positive, got {self.r_cell}")
        if self.g_th < 0:
            raise ValueError(f"g_th must be >= 0, got {self.g_th}")
        if self.n0 <= 0:
            raise ValueError(f"n0 must be positive, got {self.n0}")
        if self.q_bits < 1:
            raise ValueError(f"q_bits must be >= 1, got {self.q_bits}")
        if not 0.0 < self.ber < 1.0:
            raise ValueError(f"ber must lie in (0, 1), got {self.ber}")

    @property
    def t_s(self) -> float:
        """OFDM symbol duration, the inverse of the sub-carrier spacing."""
        return self.m / self.b

    @property
    def b_sub(self) -> float:
        """Sub-carrier spacing b/m (Hz)."""
        return self.b / self.m


@dataclass(frozen=True)
class ScenarioParams:
    """Deployment scenario: device count, interior radius, round budget.

    r_in is the cell-interior radius in meters; q_dim the model dimension.
    """

    k_devices: int
    r_in: float
    n_cr: int
    q_dim: int

    def __post_init__(self):
        if self.k_devices < 1:
            raise ValueError(f"k_devices must be >= 1, got {self.k_devices}")
        if self.r_in <= 0:
            raise ValueError(f"r_in must be positive, got {self.r_in}")
        if self.n_cr < 1:
            raise ValueError(f"n_cr must be >= 1, got {self.n_cr}")
        if self.q_dim < 1:
            raise ValueError(f"q_dim must be >= 1, got {self.q_dim}")


@dataclass(frozen=True)
class TradeoffCurve:
    """Ordered (abscissa, ordinate) pairs with labelled axes."""

    points: tuple
    x_label: str = "truncation-ratio"
    y_label: str = "snr-linear"

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((float(x), float(y)) for x, y in self.points))
        xs = [x for x, _ in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("curve abscissae must be strictly increasing")
        for label in (self.x_label, self.y_label):
            if label not in AXIS_LABELS:
                raise ValueError(f"unknown axis label {label!r}; expected one of {AXIS_LABELS}")

    @property
    def xs(self):
        return tuple(x for x, _ in self.points)

    @property
    def ys(self):
        return tuple(y for _, y in self.points)


@dataclass(frozen=True)
class LatencyReport:
    """Per-round communication latency of both aggregation schemes."""

    t_analog_s: float
    t_digital_s: float
    reduction_ratio: float


# ---------------------------------------------------------------------------
# Special function
# ---------------------------------------------------------------------------

def exp_integral(x: float) -> float:
    """Upper exponential integral E1(x) = int_x^inf exp(-t)/t dt.

    Power series for x < 1, modified-Lentz continued fraction for x >= 1;
    absolute error below 1e-10 on (0, inf).

    Raises:
        ValueError: if x <= 0 (the integral diverges at the origin).
    """
    x = float(x)
    if x <= 0.0:
        raise ValueError(f"exp_integral requires x > 0, got {x}")
    if x < 1.0:
        # E1(x) = -gamma - ln x + sum_{k>=1} (-1)^(k+1) x^k / (k * k!)
        total = -_EULER_GAMMA - math.log(x)
        term = 1.0
        for k in range(1, 60):
            term *= -x / k
            contrib = -term / k
            total += contrib
            if abs(contrib) < 1e-18 * max(abs(total), 1e-300):
                break
        return total
    # Continued fraction E1(x) = e^-x / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 200):
        a = -float(i * i)
        b += 2.0
        d = a * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + a / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h * math.exp(-x)


# ---------------------------------------------------------------------------
# Truncated channel inversion: SNR / truncation tradeoff
# ---------------------------------------------------------------------------

def truncation_ratio(g_th: float) -> float:
    """Expected fraction of update entries lost to sub-channel cutoff.

    Equals the probability that a unit-mean exponential channel gain falls
    below the cutoff threshold: 1 - exp(-g_th).
    """
    if g_th < 0:
        raise ValueError(f"g_th must be >= 0, got {g_th}")
    return -math.expm1(-g_th)


def cutoff_for_ratio(zeta: float) -> float:
    """Cutoff threshold achieving truncation ratio zeta; inverse of
    :func:`truncation_ratio` on [0, 1)."""
    if not 0.0 <= zeta < 1.0:
        raise ValueError(f"zeta must lie in [0, 1), got {zeta}")
    return -math.log1p(-zeta)


def aligned_receive_power(params: SystemParams, r_max: float, g_th: float | None = None) -> float:
    """Aligned per-sub-channel receive power rho0 (watts).

    This is the common amplitude-squared at which every scheduled device's
    symbols arrive when the furthest device (distance r_max) transmits at
    its full power budget under truncated channel inversion.

    Returns 0.0 with a warning when g_th == 0: full inversion of a Rayleigh
    channel has infinite expected power cost, so the feasible aligned power
    collapses.
    """
    if r_max <= 0:
        raise ValueError(f"r_max must be positive, got {r_max}")
    g = params.g_th if g_th is None else g_th
    if g == 0.0:
        warnings.warn(
            "g_th = 0: expected inversion power diverges, aligned receive power is 0",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0.0
    return params.p0 / (params.m * r_max**params.alpha * exp_integral(g))


def receive_snr(params: SystemParams, r_max: float, g_th: float | None = None) -> float:
    """Receive SNR (linear) of the aligned aggregation signal: rho0 / n0."""
    return aligned_receive_power(params, r_max, g_th) / params.n0


def snr_truncation_curve(params: SystemParams, r_max: float, zeta_grid) -> TradeoffCurve:
    """Receive SNR as a function of the truncation ratio.

    Each grid point zeta in (0, 1) is mapped through the cutoff threshold
    g = -ln(1 - zeta); the resulting curve is strictly increasing in zeta.
    """
    points = []
    for zeta in zeta_grid:
        if not 0.0 < zeta < 1.0:
            raise ValueError(f"zeta grid values must lie strictly in (0, 1), got {zeta}")
        points.append((float(zeta), receive_snr(params, r_max, cutoff_for_ratio(zeta))))
    return TradeoffCurve(tuple(points), x_label="truncation-ratio", y_label="snr-linear")


# ---------------------------------------------------------------------------
# Disk-topology scheduling statistics
# ---------------------------------------------------------------------------

def fraction_exploited(r_in: float, r_cell: float) -> float:
    """Expected fraction of data used under cell-interior scheduling.

    Devices are uniform on the disk, so the interior probability, and with
    equal shards the expected data fraction, is (r_in / r_cell)^2.
    """
    if r_in <= 0:
        raise ValueError(f"r_in must be positive, got {r_in}")
    if r_in > r_cell:
        raise ValueError(f"r_in must not exceed r_cell ({r_in} > {r_cell})")
    return (r_in / r_cell) ** 2


def _binom_pmf(n: int, k: int, p: float) -> float:
    if p <= 0.0:
        return 1.0 if k == 0 else 0.0
    if p >= 1.0:
        return 1.0 if k == n else 0.0
    log_pmf = (
        math.lgamma(n + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 1)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )
    return math.exp(log_pmf)


def k_in_pmf(k_devices: int, r_in: float, r_cell: float, k: int) -> float:
    """Probability that exactly k of k_devices fall inside radius r_in.

    The interior count is Binomial(k_devices, (r_in/r_cell)^2).
    """
    if not 0 <= k <= k_devices:
        raise ValueError(f"k must lie in [0, {k_devices}], got {k}")
    p = fraction_exploited(r_in, r_cell)
    return _binom_pmf(k_devices, k, p)


def max_distance_moments(k_devices: int, r_cell: float):
    """Distribution of the furthest device's distance from the server.

    Returns (pdf, mean): the density f(r) = 2K r^(2K-1) / R^(2K) on [0, R]
    (zero outside) and its mean 2K/(2K+1) * R.
    """
    if k_devices < 1:
        raise ValueError(f"k_devices must be >= 1, got {k_devices}")
    if r_cell <= 0:
        raise ValueError(f"r_cell must be positive, got {r_cell}")
    two_k = 2.0 * k_devices

    def pdf(r):
        r = np.asarray(r, dtype=float)
        inside = (r >= 0.0) & (r <= r_cell)
        safe_r = np.where(inside, r, 0.0)
        out = np.where(inside, two_k / r_cell * (safe_r / r_cell) ** (two_k - 1.0), 0.0)
        if out.ndim == 0:
            return float(out)
        return out

    mean = two_k / (two_k + 1.0) * r_cell
    return pdf, mean


def _require_convergent(k_devices: int, alpha: float) -> None:
    if 2.0 * k_devices - alpha - 1.0 < 0.0:
        raise ValueError(
            "expected receive SNR diverges: the furthest-device moment needs "
            f"2*k_devices - alpha - 1 >= 0 (k_devices={k_devices}, alpha={alpha})"
        )


def expected_snr_all_inclusive(params: SystemParams, k_devices: int) -> float:
    """Expected receive SNR when every device in the cell is scheduled.

    Averages rho0/n0 over the furthest-device distance: the prefactor
    2K/(2K - alpha) applied at the cell radius.
    """
    _require_convergent(k_devices, params.alpha)
    prefactor = 2.0 * k_devices / (2.0 * k_devices - params.alpha)
    return prefactor * receive_snr(params, params.r_cell)


def _interior_scaling_factor(k_devices: int, p_in: float, alpha: float) -> float:
    """Binomial-weighted sum of per-count SNR prefactors for interior scheduling.

    Terms run over interior counts k with convergent conditional means
    (2k > alpha); counts 0 and 1 carry no aggregation and are dropped, which
    makes the factor an under-estimate when k_devices * p_in is small.
    """
    k_start = max(2, math.floor(alpha / 2.0) + 1)
    while 2.0 * k_start <= alpha:
        k_start += 1
    total = 0.0
    for k in range(k_start, k_devices + 1):
        total += 2.0 * k / (2.0 * k - alpha) * _binom_pmf(k_devices, k, p_in)
    return total


def expected_snr_cell_interior(params: SystemParams, scenario: ScenarioParams):
    """Expected receive SNR under cell-interior scheduling.

    Returns (snr, c) where snr = c * p0 / (m * r_in^alpha * E1(g_th)) / n0
    and c is the bounded scaling factor obtained by weighting conditional
    expectations with the binomial law of the interior count.

    For alpha = 3 the factor satisfies 1 <= c <= 4 whenever the expected
    interior count is not too small; outside that regime a warning is
    issued (c sinks below 1 because rounds with fewer than two interior
    devices contribute nothing).
    """
    if scenario.k_devices < 2:
        raise ValueError("cell-interior expectation needs k_devices >= 2")
    if scenario.r_in > params.r_cell:
        raise ValueError(f"r_in must not exceed r_cell ({scenario.r_in} > {params.r_cell})")
    p_in = fraction_exploited(scenario.r_in, params.r_cell)
    c = _interior_scaling_factor(scenario.k_devices, p_in, params.alpha)
    if params.alpha == 3.0 and not 1.0 <= c <= 4.0:
        warnings.warn(
            f"interior scaling factor c = {c:.6g} outside [1, 4]: expected interior "
            f"count {scenario.k_devices * p_in:.3g} is too small for the bound",
            RuntimeWarning,
            stacklevel=2,
        )
    snr = c * receive_snr(params, scenario.r_in)
    return snr, c


def snr_gain(params: SystemParams, scenario: ScenarioParams) -> float:
    """Receive-SNR gain of cell-interior over all-inclusive scheduling."""
    interior, _ = expected_snr_cell_interior(params, scenario)
    return interior / expected_snr_all_inclusive(params, scenario.k_devices)


def reliability_quantity_curve(params: SystemParams, k_devices: int, f_dat_grid) -> TradeoffCurve:
    """SNR gain versus fraction of exploited data.

    Each data fraction F in (0, 1] corresponds to the interior radius
    r_in = r_cell * sqrt(F); the gain follows a (1/F)^(alpha/2) power law
    up to a bounded factor, and equals 1 at F = 1.
    """
    points = []
    for f_dat in f_dat_grid:
        if not 0.0 < f_dat <= 1.0:
            raise ValueError(f"data fractions must lie in (0, 1], got {f_dat}")
        scenario = ScenarioParams(
            k_devices=k_devices,
            r_in=params.r_cell * math.sqrt(f_dat),
            n_cr=1,
            q_dim=1,
        )
        points.append((float(f_dat), snr_gain(params, scenario)))
    return TradeoffCurve(tuple(points), x_label="data-fraction", y_label="gain")


def p_all_exploited(k_devices: int, n_cr: int, p_in: float):
    """Probability that every device's data enters training at least once.

    Under i.i.d. per-round positions each device is ever-interior with
    probability 1 - (1 - p_in)^n_cr.  Returns (exact, approx) where the
    approximation 1 - K (1 - p_in)^n_cr is accurate for large n_cr.
    """
    if not 0.0 <= p_in <= 1.0:
        raise ValueError(f"p_in must lie in [0, 1], got {p_in}")
    if n_cr < 1:
        raise ValueError(f"n_cr must be >= 1, got {n_cr}")
    if k_devices < 1:
        raise ValueError(f"k_devices must be >= 1, got {k_devices}")
    miss = (1.0 - p_in) ** n_cr
    exact = math.exp(k_devices * math.log1p(-miss)) if miss < 1.0 else 0.0
    approx = 1.0 - k_devices * miss
    return exact, approx


# ---------------------------------------------------------------------------
# Latency of analog versus digital aggregation
# ---------------------------------------------------------------------------

def latency_baa(q_dim: int, params: SystemParams) -> float:
    """Per-round latency of analog aggregation (seconds).

    One OFDM symbol carries m parameters from every device simultaneously,
    so the round takes ceil(q/m) symbols regardless of the device count and
    of the channel realizations.  Updates shorter than a whole number of
    symbols are zero-padded.
    """
    if q_dim < 1:
        raise ValueError(f"q_dim must be >= 1, got {q_dim}")
    return math.ceil(q_dim / params.m) * params.t_s


def mqam_snr_factor(ber: float) -> float:
    """SNR scaling -1.5 / ln(5 ber) of rate-adaptive MQAM at a target BER.

    The fit requires ln(5 ber) < 0, i.e. ber < 0.2.
    """
    if not 0.0 < ber < 0.2:
        raise ValueError(f"ber must lie in (0, 0.2) for the MQAM rate fit, got {ber}")
    return -1.5 / math.log(5.0 * ber)


def _digital_device_snr(params: SystemParams, k_devices: int, r: float) -> float:
    # Per-device OFDMA SNR: the device spends its whole budget on m/k
    # sub-channels, scaling the per-sub-channel power by k.
    if params.g_th <= 0:
        raise ValueError("digital rate model requires g_th > 0")
    return k_devices * params.p0 / (params.m * r**params.alpha * exp_integral(params.g_th)) / params.n0


def rate_digital_expected(params: SystemParams, k_devices: int, r_k: float) -> float:
    """Expected uplink rate (bits/s) of one device in the OFDMA baseline.

    The device holds m/k sub-channels (kept real-valued), each delivering
    log2(1 + factor * snr) bits per symbol when not cut off; the cutoff
    survives with probability exp(-g_th).
    """
    if k_devices < 1:
        raise ValueError(f"k_devices must be >= 1, got {k_devices}")
    if r_k <= 0:
        raise ValueError(f"r_k must be positive, got {r_k}")
    snr = _digital_device_snr(params, k_devices, r_k)
    m_k = params.m / k_devices
    return m_k * params.b_sub * math.log2(1.0 + mqam_snr_factor(params.ber) * snr) * math.exp(-params.g_th)


def latency_digital(params: SystemParams, scenario: ScenarioParams, r_max: float) -> float:
    """Expected per-round latency of the digital OFDMA baseline (seconds).

    Aggregation waits for the slowest device, so the round is pinned by the
    furthest one: k * q * Q / (m * log2(1 + factor * snr(r_max)) * e^-g_th)
    OFDM symbols.
    """
    if r_max <= 0:
        raise ValueError(f"r_max must be positive, got {r_max}")
    snr = _digital_device_snr(params, scenario.k_devices, r_max)
    denom = params.m * math.log2(1.0 + mqam_snr_factor(params.ber) * snr) * math.exp(-params.g_th)
    return scenario.k_devices * scenario.q_dim * params.q_bits / denom * params.t_s


def latency_reduction_ratio(params: SystemParams, scenario: ScenarioParams, r_max: float) -> float:
    """Latency ratio digital/analog in closed form.

    Equals k * Q / (log2(1 + factor * snr(r_max)) * e^-g_th); matches the
    quotient of the two latency functions whenever q is a multiple of m.
    """
    snr = _digital_device_snr(params, scenario.k_devices, r_max)
    denom = math.log2(1.0 + mqam_snr_factor(params.ber) * snr) * math.exp(-params.g_th)
    return scenario.k_devices * params.q_bits / denom


def latency_report(params: SystemParams, scenario: ScenarioParams, r_max: float) -> LatencyReport:
    """Analog and digital per-round latency plus their closed-form ratio."""
    return LatencyReport(
        t_analog_s=latency_baa(scenario.q_dim, params),
        t_digital_s=latency_digital(params, scenario, r_max),
        reduction_ratio=latency_reduction_ratio(params, scenario, r_max),
    )
