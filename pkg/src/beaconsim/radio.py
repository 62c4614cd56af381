"""Statistical link abstraction: path loss, shadowing, fast fading, SINR,
sequence cross-correlation, and chi-squared detection probabilities.

All dB/dBm quantities convert to linear watts at these function boundaries;
the SINR sum itself is evaluated purely in watts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .kernels import PL_MODEL_LOG_DISTANCE, PL_MODEL_UMI

Position = tuple[float, float]

LOS_ALWAYS = "always_los"
LOS_DISTANCE = "distance_probabilistic"


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


@dataclass
class ChannelParams:
    carrier_frequency_hz: float = 3.5e9
    sigma_sf_los_db: float = 3.0
    sigma_sf_nlos_db: float = 4.0
    trp_height_m: float = 10.0
    ue_height_m: float = 1.5
    los_model: str = LOS_DISTANCE
    path_loss_model: str = "umi"
    log_distance_ref_db: float = 46.0
    log_distance_exponent: float = 3.0

    def __post_init__(self) -> None:
        if self.carrier_frequency_hz <= 0:
            raise ValueError("carrier_frequency_hz must be > 0")
        if self.sigma_sf_los_db < 0 or self.sigma_sf_nlos_db < 0:
            raise ValueError("shadow-fading sigmas must be >= 0")

    @property
    def model_code(self) -> int:
        return PL_MODEL_LOG_DISTANCE if self.path_loss_model == "log_distance" else PL_MODEL_UMI


@dataclass
class LinkState:
    """Per (transmitter, receiver) channel state, fixed for one drop."""

    los: bool = True
    shadow_gain_db: float = 0.0
    # one mean-1 Rayleigh power gain per subcarrier block (BeRB), redrawn
    # each beacon occasion
    fast_fading_power: np.ndarray = field(default_factory=lambda: np.ones(1))


@dataclass
class DetectionParams:
    n_antennas: int = 1
    search_window: int = 1
    threshold: float = 9.21034037197618   # P_FA = 1% for n_antennas=1, D=1
    sequence_length: int = 7
    beacon_range_m: float = 32.9
    noise_power_dbm: float = -72.74

    def __post_init__(self) -> None:
        if self.n_antennas < 1 or self.search_window < 1:
            raise ValueError("n_antennas and search_window must be >= 1")
        if self.threshold <= 0:
            raise ValueError("threshold must be > 0")
        if self.sequence_length < 1:
            raise ValueError("sequence_length must be >= 1")
        if self.beacon_range_m <= 0:
            raise ValueError("beacon_range_m must be > 0")

    @property
    def noise_w(self) -> float:
        return dbm_to_watts(self.noise_power_dbm)


@dataclass(frozen=True)
class SequenceId:
    root: int
    shift: int


@dataclass
class ActiveTransmission:
    entity: int
    position: Position
    power_per_subcarrier_w: float
    n_subcarriers: int
    berb: int
    seq: SequenceId


def thermal_noise_dbm(bandwidth_hz: float, noise_figure_db: float = 9.0,
                      temperature_k: float = 290.0) -> float:
    """kT*NF*B noise power in dBm over the given bandwidth."""
    k = 1.38e-23
    return 10.0 * math.log10(k * temperature_k * 1e3) + noise_figure_db \
        + 10.0 * math.log10(bandwidth_hz)


def los_probability(d2d_m: float) -> float:
    """Distance-based urban-microcell line-of-sight probability."""
    if d2d_m <= 0:
        return 1.0
    return min(18.0 / d2d_m, 1.0) * (1.0 - math.exp(-d2d_m / 36.0)) \
        + math.exp(-d2d_m / 36.0)


def distance_3d(tx: Position, rx: Position, h_tx: float, h_rx: float) -> float:
    dx = tx[0] - rx[0]
    dy = tx[1] - rx[1]
    return math.sqrt(dx * dx + dy * dy + (h_tx - h_rx) ** 2)


def path_loss_db(tx: Position, rx: Position, link: LinkState,
                 params: ChannelParams, h_tx: float | None = None,
                 h_rx: float | None = None) -> float:
    """Distance loss for the configured model plus the link's shadow gain.

    ``h_tx`` defaults to the UE height and ``h_rx`` to the TRP height.  The
    horizontal formula distance is floored at 1 m; exactly coincident
    positions are rejected as degenerate geometry.
    """
    if tuple(tx) == tuple(rx):
        raise ValueError("path loss undefined for zero distance")
    h_tx = params.ue_height_m if h_tx is None else h_tx
    h_rx = params.trp_height_m if h_rx is None else h_rx
    d2d = math.hypot(tx[0] - rx[0], tx[1] - rx[1])
    pl = _distance_loss_db(d2d, link.los, params, h_tx, h_rx)
    return pl - link.shadow_gain_db


def _distance_loss_db(d2d: float, los: bool, params: ChannelParams,
                      h_tx: float, h_rx: float) -> float:
    d3d = max(math.sqrt(d2d * d2d + (h_rx - h_tx) ** 2), 1.0)
    if params.model_code == PL_MODEL_LOG_DISTANCE:
        return params.log_distance_ref_db \
            + 10.0 * params.log_distance_exponent * math.log10(d3d)
    fc = params.carrier_frequency_hz / 1e9
    lg_fc = math.log10(fc)
    he_tx = max(h_tx - 1.0, 0.01)
    he_rx = max(h_rx - 1.0, 0.01)
    dbp = 4.0 * he_tx * he_rx * params.carrier_frequency_hz / 3.0e8
    if d3d < dbp:
        pl_los = 22.0 * math.log10(d3d) + 28.0 + 20.0 * lg_fc
    else:
        pl_los = 40.0 * math.log10(d3d) + 28.0 + 20.0 * lg_fc \
            - 9.0 * math.log10(dbp * dbp + (h_rx - h_tx) ** 2)
    if los:
        return pl_los
    h_ut = min(h_tx, h_rx)
    pl_nlos = 36.7 * math.log10(d3d) + 22.7 + 26.0 * lg_fc - 0.3 * (h_ut - 1.5)
    return max(pl_nlos, pl_los)


def expected_path_loss_db(d2d: float, params: ChannelParams,
                          h_tx: float | None = None,
                          h_rx: float | None = None) -> tuple[float, float]:
    """LoS-probability blend of the LoS/NLoS curves and the blended sigma.

    Deterministic in distance; used by the wrong-cell study so that a zero
    offset yields exactly identical links.
    """
    h_tx = params.ue_height_m if h_tx is None else h_tx
    h_rx = params.trp_height_m if h_rx is None else h_rx
    p = 1.0 if params.los_model == LOS_ALWAYS else los_probability(d2d)
    pl_los = _distance_loss_db(d2d, True, params, h_tx, h_rx)
    pl_nlos = _distance_loss_db(d2d, False, params, h_tx, h_rx)
    sigma = p * params.sigma_sf_los_db + (1.0 - p) * params.sigma_sf_nlos_db
    return p * pl_los + (1.0 - p) * pl_nlos, sigma


def cross_correlation(a: SequenceId, b: SequenceId, n_z: int) -> float:
    """Cross-correlation between two root/cyclic-shift sequence ids.

    Same root: 1 for identical shifts, 0 otherwise (orthogonal shifts).
    Different roots: 1/sqrt(n_z).
    """
    if n_z < 1:
        raise ValueError("n_z must be >= 1")
    if a.root == b.root:
        return 1.0 if a.shift == b.shift else 0.0
    return 1.0 / math.sqrt(n_z)


def sample_fast_fading(rng: np.random.Generator, shape) -> np.ndarray:
    """Mean-1 Rayleigh power gains |h|^2 (unit-mean exponential)."""
    return rng.exponential(1.0, shape)


@dataclass
class Receiver:
    """A receiving node: a TRP, or a UE listening for its group's beacon."""

    id: int
    position: Position
    height_m: float


def received_power_w(tx: ActiveTransmission, receiver: Receiver,
                     link: LinkState, channel: ChannelParams,
                     h_tx: float | None = None) -> float:
    """Received power of one transmission: per-subcarrier powers summed over
    the block, scaled by the large-scale gain and the block's |h|^2."""
    if tx.n_subcarriers < 1:
        raise ValueError("empty subcarrier set")
    loss = path_loss_db(tx.position, receiver.position, link, channel,
                        h_tx=h_tx, h_rx=receiver.height_m)
    g = db_to_linear(-loss)
    h2 = np.asarray(link.fast_fading_power, dtype=float)
    block = float(h2[tx.berb % len(h2)])
    total = 0.0
    for _ in range(tx.n_subcarriers):
        total += tx.power_per_subcarrier_w * g * block
    return total


def sinr(target: ActiveTransmission, receiver: Receiver,
         interferers: list[ActiveTransmission],
         links: dict[tuple[int, int], LinkState],
         det: DetectionParams, channel: ChannelParams,
         h_tx: float | None = None) -> float:
    """Linear SINR of ``target`` at ``receiver`` per the co-BeRB
    interference sum weighted by sequence cross-correlation.

    ``links`` maps (entity, receiver.id) to the drop's LinkState.  Callers
    pass only interferers sharing the target's BeRB and occasion; all powers
    are summed in linear watts.
    """
    signal = received_power_w(target, receiver,
                              links[(target.entity, receiver.id)], channel, h_tx)
    interference = 0.0
    for tx in interferers:
        rho = cross_correlation(target.seq, tx.seq, det.sequence_length)
        if rho == 0.0:
            continue
        interference += rho * received_power_w(
            tx, receiver, links[(tx.entity, receiver.id)], channel, h_tx)
    return signal / (det.noise_w + interference)


def chi2_cdf(x: float, dof: int) -> float:
    """Central chi-squared CDF (regularised lower incomplete gamma)."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if x < 0:
        raise ValueError("chi-squared CDF undefined for negative x")
    return float(special.gammainc(dof / 2.0, x / 2.0))


def miss_detection_prob(sinr_linear: float, det: DetectionParams,
                        distance_m: float) -> float:
    """Miss-detection probability for one beacon reception attempt.

    Beyond the beacon range detection is impossible and the probability is
    exactly 1.  Otherwise the non-coherent detector statistic gives
    ``F(lam, 2 Na)^(D-1) * F(lam / (1 + Nz * sinr), 2 Na)`` with central
    chi-squared CDFs.
    """
    if sinr_linear < 0:
        raise ValueError("sinr must be >= 0")
    if distance_m < 0:
        raise ValueError("distance must be >= 0")
    if distance_m > det.beacon_range_m:
        return 1.0
    dof = 2 * det.n_antennas
    first = chi2_cdf(det.threshold, dof) ** (det.search_window - 1)
    second = chi2_cdf(det.threshold / (1.0 + det.sequence_length * sinr_linear), dof)
    return first * second


def false_alarm_prob(det: DetectionParams) -> float:
    """Probability that noise-only input exceeds the threshold anywhere in
    the search window."""
    dof = 2 * det.n_antennas
    return 1.0 - chi2_cdf(det.threshold, dof) ** det.search_window


def calibrate_threshold(target_pfa: float, n_antennas: int = 1,
                        search_window: int = 1) -> float:
    """Invert the false-alarm relation by bisection to 1e-12 on P_FA."""
    if not 0.0 < target_pfa < 1.0:
        raise ValueError("target_pfa must be in (0, 1)")
    dof = 2 * n_antennas

    def pfa(lam: float) -> float:
        return 1.0 - chi2_cdf(lam, dof) ** search_window

    lo, hi = 0.0, 1.0
    while pfa(hi) > target_pfa:
        hi *= 2.0
        if hi > 1e9:
            raise RuntimeError("threshold calibration failed to bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if pfa(mid) > target_pfa:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def detect(sinr_linear: float, det: DetectionParams, distance_m: float,
           rng: np.random.Generator) -> bool:
    """Bernoulli detection outcome: True with probability 1 - P_MD."""
    p_md = miss_detection_prob(sinr_linear, det, distance_m)
    return bool(rng.random() < 1.0 - p_md)
