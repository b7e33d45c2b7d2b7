"""Log-distance path loss, link budgets, flat fading, TDD cell capacity."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

SPEED_OF_LIGHT = 3.0e8      # m/s, propagation convention used by all budgets
REFERENCE_DISTANCE_M = 1.0


@dataclass(frozen=True)
class LinkClassParams:
    """Link-budget parameter set for one radio technology and direction."""

    name: str
    carrier_hz: float
    alpha: float                 # path-loss exponent
    tx_power_dbm: float
    tx_gain_db: float
    rx_gain_db: float
    rx_sensitivity_dbm: float
    noise_floor_dbm: float       # recorded for completeness; decode is
                                 # threshold-based so this is not consumed
    fading: str = "none"         # "none" | "clarke20"


# Access link: base station 30 dBm / terminal 23 dBm, 3 dB antennas both
# ends, 700 MHz, exponent 2.2. Direct device links drop the antenna gains
# and use 2.1. Backhaul is 5 GHz ad hoc WiFi, exponent 2.0.
LINK_CLASSES: dict[str, LinkClassParams] = {
    "lte_dl": LinkClassParams(
        name="lte_dl", carrier_hz=700e6, alpha=2.2, tx_power_dbm=30.0,
        tx_gain_db=3.0, rx_gain_db=3.0, rx_sensitivity_dbm=-107.5,
        noise_floor_dbm=-104.5, fading="clarke20"),
    "lte_ul": LinkClassParams(
        name="lte_ul", carrier_hz=700e6, alpha=2.2, tx_power_dbm=23.0,
        tx_gain_db=3.0, rx_gain_db=3.0, rx_sensitivity_dbm=-123.4,
        noise_floor_dbm=-118.4, fading="clarke20"),
    "d2d": LinkClassParams(
        name="d2d", carrier_hz=700e6, alpha=2.1, tx_power_dbm=23.0,
        tx_gain_db=0.0, rx_gain_db=0.0, rx_sensitivity_dbm=-107.5,
        noise_floor_dbm=-174.0, fading="clarke20"),
    "wifi_backhaul": LinkClassParams(
        name="wifi_backhaul", carrier_hz=5e9, alpha=2.0, tx_power_dbm=23.0,
        tx_gain_db=3.0, rx_gain_db=3.0, rx_sensitivity_dbm=-85.0,
        noise_floor_dbm=-110.0, fading="none"),
}


def link_class(name: str, **overrides) -> LinkClassParams:
    """Fetch a default link class, optionally overriding fields."""
    params = LINK_CLASSES[name]
    return replace(params, **overrides) if overrides else params


def free_space_intercept_db(carrier_hz: float) -> float:
    """Path loss at the 1 m reference distance."""
    return 20.0 * math.log10(
        4.0 * math.pi * REFERENCE_DISTANCE_M * carrier_hz / SPEED_OF_LIGHT
    )


def path_loss_db(params: LinkClassParams, distance_m: float) -> float:
    """Log-distance loss: intercept + 10*alpha*log10(d / 1 m)."""
    if not math.isfinite(distance_m):
        raise ValueError(f"non-finite distance: {distance_m!r}")
    d = max(float(distance_m), REFERENCE_DISTANCE_M)
    return free_space_intercept_db(params.carrier_hz) + 10.0 * params.alpha * math.log10(d)


def rx_power_dbm(params: LinkClassParams, distance_m: float,
                 fading_db: float = 0.0) -> float:
    return (params.tx_power_dbm + params.tx_gain_db + params.rx_gain_db
            - path_loss_db(params, distance_m) + fading_db)


def link_up(params: LinkClassParams, distance_m: float,
            fading_db: float = 0.0) -> bool:
    """Decode threshold check; received power exactly at sensitivity is up."""
    return rx_power_dbm(params, distance_m, fading_db) >= params.rx_sensitivity_dbm


def link_budget_db(params: LinkClassParams) -> float:
    return (params.tx_power_dbm + params.tx_gain_db + params.rx_gain_db
            - params.rx_sensitivity_dbm)


def max_range_m(params: LinkClassParams) -> float:
    """Largest distance at which the budget still closes (no fading)."""
    headroom = link_budget_db(params) - free_space_intercept_db(params.carrier_hz)
    if headroom <= 0:
        return REFERENCE_DISTANCE_M
    return 10.0 ** (headroom / (10.0 * params.alpha))


def doppler_hz(speed_mps: float, carrier_hz: float) -> float:
    return speed_mps * carrier_hz / SPEED_OF_LIGHT


class FadingState:
    """Flat fading as a sum of 20 equal-power scattered paths.

    Each path gets a random arrival angle and phase drawn once from the
    provided generator; the envelope is Rayleigh-distributed with unit mean
    power. Zero Doppler degenerates to a constant (random) gain.
    """

    N_PATHS = 20

    def __init__(self, rng: np.random.Generator, doppler_hz: float):
        self.doppler_hz = float(doppler_hz)
        angles = rng.uniform(0.0, 2.0 * np.pi, self.N_PATHS)
        self.phases = rng.uniform(0.0, 2.0 * np.pi, self.N_PATHS)
        # per-path angular frequency of the phase rotation
        self.omegas = 2.0 * np.pi * self.doppler_hz * np.cos(angles)

    def complex_gain(self, t_s: float | np.ndarray):
        t = np.asarray(t_s, dtype=float)
        args = np.multiply.outer(t, self.omegas) + self.phases
        return (np.exp(1j * args).sum(axis=-1)) / math.sqrt(self.N_PATHS)

    def gain_db(self, t_s: float | np.ndarray):
        h = self.complex_gain(t_s)
        power = np.abs(h) ** 2
        return 10.0 * np.log10(np.maximum(power, 1e-30))


# -- TDD frame accounting ---------------------------------------------------

# Subframe patterns for the seven uplink/downlink configurations over one
# 10 ms frame. Configuration 1 splits data subframes evenly.
TDD_CONFIGS: dict[int, str] = {
    0: "DSUUUDSUUU",
    1: "DSUUDDSUUD",
    2: "DSUDDDSUDD",
    3: "DSUUUDDDDD",
    4: "DSUUDDDDDD",
    5: "DSUDDDDDDD",
    6: "DSUUUDSUUD",
}

SUBCARRIERS_PER_RB = 12
SYMBOLS_PER_SUBFRAME = 14
FRAMES_PER_SECOND = 100


@dataclass(frozen=True)
class CellConfig:
    """Per-cell radio resource configuration."""

    n_rb: int = 50                          # resource blocks (10 MHz)
    tdd_config: int = 1
    bits_per_symbol: int = 4                # 16-QAM
    code_rate: float = 1.0 / 3.0
    special_subframe_policy: str = "exclude"   # "exclude" | "count_as_dl"
    overhead_fraction: float = 0.0


def data_subframes_per_frame(cfg: CellConfig) -> tuple[int, int]:
    """(downlink, uplink) data subframes in one 10 ms frame."""
    pattern = TDD_CONFIGS[cfg.tdd_config]
    dl = pattern.count("D")
    ul = pattern.count("U")
    if cfg.special_subframe_policy == "count_as_dl":
        dl += pattern.count("S")
    elif cfg.special_subframe_policy != "exclude":
        raise ValueError(f"unknown special-subframe policy: {cfg.special_subframe_policy!r}")
    return dl, ul


def tdd_cell_capacity_bps(cfg: CellConfig, direction: str) -> float:
    """Shared cell capacity for one direction ("dl" or "ul")."""
    dl, ul = data_subframes_per_frame(cfg)
    subframes = {"dl": dl, "ul": ul}[direction]
    re_per_subframe = cfg.n_rb * SUBCARRIERS_PER_RB * SYMBOLS_PER_SUBFRAME
    re_per_second = re_per_subframe * subframes * FRAMES_PER_SECOND
    return re_per_second * cfg.bits_per_symbol * cfg.code_rate * (1.0 - cfg.overhead_fraction)
