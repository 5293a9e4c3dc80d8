"""LoRa physical-layer helpers: airtime, path loss, link budget, energy, capture."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .bandit import ActionConfig, ConfigError

SFS = tuple(range(7, 13))

DEFAULT_SENSITIVITY_DBM = {7: -123.0, 8: -126.0, 9: -129.0, 10: -132.0, 11: -134.5, 12: -137.0}
"""Receiver sensitivity at 125 kHz, per spreading factor."""

# symbol duration above which low-data-rate optimisation is switched on
LDRO_SYMBOL_MS = 16.0


@dataclass(frozen=True)
class RadioConfig:
    bandwidth_hz: int = 125_000
    coding_rate_num: int = 1
    preamble_symbols: int = 8
    explicit_header: bool = True
    crc_on: bool = True
    # None -> automatic (on when the symbol lasts at least 16 ms)
    low_data_rate_optimize: bool | None = None

    def __post_init__(self) -> None:
        if self.bandwidth_hz not in (125_000, 250_000, 500_000):
            raise ConfigError(f"bandwidth_hz must be 125000, 250000 or 500000, got {self.bandwidth_hz}")
        if self.coding_rate_num not in (1, 2, 3, 4):
            raise ConfigError(f"coding_rate_num must be in 1..4, got {self.coding_rate_num}")
        if self.preamble_symbols < 0:
            raise ConfigError("preamble_symbols must be >= 0")

    def symbol_ms(self, sf: int) -> float:
        return (2**sf) / self.bandwidth_hz * 1000.0

    def ldro(self, sf: int) -> bool:
        if self.low_data_rate_optimize is None:
            return self.symbol_ms(sf) >= LDRO_SYMBOL_MS
        return self.low_data_rate_optimize


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance model with optional log-normal shadowing."""

    reference_distance_m: float = 40.0
    loss_at_reference_db: float = 127.41
    exponent: float = 2.08
    shadowing_sigma_db: float = 0.0

    def __post_init__(self) -> None:
        if self.reference_distance_m <= 0:
            raise ConfigError("reference_distance_m must be > 0")
        if self.exponent <= 0:
            raise ConfigError("exponent must be > 0")
        if self.shadowing_sigma_db < 0:
            raise ConfigError("shadowing_sigma_db must be >= 0")


def _default_inter_sf() -> dict[tuple[int, int], float]:
    return {(a, b): -8.0 for a in SFS for b in SFS if a != b}


@dataclass(frozen=True)
class LinkTables:
    """Decoding thresholds at the gateway.

    A frame at spreading factor ``a`` survives an overlapping interferer at
    ``b`` when its power is at least the interferer's plus
    ``co_sf_capture_db`` (``a == b``) or ``inter_sf_threshold_db[(a, b)]``.
    """

    sensitivity_dbm: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_SENSITIVITY_DBM))
    co_sf_capture_db: float = 6.0
    inter_sf_threshold_db: Mapping[tuple[int, int], float] = field(default_factory=_default_inter_sf)

    def __post_init__(self) -> None:
        sens = [self.sensitivity_dbm[sf] for sf in sorted(self.sensitivity_dbm)]
        if any(b >= a for a, b in zip(sens, sens[1:])):
            raise ConfigError("sensitivity_dbm must strictly decrease as SF rises")
        if self.co_sf_capture_db <= 0:
            raise ConfigError("co_sf_capture_db must be > 0")

    def threshold(self, sf: int, sf_interferer: int) -> float:
        if sf == sf_interferer:
            return self.co_sf_capture_db
        return self.inter_sf_threshold_db[(sf, sf_interferer)]


@dataclass(frozen=True)
class Transmission:
    device_id: int
    action: ActionConfig
    start_ms: float
    airtime_ms: float
    rx_power_dbm: float
    payload_bytes: int = 50

    @property
    def end_ms(self) -> float:
        return self.start_ms + self.airtime_ms

    def overlaps(self, other: "Transmission") -> bool:
        return self.start_ms < other.end_ms and other.start_ms < self.end_ms


def time_on_air(sf: int, payload_bytes: int, cfg: RadioConfig = RadioConfig()) -> float:
    """Frame duration in milliseconds (Semtech SX127x closed form)."""
    if sf not in SFS:
        raise ValueError(f"spreading factor must be in 7..12, got {sf}")
    if payload_bytes < 0:
        raise ValueError("payload_bytes must be >= 0")
    t_sym = cfg.symbol_ms(sf)
    de = 1 if cfg.ldro(sf) else 0
    implicit = 0 if cfg.explicit_header else 1
    crc = 1 if cfg.crc_on else 0
    num = 8 * payload_bytes - 4 * sf + 28 + 16 * crc - 20 * implicit
    n_payload = 8 + max(math.ceil(num / (4 * (sf - 2 * de))) * (cfg.coding_rate_num + 4), 0)
    return (cfg.preamble_symbols + 4.25 + n_payload) * t_sym


def path_loss_db(
    distance_m: float, model: PathLossModel = PathLossModel(), rng: np.random.Generator | None = None
) -> float:
    # devices closer than the reference distance are clamped onto it
    d = max(distance_m, model.reference_distance_m)
    loss = model.loss_at_reference_db + 10.0 * model.exponent * math.log10(d / model.reference_distance_m)
    if model.shadowing_sigma_db > 0:
        if rng is None:
            raise ValueError("shadowing requires a random source")
        loss += rng.normal(0.0, model.shadowing_sigma_db)
    return loss


def received_power_dbm(tp_dbm: float, loss_db: float) -> float:
    return tp_dbm - loss_db


def energy_per_packet_mj(tp_dbm: float, airtime_ms: float) -> float:
    """Radiated energy of one frame: ``10^(tp/10) mW * airtime``."""
    if airtime_ms <= 0:
        raise ValueError("airtime_ms must be > 0")
    return 10.0 ** (tp_dbm / 10.0) * airtime_ms / 1000.0


def is_decoded(target: Transmission, interferers: Iterable[Transmission], tables: LinkTables) -> bool:
    """Fate of ``target`` given the transmissions that overlap it in time."""
    sf = target.action.sf
    if target.rx_power_dbm < tables.sensitivity_dbm[sf]:
        return False
    for other in interferers:
        if other is target or other.action.channel_hz != target.action.channel_hz:
            continue
        if target.rx_power_dbm < other.rx_power_dbm + tables.threshold(sf, other.action.sf):
            return False
    return True


def resolve_reception(overlapping: Iterable[Transmission], tables: LinkTables = LinkTables()) -> set[int]:
    """Device ids decoded out of a group of mutually overlapping transmissions."""
    group = list(overlapping)
    return {tx.device_id for tx in group if is_decoded(tx, group, tables)}
