"""Scenario presets and the ``key = value`` configuration file format.

A configuration file is INI-style: section headers group the keys, every
key maps onto one field of :class:`~mixmab.engine.SimConfig`.  Any key may be
omitted (defaults apply); unknown sections or keys are rejected.  Example::

    [scenario]
    scenario = 2

    [topology]
    n_devices = 30
    cell_radius_m = 1000.0

    [run]
    horizon_ms = 7200000000.0
    seed = 7

Setting ``scenario`` loads that preset's SF / channel / power sets (and, for
scenario 5, its packet rate); explicit ``sfs``, ``channels_hz``, ``tps_dbm``
or ``packet_rate_per_hour`` keys given alongside it take precedence.
``scenario = custom`` leaves the action sets entirely to those keys.
The ``[manifest]`` section written into result directories is informational
and ignored on input.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

from .bandit import ConfigError, PolicyKind
from .engine import MS_PER_HOUR, SimConfig
from .phy import LinkTables, PathLossModel, RadioConfig

ALL_SFS = (7, 8, 9, 10, 11, 12)
ALL_CHANNELS_HZ = (868_100_000, 868_300_000, 868_500_000)
ALL_TPS_DBM = (8, 11, 14)

RATE_ALIASES = {"1ph": 1.0, "1pd": 1.0 / 24.0, "1pw": 1.0 / 168.0}


@dataclass(frozen=True)
class ScenarioPreset:
    identifier: int
    sfs: tuple[int, ...]
    channels_hz: tuple[int, ...]
    tps_dbm: tuple[int, ...]
    # None keeps the configured rate
    packet_rate_per_hour: float | None = None
    rate_variants: tuple[str, ...] = ()


SCENARIOS: dict[int, ScenarioPreset] = {
    1: ScenarioPreset(1, ALL_SFS, (868_100_000,), (14,)),
    2: ScenarioPreset(2, ALL_SFS, ALL_CHANNELS_HZ, (14,)),
    3: ScenarioPreset(3, ALL_SFS, (868_100_000,), ALL_TPS_DBM),
    4: ScenarioPreset(4, ALL_SFS, ALL_CHANNELS_HZ, ALL_TPS_DBM),
    5: ScenarioPreset(5, ALL_SFS, ALL_CHANNELS_HZ, ALL_TPS_DBM, 1.0, ("1ph", "1pd", "1pw")),
}

# section -> key -> SimConfig field (or nested ``radio.xxx`` style field)
SECTIONS: dict[str, tuple[str, ...]] = {
    "scenario": ("scenario", "sfs", "channels_hz", "tps_dbm"),
    "topology": ("n_devices", "cell_radius_m"),
    "traffic": ("packet_rate_per_hour", "payload_bytes", "duty_cycle"),
    "run": ("horizon_ms", "seed", "metrics_bucket_ms"),
    "policy": ("policy", "l_exp", "l_ee", "gamma", "e_const"),
    "radio": ("bandwidth_hz", "coding_rate_num", "preamble_symbols", "explicit_header", "crc_on",
              "low_data_rate_optimize"),
    "path_loss": ("reference_distance_m", "loss_at_reference_db", "exponent", "shadowing_sigma_db"),
    "links": ("sensitivity_dbm", "co_sf_capture_db", "inter_sf_threshold_db"),
}
KEY_SECTION = {key: sec for sec, keys in SECTIONS.items() for key in keys}
PRESET_KEYS = ("sfs", "channels_hz", "tps_dbm", "packet_rate_per_hour")


def parse_rate(token: str | float) -> float:
    """``1ph``/``1pd``/``1pw`` or a plain number of packets per hour."""
    if isinstance(token, (int, float)):
        return float(token)
    token = token.strip().lower()
    if token in RATE_ALIASES:
        return RATE_ALIASES[token]
    try:
        return float(token)
    except ValueError:
        raise ConfigError(f"packet_rate_per_hour: cannot parse rate {token!r}") from None


def parse_seeds(text: str) -> list[int]:
    """``"1..10"`` (inclusive) or a comma list ``"1,4,9"``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        try:
            if ".." in part:
                lo, hi = part.split("..")
                seeds.extend(range(int(lo), int(hi) + 1))
            elif part:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError(f"seeds: cannot parse {part!r}") from None
    if not seeds:
        raise ConfigError("seeds: empty list")
    return seeds


# -- value codecs -------------------------------------------------------------


def _int_tuple(key: str, text: str) -> tuple[int, ...]:
    try:
        return tuple(sorted({int(v) for v in text.split(",") if v.strip()}))
    except ValueError:
        raise ConfigError(f"{key}: expected a comma-separated list of integers, got {text!r}") from None


def _number(key: str, text: str, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {text!r}") from None


def _optional_float(key: str, text: str) -> float | None:
    return None if text.strip().lower() in ("", "auto", "none") else _number(key, text)


def _bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {text!r}")


def _sensitivity(key: str, text: str) -> dict[int, float]:
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        try:
            sf, val = item.split(":")
            out[int(sf)] = float(val)
        except ValueError:
            raise ConfigError(f"{key}: expected 'sf:dBm' items, got {item!r}") from None
    return out


def _inter_sf(key: str, text: str) -> dict[tuple[int, int], float]:
    text = text.strip()
    if ":" not in text:
        val = _number(key, text)
        return {(a, b): val for a in ALL_SFS for b in ALL_SFS if a != b}
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        try:
            pair, val = item.split(":")
            a, b = pair.split("/")
            out[(int(a), int(b))] = float(val)
        except ValueError:
            raise ConfigError(f"{key}: expected 'sf/sf_interferer:dB' items, got {item!r}") from None
    return out


def _decode(key: str, text: str) -> Any:
    if key == "scenario":
        if text.strip().lower() in ("custom", "none", ""):
            return None
        value = _number(key, text, int)
        if value not in SCENARIOS:
            raise ConfigError(f"scenario: must be 1..5 or custom, got {value}")
        return value
    if key in ("sfs", "channels_hz", "tps_dbm"):
        return _int_tuple(key, text)
    if key in ("n_devices", "payload_bytes", "seed", "l_exp", "l_ee", "bandwidth_hz",
               "coding_rate_num", "preamble_symbols"):
        return _number(key, text, int)
    if key == "packet_rate_per_hour":
        return parse_rate(text)
    if key in ("metrics_bucket_ms", "gamma"):
        return _optional_float(key, text)
    if key == "policy":
        try:
            return PolicyKind(text.strip().lower())
        except ValueError:
            raise ConfigError(f"policy: must be one of {[p.value for p in PolicyKind]}, got {text!r}") from None
    if key in ("explicit_header", "crc_on"):
        return _bool(key, text)
    if key == "low_data_rate_optimize":
        return None if text.strip().lower() in ("auto", "none", "") else _bool(key, text)
    if key == "sensitivity_dbm":
        return _sensitivity(key, text)
    if key == "inter_sf_threshold_db":
        return _inter_sf(key, text)
    return _number(key, text)


def _encode(value: Any) -> str:
    if value is None:
        return "auto"
    if isinstance(value, PolicyKind):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, dict):
        items = sorted(value.items())
        if items and isinstance(items[0][0], tuple):
            uniform = {v for _, v in items}
            full = {(a, b) for a in ALL_SFS for b in ALL_SFS if a != b}
            if len(uniform) == 1 and set(value) == full:
                return repr(items[0][1])
            return ",".join(f"{a}/{b}:{v!r}" for (a, b), v in items)
        return ",".join(f"{k}:{v!r}" for k, v in items)
    return str(value)


# -- resolution ---------------------------------------------------------------


def _apply(values: dict[str, Any], layer: Mapping[str, Any]) -> None:
    if "scenario" in layer:
        sc = layer["scenario"]
        values["scenario"] = sc
        if sc is not None:
            preset = SCENARIOS[sc]
            values.update(sfs=preset.sfs, channels_hz=preset.channels_hz, tps_dbm=preset.tps_dbm)
            if preset.packet_rate_per_hour is not None:
                values["packet_rate_per_hour"] = preset.packet_rate_per_hour
    for key, val in layer.items():
        if key != "scenario":
            values[key] = val


def build_config(*layers: Mapping[str, Any]) -> SimConfig:
    """Resolve layered key/value overrides (later layers win) into a validated config."""
    values: dict[str, Any] = {}
    for layer in layers:
        unknown = set(layer) - set(KEY_SECTION)
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")
        _apply(values, layer)
    if "scenario" in values and values["scenario"] is None:
        missing = [k for k in ("sfs", "channels_hz", "tps_dbm") if k not in values]
        if missing:
            raise ConfigError(f"scenario: custom scenario requires {', '.join(missing)}")
    radio = {k: values.pop(k) for k in SECTIONS["radio"] if k in values}
    path_loss = {k: values.pop(k) for k in SECTIONS["path_loss"] if k in values}
    links = {k: values.pop(k) for k in SECTIONS["links"] if k in values}
    try:
        return SimConfig(
            radio=RadioConfig(**radio),
            path_loss=PathLossModel(**path_loss),
            links=LinkTables(**links),
            **values,
        )
    except KeyError as exc:
        raise ConfigError(f"links: threshold table lacks an entry for {exc}") from None
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def read_config_text(text: str) -> dict[str, Any]:
    """Parse file contents into a flat ``{key: value}`` layer."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    layer: dict[str, Any] = {}
    for section in parser.sections():
        if section == "manifest":
            continue
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, text_value in parser.items(section):
            if key not in SECTIONS[section]:
                where = KEY_SECTION.get(key)
                hint = f" (belongs in [{where}])" if where else ""
                raise ConfigError(f"unknown key '{key}' in [{section}]{hint}")
            layer[key] = _decode(key, text_value)
    return layer


def parse_config(path: str | Path | None = None, flags: Mapping[str, Any] | None = None) -> SimConfig:
    """Defaults, then the file at ``path``, then ``flags`` (already-typed values)."""
    layers = []
    if path is not None:
        try:
            layers.append(read_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read configuration file {path}: {exc}") from None
    if flags:
        layers.append(dict(flags))
    return build_config(*layers)


def config_to_layer(cfg: SimConfig) -> dict[str, Any]:
    flat = cfg.as_dict()
    radio, path_loss, links = flat.pop("radio"), flat.pop("path_loss"), flat.pop("links")
    flat.update({k: getattr(radio, k) for k in SECTIONS["radio"]})
    flat.update({k: getattr(path_loss, k) for k in SECTIONS["path_loss"]})
    flat["sensitivity_dbm"] = dict(links.sensitivity_dbm)
    flat["co_sf_capture_db"] = links.co_sf_capture_db
    flat["inter_sf_threshold_db"] = dict(links.inter_sf_threshold_db)
    return flat


def format_config(cfg: SimConfig, manifest: Mapping[str, Any] | None = None) -> str:
    """Fully resolved configuration text; ``parse_config`` on it reproduces ``cfg``."""
    flat = config_to_layer(cfg)
    out = io.StringIO()
    if manifest:
        out.write("[manifest]\n")
        for key, value in manifest.items():
            out.write(f"{key} = {value}\n")
        out.write("\n")
    for section, keys in SECTIONS.items():
        out.write(f"[{section}]\n")
        for key in keys:
            value = flat[key]
            if key == "scenario" and value is None:
                text = "custom"
            elif key == "scenario":
                text = str(value)
            else:
                text = _encode(value)
            out.write(f"{key} = {text}\n")
        out.write("\n")
    return out.getvalue()


def scenario_config(scenario: int, **overrides) -> SimConfig:
    """Desk-scale config for a preset; keyword overrides use ``SimConfig`` field names."""
    layer: dict[str, Any] = {"scenario": scenario}
    layer.update(overrides)
    return build_config(layer)


def with_rate(cfg: SimConfig, rate: str | float) -> SimConfig:
    return replace(cfg, packet_rate_per_hour=parse_rate(rate))


def horizon_hours_to_ms(hours: float) -> float:
    return float(hours) * MS_PER_HOUR
