"""
System configuration: every physical and simulation parameter in one place.

Defaults reproduce the 24 GHz reference setup (G = 15 m-sequence pulse,
15 x 15 RIS in 9 square subarrays, three-tap Rician tag-reader channel with
a 15-sample delay spread). Files use a flat ``key = value`` TOML subset;
see README for the key list.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from functools import cached_property
from pathlib import Path

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .codebook import ProbePulse, msequence_pulse
from .ris import (BeamformerSet, Direction, RisGeometry, SubarrayPartition,
                  beampattern, matched_beamformers, tiled_partition,
                  steering_vector)

__all__ = ["SystemConfig", "ConfigError", "load_config", "save_config", "dumps_config"]

# Primitive polynomials x^r + x^t + 1 (plus higher taps where needed).
PRIMITIVE_TAPS = {
    2: (2, 1), 3: (3, 1), 4: (4, 1), 5: (5, 2), 6: (6, 1), 7: (7, 1),
    8: (8, 6, 5, 4), 9: (9, 4), 10: (10, 3), 11: (11, 2),
}


class ConfigError(ValueError):
    """Invalid configuration file or parameter combination."""


@dataclass(frozen=True)
class SystemConfig:
    carrier_frequency: float = 24e9
    pri: float = 3e-6
    bandwidth: float = 50e6
    processing_gain: int = 15
    ris_rows: int = 15
    ris_cols: int = 15
    element_spacing: float = 0.5
    n_subarrays: int = 9
    codeword_length: int = 21
    theta_st: tuple[float, float] = (-45.0, 0.0)
    theta_bar: tuple[float, float] = (45.0, 0.0)
    q_tr: int = 3
    kappa_tr_db: float = 10.0
    delay_spread_samples: int = 15
    tr_azimuth_range: tuple[float, float] = (33.0, 57.0)
    tr_elevation_range: tuple[float, float] = (-12.0, 12.0)
    sigma_st: float = 1.0
    sigma_tr: float = 1.0
    pulse_power: float = 1.0
    interference_amplitude: float = 0.0
    interference_delay_samples: float = 0.0
    snr_grid_db: tuple[float, ...] = (-5.0, 0.0, 5.0)
    trials: int = 100_000
    channel_draws: int = 10_000
    seed: int = 20240601
    rel_tol: float = 1e-8

    def __post_init__(self):
        for name in ("theta_st", "theta_bar", "tr_azimuth_range",
                     "tr_elevation_range", "snr_grid_db"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        self.validate()

    # -- validation ---------------------------------------------------------
    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        for name in ("carrier_frequency", "pri", "bandwidth", "element_spacing", "pulse_power"):
            need(getattr(self, name) > 0, f"{name} must be positive")
        for name in ("processing_gain", "ris_rows", "ris_cols", "n_subarrays",
                     "codeword_length", "q_tr", "trials", "channel_draws"):
            v = getattr(self, name)
            need(isinstance(v, int) and not isinstance(v, bool) and v >= 1,
                 f"{name} must be a positive integer")
        need(isinstance(self.delay_spread_samples, int) and self.delay_spread_samples >= 0,
             "delay_spread_samples must be a nonnegative integer")
        need(self.sigma_st >= 0 and self.sigma_tr >= 0, "sigma_st and sigma_tr must be nonnegative")
        need(self.interference_amplitude >= 0, "interference_amplitude must be nonnegative")
        need(0 < self.rel_tol < 0.1, "rel_tol must lie in (0, 0.1)")
        need(len(self.theta_st) == 2 and len(self.theta_bar) == 2, "directions are [azimuth, elevation]")
        for lo, hi in (self.tr_azimuth_range, self.tr_elevation_range):
            need(-90 <= lo <= hi <= 90, "angle ranges must satisfy -90 <= lo <= hi <= 90")
        need(self.ris_rows * self.ris_cols % self.n_subarrays == 0,
             "N must divide M_RIS (n_subarrays divides ris_rows*ris_cols)")
        need(self.codeword_length >= self.n_subarrays + 1,
             f"L >= N+1 violated (L={self.codeword_length}, N={self.n_subarrays})")
        r = int(round(math.log2(self.processing_gain + 1)))
        need((1 << r) - 1 == self.processing_gain and r in PRIMITIVE_TAPS,
             f"processing_gain must be 2^r - 1 with 2 <= r <= 11 (got {self.processing_gain})")
        need(0 <= self.interference_delay_samples < self.samples_per_pri,
             "interference delay must fall inside the observation window")
        # Non-overlap of consecutive PRIs.
        need(self.pri > self.pulse_duration + self.delay_spread,
             "PRI must exceed pulse duration plus delay spread")
        try:
            Direction(*self.theta_st)
            Direction(*self.theta_bar)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        need(0 <= self.seed < 2 ** 64, "seed must be a 64-bit unsigned integer")

    # -- derived quantities -------------------------------------------------
    @property
    def pulse_duration(self) -> float:
        return self.processing_gain / self.bandwidth

    @property
    def delay_spread(self) -> float:
        return self.delay_spread_samples / self.bandwidth

    @property
    def samples_per_pri(self) -> int:
        """K_R = ceil((T + spread) W), exact in integer samples."""
        return self.processing_gain + self.delay_spread_samples

    @property
    def n_elements(self) -> int:
        return self.ris_rows * self.ris_cols

    @property
    def subarray_size(self) -> int:
        return self.n_elements // self.n_subarrays

    @property
    def kappa_tr(self) -> float:
        return 10.0 ** (self.kappa_tr_db / 10.0)

    @property
    def wavelength(self) -> float:
        return 299_792_458.0 / self.carrier_frequency

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    # -- cached system objects (frozen dataclass: cache in __dict__) --------
    @cached_property
    def geometry(self) -> RisGeometry:
        return RisGeometry(self.ris_rows, self.ris_cols, self.element_spacing)

    @cached_property
    def partition(self) -> SubarrayPartition:
        return tiled_partition(self.geometry, self.n_subarrays)

    @cached_property
    def beamformers(self) -> BeamformerSet:
        return matched_beamformers(self.partition, self.geometry,
                                   Direction(*self.theta_st), Direction(*self.theta_bar))

    @cached_property
    def pulse(self) -> ProbePulse:
        r = int(round(math.log2(self.processing_gain + 1)))
        return msequence_pulse(r, PRIMITIVE_TAPS[r], None, self.bandwidth)

    @cached_property
    def beampattern_at_target(self) -> float:
        """B(theta_bar) for the nominal ST channel sigma_st * psi(theta_st).

        The uniform ST phase does not change |.|^2, so this is fixed.
        """
        gamma = self.sigma_st * steering_vector(self.geometry, Direction(*self.theta_st))
        return float(beampattern(self.beamformers, self.partition, gamma, self.geometry,
                                 self.theta_bar[0], self.theta_bar[1], self.codeword_length))

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_FIELD_TYPES = {f.name: f for f in fields(SystemConfig)}


def _coerce(key: str, value):
    default = _FIELD_TYPES[key].default
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"key '{key}': expected a list of numbers")
        return tuple(float(v) for v in value)
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"key '{key}': booleans are not accepted")
    if isinstance(default, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(f"key '{key}': expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)):
            raise ConfigError(f"key '{key}': expected a number, got {value!r}")
        return float(value)
    raise ConfigError(f"key '{key}': unsupported value {value!r}")  # pragma: no cover


def config_from_mapping(data: dict) -> SystemConfig:
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    kwargs = {k: _coerce(k, v) for k, v in data.items()}
    try:
        return SystemConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> SystemConfig:
    """Read a config file; omitted keys keep their reference defaults.

    Raises
    ------
    ConfigError
        On a syntax error (with line and column), an unknown key, a value of
        the wrong type, or a violated parameter constraint.
    """
    text = Path(path).read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: tables are not supported (key '{nested[0]}')")
    return config_from_mapping(data)


def _fmt(value) -> str:
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps_config(config: SystemConfig) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in config.to_dict().items())


def save_config(config: SystemConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_config(config))
