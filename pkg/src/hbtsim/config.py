"""Configuration files: INI sections of unit-suffixed quantities.

Every dimensioned value carries an explicit unit suffix (``50 ns``,
``66 uW``, ``35 kcps``); bare numbers are only accepted for dimensionless
fields.  Validation errors name the offending ``[section] key``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .model import (DetectionParams, EmitterParams, ExcitationCW,
                    ExcitationPulsed, pump_coefficient_for_doubling)
from .units import (PS_PER_NS, UnitError, parse_power_uw, parse_rate_cps,
                    parse_time_ps)

__all__ = ["ConfigError", "RunConfig", "load_config"]


class ConfigError(ValueError):
    """A configuration file is missing fields or holds bad values."""


@dataclass
class RunConfig:
    """Parsed pipeline configuration (see the repository README for the
    file format)."""

    mode: str                      # "pulsed" | "cw" | "laser" | "load"
    duration: int                  # ticks
    seed: int
    input_path: str | None
    emitter: EmitterParams | None
    excitation_pulsed: ExcitationPulsed | None
    excitation_cw: ExcitationCW | None
    detection: DetectionParams | None
    laser_rate: float | None       # detected counts/s for laser mode
    p_sat_pulsed: float            # uW, sets p_exc = P/(P + P_sat)
    bin_width: int                 # ticks
    tau_range: int                 # ticks
    peak_window: int | None        # ticks
    fits: dict                     # per-fit options
    saturation: dict | None        # power-scan options


class _Section:
    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.items = dict(parser[name]) if parser.has_section(name) else None

    def __bool__(self):
        return self.items is not None

    def _fetch(self, key: str, default, required: bool):
        if self.items is None or key not in self.items:
            if required:
                raise ConfigError(f"[{self.name}] {key}: required field missing")
            return None, default
        return self.items[key], default

    def _parse(self, key, parse, default, required, kind):
        raw, default = self._fetch(key, default, required)
        if raw is None:
            return default
        try:
            return parse(raw)
        except (UnitError, ValueError) as exc:
            raise ConfigError(f"[{self.name}] {key}: {exc}") from exc

    def time_ticks(self, key, default=None, required=False) -> int | None:
        value = self._parse(key, parse_time_ps, default, required, "time")
        return None if value is None else int(round(value))

    def power(self, key, default=None, required=False):
        return self._parse(key, parse_power_uw, default, required, "power")

    def rate(self, key, default=None, required=False):
        return self._parse(key, parse_rate_cps, default, required, "rate")

    def number(self, key, default=None, required=False):
        return self._parse(key, float, default, required, "number")

    def integer(self, key, default=None, required=False):
        return self._parse(key, lambda s: int(s, 0), default, required, "int")

    def text(self, key, default=None, required=False):
        raw, default = self._fetch(key, default, required)
        return default if raw is None else raw.strip()

    def power_list(self, key, required=False):
        raw, _ = self._fetch(key, None, required)
        if raw is None:
            return None
        try:
            return [parse_power_uw(part) for part in raw.split(",")]
        except (UnitError, ValueError) as exc:
            raise ConfigError(f"[{self.name}] {key}: {exc}") from exc


def _emitter_from(sec: _Section, p_sat_default: float) -> EmitterParams:
    lifetime = sec.time_ticks("radiative_lifetime", required=True) / PS_PER_NS
    t_on = sec.time_ticks("t_on", required=True) / 1e6
    t_off = sec.time_ticks("t_off", required=True) / 1e6
    pump = sec.number("pump_coefficient")
    if pump is None:
        p_ref = sec.power("p_sat_reference", p_sat_default)
        pump = pump_coefficient_for_doubling(lifetime, p_ref)
    try:
        return EmitterParams(radiative_lifetime=lifetime, t_on_mean=t_on,
                             t_off_mean=t_off, pump_coefficient=pump)
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}]: {exc}") from exc


def load_config(path) -> RunConfig:
    """Parse and validate a pipeline configuration file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(Path(path))
    if not read:
        raise ConfigError(f"config file not found: {path}")

    run = _Section(parser, "run")
    if not run:
        raise ConfigError("[run]: section missing")
    mode = run.text("mode", required=True).lower()
    if mode not in ("pulsed", "cw", "laser", "load"):
        raise ConfigError(f"[run] mode: unknown mode {mode!r}")
    seed = run.integer("seed", 0)
    input_path = run.text("input")
    duration = run.time_ticks("duration", 0 if mode == "load" else None,
                              required=mode != "load")
    if mode == "load" and not input_path:
        raise ConfigError("[run] input: required for mode=load")

    exc_sec = _Section(parser, "excitation")
    det_sec = _Section(parser, "detection")
    emit_sec = _Section(parser, "emitter")

    p_sat_pulsed = exc_sec.power("p_sat_pulsed", 66.0) if exc_sec else 66.0

    emitter = None
    if emit_sec:
        emitter = _emitter_from(emit_sec, p_sat_pulsed)
    elif mode in ("pulsed", "cw"):
        raise ConfigError("[emitter]: section required for emitter modes")

    detection = None
    if det_sec:
        try:
            detection = DetectionParams(
                overall_efficiency=det_sec.number("efficiency", required=True),
                splitter_ratio=det_sec.number("splitter", 0.5),
                background_rate=det_sec.rate("background", 0.0),
                dead_time=det_sec.time_ticks("dead_time",
                                             50 * PS_PER_NS) / PS_PER_NS,
                jitter_sigma=det_sec.time_ticks("jitter", 150),
            )
        except ValueError as exc:
            raise ConfigError(f"[detection]: {exc}") from exc
    elif mode in ("pulsed", "cw", "laser"):
        raise ConfigError("[detection]: section required for simulation modes")

    excitation_pulsed = None
    excitation_cw = None
    laser_rate = None
    if mode == "pulsed":
        if not exc_sec:
            raise ConfigError("[excitation]: section required for mode=pulsed")
        rep = exc_sec.time_ticks("rep_period", required=True) / PS_PER_NS
        power = exc_sec.power("power", required=True)
        p_exc = power / (power + p_sat_pulsed)
        try:
            excitation_pulsed = ExcitationPulsed(rep_period=rep,
                                                 excitation_prob=p_exc)
        except ValueError as exc:
            raise ConfigError(f"[excitation]: {exc}") from exc
    elif mode == "cw":
        if not exc_sec:
            raise ConfigError("[excitation]: section required for mode=cw")
        try:
            excitation_cw = ExcitationCW(
                power=exc_sec.power("power", required=True),
                wavelength=exc_sec.number("wavelength", 765.0),
            )
        except ValueError as exc:
            raise ConfigError(f"[excitation]: {exc}") from exc
    elif mode == "laser":
        if not exc_sec:
            raise ConfigError("[excitation]: section required for mode=laser")
        rep = exc_sec.time_ticks("rep_period", required=True) / PS_PER_NS
        excitation_pulsed = ExcitationPulsed(rep_period=rep, excitation_prob=0.0)
        laser_rate = exc_sec.rate("detected_rate", required=True)

    cor = _Section(parser, "correlate")
    bin_width = cor.time_ticks("bin_width", 128) if cor else 128
    tau_range = cor.time_ticks("tau_range", 15_000_000) if cor else 15_000_000
    peak_window = cor.time_ticks("peak_window") if cor else None
    if bin_width <= 0:
        raise ConfigError("[correlate] bin_width: must be positive")

    fits = {}
    for fit_name in ("lifetime", "blinking", "g2"):
        sec = _Section(parser, f"fit.{fit_name}")
        if sec:
            fits[fit_name] = {
                "bin_width": sec.time_ticks("bin_width", 32),
                "window_start": sec.time_ticks("window_start", PS_PER_NS),
                "window_stop": sec.time_ticks("window_stop"),
                "irf_sigma": sec.time_ticks("irf_sigma"),
            }

    saturation = None
    sat_sec = _Section(parser, "saturation")
    if sat_sec:
        powers = sat_sec.power_list("powers", required=True)
        if len(powers) < 3:
            raise ConfigError("[saturation] powers: need at least 3 powers")
        saturation = {
            "powers": powers,
            "duration": sat_sec.time_ticks("duration", required=True),
        }

    return RunConfig(
        mode=mode, duration=duration or 0, seed=seed, input_path=input_path,
        emitter=emitter, excitation_pulsed=excitation_pulsed,
        excitation_cw=excitation_cw, detection=detection,
        laser_rate=laser_rate, p_sat_pulsed=p_sat_pulsed,
        bin_width=bin_width, tau_range=tau_range,
        peak_window=peak_window, fits=fits, saturation=saturation,
    )
