"""End-to-end pipeline runner: simulate (or load), correlate, fit, and
write a reproducible report.

The report JSON and every artifact are deterministic functions of the
configuration and the master seed; per-stage seeds are derived from the
master seed, and all parameters are echoed into the report so a run can
be repeated bit-identically.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .correlate import (cross_correlation, integrate_peaks, normalize_g2,
                        normalize_peak_counts, pulse_decay_histogram)
from .estimate import (IRFModel, fit_antibunching_cw, fit_blinking,
                       fit_exponential_decay, fit_saturation,
                       infer_detection_efficiency)
from .exports import export_csv
from .model import ExcitationPulsed
from .simulate import simulate_attenuated_laser, simulate_cw, simulate_pulsed
from .stream import TimeTagStream
from .tagio import read_timetags, write_timetags
from .units import PS_PER_NS

__all__ = ["run_report"]


def _stage_seeds(master: int, n: int = 16) -> list[int]:
    state = np.random.SeedSequence(master).generate_state(n, dtype=np.uint64)
    return [int(x) for x in state]


def _acquire(cfg: RunConfig, seeds: list[int]) -> TimeTagStream:
    if cfg.mode == "load":
        return read_timetags(cfg.input_path)
    if cfg.mode == "pulsed":
        return simulate_pulsed(cfg.emitter, cfg.excitation_pulsed,
                               cfg.detection, cfg.duration, seeds[0])
    if cfg.mode == "cw":
        return simulate_cw(cfg.emitter, cfg.excitation_cw, cfg.detection,
                           cfg.duration, seeds[0])
    return simulate_attenuated_laser(cfg.laser_rate,
                                     cfg.excitation_pulsed.rep_period,
                                     cfg.detection, cfg.duration, seeds[0])


def _theta_ticks(cfg: RunConfig, stream: TimeTagStream) -> int | None:
    if cfg.excitation_pulsed is not None:
        return int(round(cfg.excitation_pulsed.rep_period * PS_PER_NS))
    theta = stream.metadata.get("theta_ticks")
    return int(theta) if theta else None


def run_report(config_path, seed: int | None = None, out_dir=".") -> dict:
    """Execute the configured pipeline; returns the report dict and writes
    it (plus all artifacts) under ``out_dir``."""
    cfg = load_config(config_path)
    if seed is not None:
        cfg.seed = seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = _stage_seeds(cfg.seed)

    report: dict = {
        "version": __version__,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "artifacts": {},
        "results": {},
        "parameters": _echo_parameters(cfg),
    }

    stream = _acquire(cfg, seeds)
    if cfg.mode != "load":
        write_timetags(stream, out / "stream.phtag")
        report["artifacts"]["stream"] = "stream.phtag"
    else:
        report["artifacts"]["stream"] = str(cfg.input_path)

    n1, n2 = stream.rates()
    t_acq = stream.duration_seconds
    report["results"]["rates_cps"] = {"channel_1": n1, "channel_2": n2}

    hist = cross_correlation(stream, cfg.bin_width, cfg.tau_range)
    export_csv(hist, out / "correlation.csv")
    report["artifacts"]["correlation"] = "correlation.csv"
    g2 = normalize_g2(hist, n1, n2, t_acq)
    export_csv(g2, out / "g2.csv")
    report["artifacts"]["g2"] = "g2.csv"

    theta = _theta_ticks(cfg, stream)
    peaks = None
    if theta and cfg.mode != "cw":
        window = cfg.peak_window or theta
        peaks = normalize_peak_counts(
            integrate_peaks(hist, theta, window), n1, n2, theta, t_acq)
        export_csv(peaks, out / "peaks.csv")
        report["artifacts"]["peaks"] = "peaks.csv"
        report["results"]["central_peak_cn"] = peaks.normalized_peak(0)

    blinking_fit = None
    if "blinking" in cfg.fits:
        if peaks is None:
            raise ConfigError("[fit.blinking]: requires a pulsed-mode run")
        blinking_fit = fit_blinking(peaks, theta / PS_PER_NS)
        report["results"]["blinking"] = blinking_fit.to_dict()

    if "lifetime" in cfg.fits:
        if not theta:
            raise ConfigError("[fit.lifetime]: requires a pulsed-mode run")
        opts = cfg.fits["lifetime"]
        decay = pulse_decay_histogram(stream, theta, opts["bin_width"])
        export_csv(decay, out / "decay.csv")
        report["artifacts"]["decay"] = "decay.csv"
        peak_tick = float(decay.centers()[int(np.argmax(decay.counts))])
        stop = opts["window_stop"] or int(0.9 * theta)
        fit = fit_exponential_decay(
            decay, (peak_tick + opts["window_start"], stop))
        report["results"]["lifetime"] = fit.to_dict()

    if "g2" in cfg.fits:
        opts = cfg.fits["g2"]
        sigma = opts["irf_sigma"]
        if sigma is None:
            sigma = (cfg.detection.jitter_sigma * np.sqrt(2.0)
                     if cfg.detection else 0.0)
        fit = fit_antibunching_cw(g2, IRFModel(sigma=sigma))
        report["results"]["antibunching"] = fit.to_dict()

    if cfg.saturation is not None:
        report["results"].update(_saturation_scan(cfg, seeds, out, blinking_fit))

    report_path = out / "report.json"
    report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n",
                           encoding="utf-8", newline="\n")
    report["artifacts"]["report"] = "report.json"
    return report


def _saturation_scan(cfg: RunConfig, seeds: list[int], out: Path,
                     blinking_fit) -> dict:
    """Simulate the pulsed power scan, fit the saturation law and infer
    the detection efficiency."""
    if cfg.mode not in ("pulsed", "laser") or cfg.emitter is None:
        raise ConfigError("[saturation]: requires a pulsed emitter config")
    duration = cfg.saturation["duration"]
    duration_s = duration / 1e12
    rep = cfg.excitation_pulsed.rep_period
    points = []
    sigmas = []
    for i, power in enumerate(cfg.saturation["powers"]):
        exc = ExcitationPulsed(
            rep_period=rep,
            excitation_prob=power / (power + cfg.p_sat_pulsed))
        run = simulate_pulsed(cfg.emitter, exc, cfg.detection, duration,
                              seeds[4 + i % 12] + i)
        counts = len(run)
        rate = counts / duration_s - 2.0 * cfg.detection.background_rate
        points.append((power, rate))
        sigmas.append(max(np.sqrt(counts), 1.0) / duration_s)
    fit = fit_saturation(points, sigma=sigmas)

    lines = ["power_uW,rate_cps"] + [f"{p!r},{r!r}" for p, r in points]
    (out / "saturation.csv").write_text("\n".join(lines) + "\n",
                                        encoding="utf-8", newline="\n")
    results = {"saturation": fit.to_dict()}

    if blinking_fit is not None and blinking_fit.converged:
        t_on = blinking_fit.parameters["t_on"]
        t_off = blinking_fit.parameters["t_off"]
    else:
        t_on, t_off = cfg.emitter.t_on_mean, cfg.emitter.t_off_mean
    if fit.converged:
        results["efficiency"] = {
            "value": infer_detection_efficiency(
                fit.parameters["r_inf"], t_on, t_off, rep),
            "unit": "",
            "from": "saturated rate, dwell times and pulse period",
        }
    return results


def _echo_parameters(cfg: RunConfig) -> dict:
    echo: dict = {"duration_ticks": cfg.duration, "bin_width": cfg.bin_width,
                  "tau_range": cfg.tau_range}
    for name in ("emitter", "detection", "excitation_pulsed", "excitation_cw"):
        value = getattr(cfg, name)
        if value is not None:
            echo[name] = dataclasses.asdict(value)
    if cfg.laser_rate is not None:
        echo["laser_rate"] = cfg.laser_rate
    if cfg.saturation is not None:
        echo["saturation"] = cfg.saturation
    return echo
