"""Subcommand CLI orchestrating simulate -> correlate -> fit pipelines.

Exit codes: 0 success, 1 validation (bad arguments, configs or file
contents), 2 I/O failure, 3 a requested fit did not converge.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .correlate import (cross_correlation, integrate_peaks, normalize_g2,
                        normalize_peak_counts, pulse_decay_histogram,
                        start_stop_histogram)
from .estimate import (IRFModel, fit_antibunching_cw, fit_blinking,
                       fit_exponential_decay, fit_saturation)
from .exports import export_csv, write_fit_json
from .report import _acquire, _stage_seeds, run_report
from .tagio import TimeTagFileError, read_timetags, write_timetags
from .units import UnitError, parse_time_ps

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NO_CONVERGENCE = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    parser.add_argument("--out-dir", default=".",
                        help="directory for output artifacts")
    parser.add_argument("--config", default=None,
                        help="pipeline configuration file")


def _time_ticks(text: str) -> int:
    return int(round(parse_time_ps(text)))


def _out(args, name: str) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _load_stream(path):
    return read_timetags(path)


def _finish_fit(fit, args, name: str) -> int:
    write_fit_json(fit, _out(args, name))
    print(json.dumps(fit.to_dict(), sort_keys=True, indent=2))
    return EXIT_OK if fit.converged else EXIT_NO_CONVERGENCE


def _cmd_simulate(args) -> int:
    if not args.config:
        raise ConfigError("simulate requires --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if cfg.mode == "load":
        raise ConfigError("[run] mode: cannot be 'load' for simulate")
    stream = _acquire(cfg, _stage_seeds(cfg.seed))
    path = _out(args, args.out)
    n = write_timetags(stream, path)
    print(f"wrote {len(stream)} records ({n} bytes) to {path}")
    return EXIT_OK


def _cmd_correlate(args) -> int:
    stream = _load_stream(args.input)
    bin_width = _time_ticks(args.bin_width)
    tau_range = _time_ticks(args.range)
    if args.estimator == "start-stop":
        hist = start_stop_histogram(stream, bin_width, tau_range)
    else:
        hist = cross_correlation(stream, bin_width, tau_range)
    export_csv(hist, _out(args, args.out))
    if args.normalize:
        n1, n2 = stream.rates()
        g2 = normalize_g2(hist, n1, n2, stream.duration_seconds)
        export_csv(g2, _out(args, "g2_" + args.out))
    print(f"histogram with {hist.n_bins} bins, {int(hist.counts.sum())} "
          f"in-range pairs")
    return EXIT_OK


def _theta_ticks_arg(args, stream) -> int:
    if args.theta:
        return _time_ticks(args.theta)
    theta = stream.metadata.get("theta_ticks")
    if not theta:
        raise ConfigError("--theta required (stream has no pulse period)")
    return int(theta)


def _cmd_fit_lifetime(args) -> int:
    stream = _load_stream(args.input)
    theta = _theta_ticks_arg(args, stream)
    bin_width = _time_ticks(args.bin_width)
    decay = pulse_decay_histogram(stream, theta, bin_width)
    export_csv(decay, _out(args, "decay.csv"))
    peak = float(decay.centers()[int(np.argmax(decay.counts))])
    start = peak + _time_ticks(args.window_start)
    stop = _time_ticks(args.window_stop) if args.window_stop else int(0.9 * theta)
    fit = fit_exponential_decay(decay, (start, stop))
    return _finish_fit(fit, args, "lifetime_fit.json")


def _cmd_fit_saturation(args) -> int:
    rows = Path(args.input).read_text(encoding="utf-8").splitlines()
    if not rows or not rows[0].lower().startswith("power"):
        raise ConfigError("expected CSV with a 'power_uW,rate_cps' header")
    points = []
    for line in rows[1:]:
        power, rate = line.split(",")
        points.append((float(power), float(rate)))
    fit = fit_saturation(points)
    return _finish_fit(fit, args, "saturation_fit.json")


def _cmd_fit_blinking(args) -> int:
    stream = _load_stream(args.input)
    theta = _theta_ticks_arg(args, stream)
    tau_range = _time_ticks(args.range)
    bin_width = _time_ticks(args.bin_width)
    hist = cross_correlation(stream, bin_width, tau_range)
    n1, n2 = stream.rates()
    peaks = normalize_peak_counts(integrate_peaks(hist, theta, theta),
                                  n1, n2, theta, stream.duration_seconds)
    export_csv(peaks, _out(args, "peaks.csv"))
    fit = fit_blinking(peaks, theta / 1e3)
    return _finish_fit(fit, args, "blinking_fit.json")


def _cmd_fit_g2(args) -> int:
    stream = _load_stream(args.input)
    bin_width = _time_ticks(args.bin_width)
    tau_range = _time_ticks(args.range)
    hist = cross_correlation(stream, bin_width, tau_range)
    n1, n2 = stream.rates()
    g2 = normalize_g2(hist, n1, n2, stream.duration_seconds)
    export_csv(g2, _out(args, "g2.csv"))
    sigma = _time_ticks(args.irf_sigma) if args.irf_sigma else 0.0
    fit = fit_antibunching_cw(g2, IRFModel(sigma=sigma))
    return _finish_fit(fit, args, "g2_fit.json")


def _cmd_report(args) -> int:
    if not args.config:
        raise ConfigError("report requires --config")
    report = run_report(args.config, seed=args.seed, out_dir=args.out_dir)
    print(json.dumps(report, sort_keys=True, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hbtsim",
        description="simulate and analyze photon-correlation streams of a "
                    "blinking single-photon emitter",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a stream from a config")
    _add_common(p)
    p.add_argument("--out", default="stream.phtag")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("correlate", help="delay histogram of a stream")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--bin-width", default="0.128 ns")
    p.add_argument("--range", default="100 ns")
    p.add_argument("--estimator", choices=("cross", "start-stop"),
                   default="cross")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", default="correlation.csv")
    p.set_defaults(func=_cmd_correlate)

    p = sub.add_parser("fit-lifetime", help="pulse-decay lifetime fit")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--theta", default=None, help="pulse period, e.g. '50 ns'")
    p.add_argument("--bin-width", default="0.032 ns")
    p.add_argument("--window-start", default="1 ns",
                   help="fit-window offset after the decay peak")
    p.add_argument("--window-stop", default=None)
    p.set_defaults(func=_cmd_fit_lifetime)

    p = sub.add_parser("fit-saturation",
                       help="saturation-law fit of a power_uW,rate_cps CSV")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=_cmd_fit_saturation)

    p = sub.add_parser("fit-blinking", help="on/off dwell-time fit")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--theta", default=None)
    p.add_argument("--bin-width", default="1 ns")
    p.add_argument("--range", default="15 us")
    p.set_defaults(func=_cmd_fit_blinking)

    p = sub.add_parser("fit-g2", help="cw antibunching fit")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--bin-width", default="0.128 ns")
    p.add_argument("--range", default="30 ns")
    p.add_argument("--irf-sigma", default=None,
                   help="Gaussian IRF sigma, e.g. '212 ps'")
    p.set_defaults(func=_cmd_fit_g2)

    p = sub.add_parser("report", help="run the configured pipeline")
    _add_common(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnitError, ValueError, TimeTagFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
