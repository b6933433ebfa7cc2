"""Physical parameter types and closed-form forward models.

Shared by the simulator and the estimators: the normalized-peak bunching
model for a blinking (on/off) emitter, the count-rate saturation law, the
saturated-rate prediction from duty cycle and detection efficiency, and
the linear pump-power dependence of the emitter's decay rate.

Unit conventions (also spelled out per field below): lifetimes in ns,
dwell times in us, powers in uW, count rates in counts/s, pulse periods
in ns.  The pump coefficient is the slope of the decay rate versus power
line in ns^-1 per mW.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EmitterParams",
    "ExcitationCW",
    "ExcitationPulsed",
    "DetectionParams",
    "SaturationParams",
    "PLETable",
    "bunching_plateau",
    "eval_cn_model",
    "eval_saturation",
    "predicted_saturated_rate",
    "decay_rate_at_power",
    "pump_coefficient_for_doubling",
    "paper_emitter",
    "paper_detection",
    "paper_saturation",
]


@dataclass(frozen=True)
class EmitterParams:
    """Physical parameters of one blinking emitter.

    Attributes
    ----------
    radiative_lifetime : float
        Excited-state lifetime in ns (decay time at zero pump power).
    t_on_mean : float
        Mean duration of emitting periods in us.
    t_off_mean : float
        Mean duration of dark periods in us.
    pump_coefficient : float
        Slope of the decay rate versus excitation power, ns^-1 per mW.
    """

    radiative_lifetime: float
    t_on_mean: float
    t_off_mean: float
    pump_coefficient: float

    def __post_init__(self):
        for name in ("radiative_lifetime", "t_on_mean", "t_off_mean",
                     "pump_coefficient"):
            if not getattr(self, name) > 0:
                raise ValueError(f"EmitterParams.{name} must be > 0")
        # the on/off picture assumes the radiative cycle is much faster
        # than the blinking dynamics
        lifetime_us = self.radiative_lifetime / 1e3
        if not (lifetime_us < self.t_on_mean and lifetime_us < self.t_off_mean):
            raise ValueError(
                "radiative_lifetime must be shorter than both dwell times"
            )


@dataclass(frozen=True)
class ExcitationCW:
    """Continuous-wave excitation: power in uW, wavelength in nm."""

    power: float
    wavelength: float = 765.0

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("ExcitationCW.power must be >= 0")
        if self.wavelength <= 0:
            raise ValueError("ExcitationCW.wavelength must be > 0")


@dataclass(frozen=True)
class ExcitationPulsed:
    """Pulsed excitation: repetition period in ns, excitation probability
    per pulse (probability that a pulse arriving during an emitting period
    promotes the emitter)."""

    rep_period: float
    excitation_prob: float

    def __post_init__(self):
        if self.rep_period <= 0:
            raise ValueError("ExcitationPulsed.rep_period must be > 0")
        if not 0.0 <= self.excitation_prob <= 1.0:
            raise ValueError("ExcitationPulsed.excitation_prob must be in [0, 1]")


@dataclass(frozen=True)
class DetectionParams:
    """Detection chain parameters for the two-detector setup.

    Attributes
    ----------
    overall_efficiency : float
        Probability that an emitted photon is detected on either channel,
        including collection optics and detector quantum efficiency.
    splitter_ratio : float
        Fraction of detected photons routed to channel 1.  ``1.0`` is
        accepted for single-channel checks.
    background_rate : float
        Stationary background rate per channel, counts/s.
    dead_time : float
        Per-channel dead time in ns.
    jitter_sigma : float
        Per-channel Gaussian timing jitter (one standard deviation) in ps.
    """

    overall_efficiency: float
    splitter_ratio: float = 0.5
    background_rate: float = 0.0
    dead_time: float = 50.0
    jitter_sigma: float = 150.0

    def __post_init__(self):
        # zero is accepted for background-only runs
        if not 0.0 <= self.overall_efficiency <= 1.0:
            raise ValueError("overall_efficiency must be in [0, 1]")
        if not 0.0 < self.splitter_ratio <= 1.0:
            raise ValueError("splitter_ratio must be in (0, 1]")
        if self.background_rate < 0:
            raise ValueError("background_rate must be >= 0")
        if self.dead_time < 0:
            raise ValueError("dead_time must be >= 0")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")


@dataclass(frozen=True)
class SaturationParams:
    """Saturation law parameters: asymptotic rate (counts/s) and
    saturation power (uW)."""

    rate_at_saturation: float
    saturation_power: float

    def __post_init__(self):
        if self.rate_at_saturation <= 0:
            raise ValueError("rate_at_saturation must be > 0")
        if self.saturation_power <= 0:
            raise ValueError("saturation_power must be > 0")


@dataclass(frozen=True)
class PLETable:
    """Excitation-spectrum table: rows of (wavelength nm, signal counts/s,
    background counts/s) with strictly increasing wavelength."""

    rows: tuple[tuple[float, float, float], ...] = field(default=())

    def __post_init__(self):
        rows = tuple(tuple(float(x) for x in row) for row in self.rows)
        object.__setattr__(self, "rows", rows)
        if len(rows) < 2:
            raise ValueError("PLETable needs at least 2 rows")
        wavelengths = [r[0] for r in rows]
        if any(b <= a for a, b in zip(wavelengths, wavelengths[1:])):
            raise ValueError("PLETable wavelengths must be strictly increasing")
        if any(r[1] < 0 or r[2] < 0 for r in rows):
            raise ValueError("PLETable rates must be >= 0")

    @property
    def wavelengths(self):
        return np.array([r[0] for r in self.rows])

    @property
    def signal_rates(self):
        return np.array([r[1] for r in self.rows])

    @property
    def background_rates(self):
        return np.array([r[2] for r in self.rows])


def bunching_plateau(t_on: float, t_off: float) -> float:
    """Zero-separation limit of the normalized bunching excess, 1 + t_off/t_on.

    Single definition shared by the pulsed peak model and the cw
    autocorrelation fit.
    """
    if t_on <= 0 or t_off <= 0:
        raise ValueError("dwell times must be > 0")
    return 1.0 + t_off / t_on


def eval_cn_model(m, t_on: float, t_off: float, theta: float):
    """Normalized coincidence counts of pulsed peak ``m != 0`` for a
    blinking emitter.

    ``t_on``, ``t_off`` and ``theta`` must share one time unit; ``m`` may
    be a scalar integer or an integer array.  Returns
    ``1 + (t_off/t_on) * exp(-(1/t_on + 1/t_off) * |m| * theta)``, which
    is even in ``m`` and decays to 1 for distant peaks.
    """
    if t_on <= 0 or t_off <= 0 or theta <= 0:
        raise ValueError("t_on, t_off and theta must be > 0")
    m_arr = np.asarray(m)
    if np.any(m_arr == 0):
        raise ValueError("eval_cn_model is undefined at the central peak m=0")
    decay = (1.0 / t_on + 1.0 / t_off) * np.abs(m_arr) * theta
    value = 1.0 + (bunching_plateau(t_on, t_off) - 1.0) * np.exp(-decay)
    return value if isinstance(value, np.ndarray) else float(value)


def eval_saturation(power, sat: SaturationParams):
    """Detected count rate at excitation ``power`` (uW) under the
    saturation law ``R_inf * P / (P + P_sat)``."""
    p = np.asarray(power, dtype=float)
    if np.any(p < 0):
        raise ValueError("power must be >= 0")
    value = sat.rate_at_saturation * p / (p + sat.saturation_power)
    return value if value.ndim else float(value)


def predicted_saturated_rate(det: DetectionParams, emitter: EmitterParams,
                             theta: float) -> float:
    """Saturated detection rate (counts/s): efficiency times emitter duty
    cycle times the pulse rate ``1/theta`` (theta in ns)."""
    if theta <= 0:
        raise ValueError("theta must be > 0")
    duty = emitter.t_on_mean / (emitter.t_on_mean + emitter.t_off_mean)
    return det.overall_efficiency * duty * 1e9 / theta


def decay_rate_at_power(power: float, emitter: EmitterParams):
    """Emitter decay rate 1/T in ns^-1 at cw excitation ``power`` (uW):
    the spontaneous rate plus the linear pump term."""
    p = np.asarray(power, dtype=float)
    if np.any(p < 0):
        raise ValueError("power must be >= 0")
    value = 1.0 / emitter.radiative_lifetime + emitter.pump_coefficient * (p / 1e3)
    return value if value.ndim else float(value)


def pump_coefficient_for_doubling(radiative_lifetime: float,
                                  saturation_power: float) -> float:
    """Pump slope (ns^-1/mW) such that the decay rate doubles between
    zero power and ``saturation_power`` (uW)."""
    return 1.0 / (radiative_lifetime * saturation_power / 1e3)


# Parameter sets matching the measured NE8 colour centre.

def paper_emitter() -> EmitterParams:
    return EmitterParams(
        radiative_lifetime=2.1,
        t_on_mean=9.1,
        t_off_mean=7.0,
        pump_coefficient=pump_coefficient_for_doubling(2.1, 66.0),
    )


def paper_detection(background_rate: float = 0.0) -> DetectionParams:
    return DetectionParams(
        overall_efficiency=35_000.0 * 50e-9 * (9.1 + 7.0) / 9.1,
        splitter_ratio=0.5,
        background_rate=background_rate,
    )


def paper_saturation() -> SaturationParams:
    return SaturationParams(rate_at_saturation=35_000.0, saturation_power=66.0)
