"""Estimators inverting the forward models.

Each fit returns a :class:`~hbtsim.fitting.FitResult`; noise weighting is
inverse-variance with the Poisson variance estimate ``max(count, 1)``
wherever the data are counts.  Lifetimes are reported in ns, dwell times
in us, powers in uW, rates in counts/s.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .correlate import G2Curve, Histogram, PeakSeries
from .fitting import FitResult, damped_least_squares
from .model import PLETable, bunching_plateau
from .units import PS_PER_NS

__all__ = [
    "IRFModel",
    "fit_exponential_decay",
    "fit_antibunching_cw",
    "fit_rate_vs_power",
    "fit_saturation",
    "fit_blinking",
    "infer_detection_efficiency",
    "background_correct_g2",
    "ple_optimum",
    "cn_peak_jacobian",
    "saturation_jacobian",
]


@dataclass(frozen=True)
class IRFModel:
    """Instrument response of the correlation measurement: Gaussian with
    standard deviation ``sigma`` in ps.  For two identical detectors the
    pair-delay response is the single-detector jitter times sqrt(2)."""

    sigma: float
    shape: str = "gaussian"

    def __post_init__(self):
        if self.shape != "gaussian":
            raise ValueError("only a gaussian IRF shape is supported")
        if self.sigma < 0:
            raise ValueError("IRF sigma must be >= 0")


def _unconverged(names, units, message) -> FitResult:
    return FitResult(
        parameters={n: float("nan") for n in names},
        standard_errors={n: float("nan") for n in names},
        units=units, residual_norm=float("nan"), iterations=0,
        converged=False, message=message,
    )


def _result(names, units, p, cov, n_iter, converged, message,
            residual_norm) -> FitResult:
    if cov is None:
        errs = {n: float("nan") for n in names}
        converged = False
    else:
        errs = {n: float(np.sqrt(max(cov[i, i], 0.0)))
                for i, n in enumerate(names)}
    return FitResult(
        parameters={n: float(p[i]) for i, n in enumerate(names)},
        standard_errors=errs, units=units,
        residual_norm=float(residual_norm), iterations=n_iter,
        converged=bool(converged), message=message,
    )


# ---------------------------------------------------------------------------
# lifetime from a pulse-decay histogram

def fit_exponential_decay(hist: Histogram, fit_window: tuple[int, int]) -> FitResult:
    """Weighted least squares of ``A * exp(-t/T) + B`` on histogram counts
    inside ``fit_window`` (ticks).  The lifetime ``T`` is reported in ns.
    Returns an unconverged result (no exception) when fewer than 5 bins in
    the window hold counts.
    """
    names = ("lifetime", "amplitude", "offset")
    units = {"lifetime": "ns", "amplitude": "counts", "offset": "counts"}
    lo, hi = fit_window
    centers = hist.centers()
    sel = (centers >= lo) & (centers < hi)
    t = centers[sel] * hist.resolution_ps / PS_PER_NS  # ns
    y = hist.counts[sel].astype(np.float64)
    if np.count_nonzero(y) < 5:
        return _unconverged(names, units,
                            "fewer than 5 nonzero bins in the fit window")
    sqrt_w = 1.0 / np.sqrt(np.maximum(y, 1.0))

    b0 = float(np.percentile(y, 5))
    a0 = max(float(y.max()) - b0, 1.0)
    excess = np.clip(y - b0, 0.0, None)
    t0 = float(np.sum(excess * (t - t[0])) / max(np.sum(excess), 1.0))
    t0 = min(max(t0, (t[1] - t[0]) if t.size > 1 else 1.0), t[-1] - t[0] + 1.0)

    def residual_and_jac(p):
        lifetime, amp, off = p
        if lifetime <= 0:
            bad = np.full(y.size, np.inf)
            return bad, np.zeros((y.size, 3))
        decay = np.exp(-(t - t[0]) / lifetime)
        model = amp * decay + off
        jac = np.empty((y.size, 3))
        jac[:, 0] = amp * decay * (t - t[0]) / lifetime**2
        jac[:, 1] = decay
        jac[:, 2] = 1.0
        return (model - y) * sqrt_w, jac * sqrt_w[:, None]

    p, cov, n_iter, ok, msg = damped_least_squares(
        residual_and_jac, [t0, a0, b0])
    r, _ = residual_and_jac(p)
    return _result(names, units, p, cov, n_iter, ok, msg,
                   np.sqrt(float(r @ r)))


# ---------------------------------------------------------------------------
# cw antibunching

def _gauss_kernel(sigma: float, step: float) -> np.ndarray:
    half = int(np.ceil(4.0 * sigma / step))
    x = np.arange(-half, half + 1) * step
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _convolved_dip(tau: np.ndarray, step: float, kernel: np.ndarray | None):
    """Evaluator/Jacobian of ``beta - (beta - g0) exp(-|tau|/T)`` convolved
    with the (optional) IRF kernel on a uniform grid."""
    if kernel is None:
        grid = tau
    else:
        # extend the grid so the 'valid' convolution lands back on tau
        half = kernel.size // 2
        left = tau[0] - step * np.arange(half, 0, -1)
        right = tau[-1] + step * np.arange(1, half + 1)
        grid = np.concatenate((left, tau, right))

    def model_and_jac(p):
        t_decay, beta, g0 = p
        if t_decay <= 0:
            return None, None
        e = np.exp(-np.abs(grid) / t_decay)
        m = beta - (beta - g0) * e
        jac = np.empty((grid.size, 3))
        jac[:, 0] = -(beta - g0) * e * np.abs(grid) / t_decay**2
        jac[:, 1] = 1.0 - e
        jac[:, 2] = e
        if kernel is not None:
            m = np.convolve(m, kernel, mode="valid")
            jac = np.column_stack(
                [np.convolve(jac[:, j], kernel, mode="valid") for j in range(3)]
            )
        return m, jac

    return model_and_jac


def fit_antibunching_cw(curve: G2Curve, irf: IRFModel) -> FitResult:
    """Fit ``g2(tau) = beta - (beta - g0) exp(-|tau|/T)`` numerically
    convolved with the Gaussian IRF.  ``beta`` estimates the bunching
    plateau ``1 + T_off/T_on`` over the fitted window; the decay time is
    reported in ns.  Requires the curve to span at least +-10 expected
    decay times.
    """
    names = ("decay_time", "plateau", "central_value")
    units = {"decay_time": "ns", "plateau": "", "central_value": ""}
    tau = np.asarray(curve.tau_ps, dtype=float)
    y = np.asarray(curve.values, dtype=float)
    if tau.size < 8:
        raise ValueError("curve has too few bins to fit")
    step = float(np.mean(np.diff(tau)))
    if not np.allclose(np.diff(tau), step, rtol=1e-6, atol=1e-9):
        raise ValueError("curve must be sampled on a uniform delay grid")

    sig = np.asarray(curve.statistical_sigma, dtype=float)
    positive = sig[sig > 0]
    floor = positive.min() if positive.size else 1.0
    sqrt_w = 1.0 / np.maximum(sig, floor)

    # initial estimates: dip depth at the center, plateau from the outer
    # fifth of the window, decay time from the 1-1/e recovery point
    center = int(np.argmin(np.abs(tau)))
    g0_0 = float(y[center])
    n_outer = max(tau.size // 10, 2)
    beta_0 = float(np.mean(np.concatenate((y[:n_outer], y[-n_outer:]))))
    if beta_0 <= g0_0:
        beta_0 = g0_0 + max(0.1, 0.1 * abs(g0_0))
    target = g0_0 + (beta_0 - g0_0) * 0.632
    above = np.flatnonzero((y >= target) & (np.abs(tau) > 0))
    if above.size == 0:
        raise ValueError("curve never recovers toward its plateau")
    t0 = float(np.min(np.abs(tau[above])))
    t0 = max(t0, step)
    span = min(abs(tau[0]), abs(tau[-1]))
    if span < 10.0 * t0:
        raise ValueError(
            f"curve must span at least +-10 expected decay times "
            f"(~{t0:.3g} ps); have +-{span:.3g} ps"
        )

    kernel = None
    if irf.sigma > 0 and irf.sigma > step / 10.0:
        kernel = _gauss_kernel(irf.sigma, step)
    model_and_jac = _convolved_dip(tau, step, kernel)

    def residual_and_jac(p):
        m, jac = model_and_jac(p)
        if m is None:
            return np.full(y.size, np.inf), np.zeros((y.size, 3))
        return (m - y) * sqrt_w, jac * sqrt_w[:, None]

    p, cov, n_iter, ok, msg = damped_least_squares(
        residual_and_jac, [t0, beta_0, g0_0])
    r, _ = residual_and_jac(p)
    p = p.copy()
    p[0] /= PS_PER_NS  # decay time in ns
    if cov is not None:
        cov = cov.copy()
        cov[0, :] /= PS_PER_NS
        cov[:, 0] /= PS_PER_NS
    return _result(names, units, p, cov, n_iter, ok, msg,
                   np.sqrt(float(r @ r)))


# ---------------------------------------------------------------------------
# decay rate versus power

def fit_rate_vs_power(points) -> FitResult:
    """Ordinary least squares of decay rate (ns^-1) versus power (uW);
    the zero-power lifetime is ``1/intercept``."""
    names = ("intercept_rate", "slope", "lifetime")
    units = {"intercept_rate": "1/ns", "slope": "1/ns/uW", "lifetime": "ns"}
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two (power, rate) points")
    power, rate = pts[:, 0], pts[:, 1]
    if np.unique(power).size < 2:
        raise ValueError("need at least two distinct powers")
    design = np.column_stack((np.ones_like(power), power))
    coef, *_ = np.linalg.lstsq(design, rate, rcond=None)
    resid = rate - design @ coef
    rss = float(resid @ resid)
    dof = max(power.size - 2, 1)
    sigma2 = rss / dof if power.size > 2 else 0.0
    cov = sigma2 * np.linalg.inv(design.T @ design)
    intercept, slope = coef
    se_int, se_slope = np.sqrt(np.diag(cov))
    if intercept <= 0:
        return _unconverged(names, units, "non-positive intercept rate")
    lifetime = 1.0 / intercept
    se_life = se_int / intercept**2
    return FitResult(
        parameters={"intercept_rate": float(intercept), "slope": float(slope),
                    "lifetime": float(lifetime)},
        standard_errors={"intercept_rate": float(se_int),
                         "slope": float(se_slope), "lifetime": float(se_life)},
        units=units, residual_norm=np.sqrt(rss), iterations=1,
        converged=True, message="closed-form least squares",
    )


# ---------------------------------------------------------------------------
# saturation curve

def saturation_jacobian(power, r_inf: float, p_sat: float) -> np.ndarray:
    """Analytic Jacobian of the saturation law w.r.t. (r_inf, p_sat)."""
    p = np.asarray(power, dtype=float)
    jac = np.empty((p.size, 2))
    jac[:, 0] = p / (p + p_sat)
    jac[:, 1] = -r_inf * p / (p + p_sat) ** 2
    return jac


def fit_saturation(points, sigma=None) -> FitResult:
    """Damped least squares of ``R_inf * P / (P + P_sat)`` on
    (power uW, rate counts/s) points.

    ``sigma`` may give per-point rate uncertainties; without it the
    standard errors are scaled by the reduced chi-square.
    """
    names = ("r_inf", "p_sat")
    units = {"r_inf": "counts/s", "p_sat": "uW"}
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (power, rate) pairs")
    power, rate = pts[:, 0], pts[:, 1]
    if np.unique(power).size < 3:
        raise ValueError("need at least three distinct powers")
    if np.ptp(rate) == 0:
        return _unconverged(names, units, "degenerate data: all rates equal")
    sqrt_w = np.ones_like(rate) if sigma is None else 1.0 / np.asarray(sigma)

    def residual_and_jac(p):
        r_inf, p_sat = p
        if p_sat <= 0:
            return np.full(rate.size, np.inf), np.zeros((rate.size, 2))
        model = r_inf * power / (power + p_sat)
        jac = saturation_jacobian(power, r_inf, p_sat)
        return (model - rate) * sqrt_w, jac * sqrt_w[:, None]

    x0 = [2.0 * float(rate.max()), float(np.median(power))]
    p, cov, n_iter, ok, msg = damped_least_squares(
        residual_and_jac, x0, scale_errors_by_chi2=sigma is None)
    r, _ = residual_and_jac(p)
    return _result(names, units, p, cov, n_iter, ok, msg,
                   np.sqrt(float(r @ r)))


# ---------------------------------------------------------------------------
# blinking dwell times from the pulsed peak series

def cn_peak_jacobian(m, t_on: float, t_off: float, theta: float) -> np.ndarray:
    """Analytic Jacobian of the normalized-peak bunching model w.r.t.
    (t_on, t_off); times in one shared unit."""
    tau = np.abs(np.asarray(m, dtype=float)) * theta
    e = np.exp(-(1.0 / t_on + 1.0 / t_off) * tau)
    jac = np.empty((tau.size, 2))
    jac[:, 0] = (t_off / t_on**2) * e * (tau / t_on - 1.0)
    jac[:, 1] = (e / t_on) * (1.0 + tau / t_off)
    return jac


def fit_blinking(peaks: PeakSeries, theta: float) -> FitResult:
    """Fit the on/off dwell times (us) to the normalized side peaks
    ``C_N(m != 0)``; ``theta`` is the pulse period in ns.

    Initialization uses the plateau height ``C_N(+-1) - 1 ~ T_off/T_on``
    and the decay constant of ``|C_N(m) - 1|``.  Returns an unconverged
    result when no peak exceeds unity beyond its statistical error.
    """
    names = ("t_on", "t_off")
    units = {"t_on": "us", "t_off": "us"}
    if peaks.normalized is None:
        raise ValueError("peak series must be normalized first")
    side = peaks.indices != 0
    if np.count_nonzero(peaks.indices >= 1) < 4 or \
            np.count_nonzero(peaks.indices <= -1) < 4:
        raise ValueError("need at least 4 side peaks on each side")
    m = peaks.indices[side]
    cn = peaks.normalized[side]
    raw = peaks.raw_counts[side].astype(np.float64)
    with_counts = raw > 0
    if not np.any(with_counts):
        return _unconverged(names, units, "empty peak series")
    denom = float(np.median(raw[with_counts] / cn[with_counts]))
    sigma = np.sqrt(np.maximum(raw, 1.0)) / denom
    if np.all(cn - 1.0 <= sigma):
        return _unconverged(names, units,
                            "no bunching: all side peaks at or below unity")
    sqrt_w = 1.0 / sigma

    theta_us = theta / 1e3
    tau = np.abs(m) * theta_us
    # plateau height from the innermost peaks, decay constant from the
    # exponential trend of the excess over unity
    inner = np.abs(m) == np.min(np.abs(m))
    h = float(np.mean(cn[inner]) - 1.0)
    h = max(h, 1e-3)
    excess = cn - 1.0
    usable = excess > np.maximum(0.05 * h, 1e-12)
    if np.count_nonzero(usable) >= 3 and np.ptp(tau[usable]) > 0:
        slope = np.polyfit(tau[usable], np.log(excess[usable]), 1)[0]
        s0 = max(-slope, 1e-9)
    else:
        s0 = 1.0 / max(tau.max(), theta_us)
    t_on0 = (1.0 + 1.0 / h) / s0
    t_off0 = (1.0 + h) / s0

    def residual_and_jac(p):
        t_on, t_off = p
        if t_on <= 0 or t_off <= 0:
            return np.full(cn.size, np.inf), np.zeros((cn.size, 2))
        e = np.exp(-(1.0 / t_on + 1.0 / t_off) * tau)
        model = 1.0 + (bunching_plateau(t_on, t_off) - 1.0) * e
        jac = cn_peak_jacobian(m, t_on, t_off, theta_us)
        return (model - cn) * sqrt_w, jac * sqrt_w[:, None]

    p, cov, n_iter, ok, msg = damped_least_squares(
        residual_and_jac, [t_on0, t_off0])
    r, _ = residual_and_jac(p)
    return _result(names, units, p, cov, n_iter, ok, msg,
                   np.sqrt(float(r @ r)))


# ---------------------------------------------------------------------------
# scalar inversions

def infer_detection_efficiency(r_inf: float, t_on: float, t_off: float,
                               theta: float) -> float:
    """Invert the saturated-rate prediction: overall detection efficiency
    from the saturated rate (counts/s), dwell times (us) and pulse period
    (ns)."""
    if min(r_inf, t_on, t_off, theta) <= 0:
        raise ValueError("all arguments must be > 0")
    return r_inf * (theta / 1e9) * (t_on + t_off) / t_on


def background_correct_g2(g_measured_0: float, signal_to_background: float,
                          sigma: float | None = None) -> float:
    """Correct a measured central g2 value for Poissonian background.

    With signal fraction ``p = rho/(1+rho)`` the background floor is
    ``1 - p**2``; the corrected value ``(g - (1-p^2))/p^2`` is clamped at
    zero.  A warning is issued when the raw corrected value is more than
    3 sigma below zero (``sigma`` is the uncertainty of the measured
    value).
    """
    if signal_to_background <= 0:
        raise ValueError("signal_to_background must be > 0")
    if g_measured_0 < 0:
        raise ValueError("g_measured_0 must be >= 0")
    p = signal_to_background / (1.0 + signal_to_background)
    corrected = (g_measured_0 - (1.0 - p * p)) / (p * p)
    if sigma is not None and corrected < -3.0 * sigma / (p * p):
        warnings.warn(
            "background-corrected g2(0) is more than 3 sigma below zero; "
            "the supplied signal-to-background ratio looks inconsistent",
            stacklevel=2,
        )
    return max(corrected, 0.0)


def ple_optimum(table: PLETable, filter_edge: float,
                guard: float = 15.0) -> tuple[float, float]:
    """Best excitation wavelength from an excitation-spectrum table.

    Returns the (wavelength, signal-to-background ratio) row maximizing
    the ratio among wavelengths at least ``guard`` nm below the long-pass
    ``filter_edge``; ties go to the longer wavelength.
    """
    wl = table.wavelengths
    admissible = wl <= filter_edge - guard
    if not np.any(admissible):
        raise ValueError("no admissible wavelengths below the filter edge")
    with np.errstate(divide="ignore"):
        ratios = np.where(table.background_rates > 0,
                          table.signal_rates / table.background_rates, np.inf)
    ratios = np.where(admissible, ratios, -np.inf)
    best = ratios.max()
    idx = int(np.flatnonzero(ratios == best)[-1])
    return float(wl[idx]), float(best)
