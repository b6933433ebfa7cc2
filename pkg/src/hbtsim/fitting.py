"""Damped least-squares core shared by all estimators.

A compact lambda-adaptive (Levenberg-style) minimizer of weighted squared
residuals with analytic Jacobians: the damping parameter scales the
diagonal of the normal matrix, is divided by ten after an accepted step
and multiplied by ten after a rejected one.  On a singular Jacobian the
minimizer falls back to a derivative-free Nelder-Mead simplex.  Standard
errors come from the inverse weighted normal matrix, optionally scaled by
the reduced chi-square when the weights are not true inverse variances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

__all__ = ["FitResult", "damped_least_squares", "jacobian_fd"]

MAX_ITERATIONS = 500
REL_STEP_TOL = 1e-8


@dataclass(frozen=True)
class FitResult:
    """Parameter estimates with uncertainties and convergence diagnostics.

    ``parameters``/``standard_errors``/``units`` are keyed by parameter
    name; ``residual_norm`` is the root of the weighted sum of squared
    residuals at the solution.
    """

    parameters: dict[str, float]
    standard_errors: dict[str, float]
    units: dict[str, str]
    residual_norm: float
    iterations: int
    converged: bool
    message: str = ""

    def __post_init__(self):
        if self.converged:
            values = list(self.parameters.values()) + \
                list(self.standard_errors.values()) + [self.residual_norm]
            if not np.all(np.isfinite(values)):
                raise ValueError("a converged fit must have finite estimates")

    def to_dict(self) -> dict:
        """JSON-ready report: per-parameter value/unit/std_error plus
        convergence diagnostics."""
        return {
            "parameters": {
                name: {
                    "value": self.parameters[name],
                    "unit": self.units.get(name, ""),
                    "std_error": self.standard_errors.get(name, float("nan")),
                }
                for name in self.parameters
            },
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "message": self.message,
        }


def jacobian_fd(model: Callable, x: np.ndarray, params: np.ndarray,
                rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of ``model(x, params)`` with
    respect to ``params``; the reference for the analytic Jacobians."""
    params = np.asarray(params, dtype=float)
    jac = np.empty((np.asarray(x).shape[0] if np.ndim(x) else 1, params.size))
    for j in range(params.size):
        h = rel_step * max(abs(params[j]), 1e-12)
        hi = params.copy()
        lo = params.copy()
        hi[j] += h
        lo[j] -= h
        jac[:, j] = (np.asarray(model(x, hi)) - np.asarray(model(x, lo))) / (2 * h)
    return jac


def _covariance(jac_w: np.ndarray, scale: float) -> np.ndarray | None:
    normal = jac_w.T @ jac_w
    try:
        cov = np.linalg.inv(normal)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(normal)
    cov = cov * scale
    if not np.all(np.isfinite(cov)):
        return None
    return cov


def damped_least_squares(
    residual_and_jac: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    x0,
    *,
    max_iterations: int = MAX_ITERATIONS,
    rel_step_tol: float = REL_STEP_TOL,
    lambda0: float = 1e-3,
    scale_errors_by_chi2: bool = False,
) -> tuple[np.ndarray, np.ndarray | None, int, bool, str]:
    """Minimize ``sum(r(p)**2)`` for weighted residuals ``r``.

    ``residual_and_jac(p)`` returns the weighted residual vector and its
    weighted Jacobian (d r / d p).  Returns ``(params, covariance,
    iterations, converged, message)``; ``covariance`` is ``None`` when it
    could not be formed.
    """
    p = np.asarray(x0, dtype=float).copy()
    r, jac = residual_and_jac(p)
    if not np.all(np.isfinite(r)):
        return p, None, 0, False, "residuals not finite at initial guess"
    cost = float(r @ r)
    lam = lambda0
    converged = False
    message = "iteration cap reached"
    n_iter = 0
    for n_iter in range(1, max_iterations + 1):
        if not np.all(np.isfinite(jac)):
            return _simplex_rescue(residual_and_jac, p,
                                   "non-finite Jacobian", n_iter,
                                   scale_errors_by_chi2)
        normal = jac.T @ jac
        diag = np.diag(normal).copy()
        if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
            return _simplex_rescue(residual_and_jac, p, "singular Jacobian",
                                   n_iter, scale_errors_by_chi2)
        grad = jac.T @ r
        accepted = False
        for _ in range(50):
            try:
                step = np.linalg.solve(normal + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                return _simplex_rescue(residual_and_jac, p,
                                       "singular normal matrix", n_iter,
                                       scale_errors_by_chi2)
            trial = p + step
            r_trial, jac_trial = residual_and_jac(trial)
            if np.all(np.isfinite(r_trial)):
                cost_trial = float(r_trial @ r_trial)
                if cost_trial <= cost:
                    rel_change = np.max(
                        np.abs(step) / np.maximum(np.abs(p), 1e-300))
                    p, r, jac, cost = trial, r_trial, jac_trial, cost_trial
                    lam = max(lam / 10.0, 1e-12)
                    accepted = True
                    if rel_change < rel_step_tol:
                        converged = True
                        message = "relative parameter change below tolerance"
                    break
            lam *= 10.0
            if lam > 1e12:
                break
        if converged:
            break
        if not accepted:
            # no downhill step found at any damping: treat as converged
            # to a stationary point
            converged = True
            message = "no further cost decrease"
            break
    scale = 1.0
    if scale_errors_by_chi2:
        dof = max(r.size - p.size, 1)
        scale = cost / dof
    cov = _covariance(jac, scale)
    if cov is None:
        converged = False
        message = "covariance not finite"
    return p, cov, n_iter, converged, message


def _simplex_rescue(residual_and_jac, p0, reason, n_iter,
                    scale_errors_by_chi2):
    """Derivative-free fallback used when the Jacobian degenerates."""
    def cost(p):
        r, _ = residual_and_jac(p)
        if not np.all(np.isfinite(r)):
            return 1e300
        return float(r @ r)

    res = minimize(cost, p0, method="Nelder-Mead",
                   options={"maxiter": 2000, "xatol": 1e-10, "fatol": 1e-12})
    p = np.asarray(res.x, dtype=float)
    r, jac = residual_and_jac(p)
    scale = 1.0
    if scale_errors_by_chi2:
        scale = float(r @ r) / max(r.size - p.size, 1)
    cov = _covariance(jac, scale) if np.all(np.isfinite(jac)) else None
    if cov is None:
        return p, None, n_iter, False, f"{reason}; simplex rescue without errors"
    return p, cov, n_iter + int(res.nit), bool(res.success), \
        f"{reason}; simplex rescue"
