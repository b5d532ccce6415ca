"""ARMA(1,1)-with-intercept baseline, fit by conditional sum of squares.

Parameterization (the intercept is the regression constant, not the mean):

    y[t] = c + ar * y[t-1] + e[t] + ma * e[t-1]

Residual recursion with a zero initial residual, summed from the second
observation:

    e[1] = 0
    e[t] = y[t] - c - ar * y[t-1] - ma * e[t-1]    t = 2..N

The one-step forecast from a history is c + ar * y[N] + ma * e[N] with e[N]
from the same recursion. Stationarity (|ar| < 1) and invertibility
(|ma| < 1) are enforced through optimizer bounds; when the optimizer sticks
to a bound or fails, the fit falls back to plain AR(1) least squares with a
warning.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

logger = logging.getLogger(__name__)

_BOUND = 0.999
_STICKY = 0.995  # treat |coef| above this as boundary-stuck
_MIN_OBS = 10
_VAR_TOL = 1e-12


@dataclass(frozen=True)
class ArimaModel:
    ar: float
    ma: float
    intercept: float
    sigma2: float
    css: float
    n_obs: int
    converged: bool
    fallback: bool  # AR(1) least-squares fallback was used

    def __post_init__(self):
        if abs(self.ar) >= 1.0:
            raise ValueError(f"ar coefficient {self.ar} violates stationarity")
        if abs(self.ma) >= 1.0:
            raise ValueError(f"ma coefficient {self.ma} violates invertibility")


def css_residuals(ar: float, ma: float, intercept: float, y: np.ndarray) -> np.ndarray:
    """Residuals e[2..N] of the recursion (e[1] = 0 by convention)."""
    z = y[1:] - intercept - ar * y[:-1]
    # e[t] + ma*e[t-1] = z[t] is an order-1 IIR filter with zero initial state.
    return signal.lfilter([1.0], [1.0, ma], z)


def _css(params: np.ndarray, y: np.ndarray) -> float:
    c, ar, ma = params
    e = css_residuals(ar, ma, c, y)
    return float(e @ e)


def _ar1_least_squares(y: np.ndarray) -> tuple[float, float]:
    """OLS of y[t] on (1, y[t-1]); returns (intercept, slope)."""
    x = y[:-1]
    t = y[1:]
    var = float(np.var(x))
    if var < _VAR_TOL:
        return float(y.mean()), 0.0
    slope = float(np.cov(x, t, bias=True)[0, 1] / var)
    slope = float(np.clip(slope, -_BOUND, _BOUND))
    return float(t.mean() - slope * x.mean()), slope


def fit_arima(series) -> ArimaModel:
    """Fit the model to a series of at least ``10`` points."""
    y = np.asarray(series, dtype=float)
    if y.ndim != 1:
        raise ValueError(f"series must be 1-d, got shape {y.shape}")
    if len(y) < _MIN_OBS:
        raise ValueError(f"need at least {_MIN_OBS} observations, got {len(y)}")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    n = len(y)
    if float(np.var(y)) < _VAR_TOL:
        # Constant series: the recursion is already exact with zero residuals.
        return ArimaModel(
            ar=0.0,
            ma=0.0,
            intercept=float(y.mean()),
            sigma2=0.0,
            css=0.0,
            n_obs=n,
            converged=True,
            fallback=False,
        )

    centered = y - y.mean()
    denom = float(centered @ centered)
    rho1 = float(centered[1:] @ centered[:-1] / denom) if denom > 0 else 0.0
    ar0 = float(np.clip(rho1, -0.9, 0.9))
    x0 = np.array([float(y.mean()) * (1.0 - ar0), ar0, 0.0])
    res = optimize.minimize(
        _css,
        x0,
        args=(y,),
        method="L-BFGS-B",
        bounds=[(None, None), (-_BOUND, _BOUND), (-_BOUND, _BOUND)],
    )
    c, ar, ma = (float(v) for v in res.x)
    stuck = abs(ar) >= _STICKY or abs(ma) >= _STICKY
    if res.success and not stuck:
        e = css_residuals(ar, ma, c, y)
        dof = max(len(e) - 3, 1)
        return ArimaModel(
            ar=ar,
            ma=ma,
            intercept=c,
            sigma2=float(e @ e) / dof,
            css=float(e @ e),
            n_obs=n,
            converged=True,
            fallback=False,
        )

    reason = "boundary-stuck coefficients" if stuck else f"optimizer failed: {res.message}"
    warnings.warn(f"ARMA(1,1) fit fell back to AR(1) least squares ({reason})", stacklevel=2)
    c, ar = _ar1_least_squares(y)
    e = y[1:] - c - ar * y[:-1]
    dof = max(len(e) - 2, 1)
    return ArimaModel(
        ar=ar,
        ma=0.0,
        intercept=c,
        sigma2=float(e @ e) / dof,
        css=float(e @ e),
        n_obs=n,
        converged=bool(res.success),
        fallback=True,
    )


def forecast_arima(model: ArimaModel, history) -> float:
    """One-step-ahead forecast from the end of ``history``."""
    y = np.asarray(history, dtype=float)
    if y.ndim != 1 or len(y) == 0:
        raise ValueError("history must be a non-empty 1-d series")
    if len(y) == 1:
        last_resid = 0.0
    else:
        last_resid = float(css_residuals(model.ar, model.ma, model.intercept, y)[-1])
    return model.intercept + model.ar * float(y[-1]) + model.ma * last_resid
