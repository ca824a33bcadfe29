"""Non-seasonal ARIMA for principal-component score series.

Model for the ``d``-times differenced series ``w``::

    w_t = psi + sum_i tau_i w_{t-i} + e_t + sum_j nu_j e_{t-j}

Estimation minimises the conditional sum of squares (CSS): the first
``condition`` observations are conditioned on and pre-sample innovations are
zero.  Pure AR models are solved exactly by least squares; models with MA
terms start from a Hannan-Rissanen regression and are refined with
Nelder-Mead.  Order selection follows the usual automatic recipe: KPSS picks
``d``, AICc picks ``(p, q)`` from an exhaustive grid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from . import _css
from .errors import DomainError

KPSS_CRITICAL_5PCT = 0.463
ROOT_TOL = 1e-6
# Candidates with an AR or MA root of modulus below 1.01 are discarded, as in
# the Hyndman-Khandakar search; CSS fits on the MA unit circle are spurious.
NEAR_UNIT_RADIUS = 1.0 / 1.01


def kpss_statistic(series, lags: int | None = None) -> float:
    """Level-stationarity KPSS statistic with a Bartlett long-run variance.

    The lag truncation defaults to ``floor(4 (T/100)^{1/4})``.  A constant
    series returns 0.
    """
    x = np.asarray(series, dtype=float)
    T = x.size
    if T < 10:
        raise DomainError("KPSS needs at least 10 observations")
    if np.ptp(x) <= 1e-12 * max(1.0, float(np.max(np.abs(x)))):
        return 0.0
    e = x - x.mean()
    if lags is None:
        lags = int(math.floor(4.0 * (T / 100.0) ** 0.25))
    lags = min(lags, T - 1)
    s2 = e @ e / T
    for lag in range(1, lags + 1):
        s2 += 2.0 * (1.0 - lag / (lags + 1.0)) * (e[lag:] @ e[:-lag]) / T
    if not s2 > 0:
        return 0.0
    partial = np.cumsum(e)
    return float(partial @ partial / (T * T * s2))


def ar_is_stationary(ar, tol=ROOT_TOL) -> bool:
    """True when every root of ``1 - sum tau_i z^i`` lies outside the unit circle."""
    return _companion_radius(np.asarray(ar, dtype=float)) < 1.0 - tol


def ma_is_invertible(ma, tol=ROOT_TOL) -> bool:
    return _companion_radius(-np.asarray(ma, dtype=float)) < 1.0 - tol


def _companion_radius(coef):
    if coef.size == 0:
        return 0.0
    if not np.all(np.isfinite(coef)):
        return np.inf
    comp = np.zeros((coef.size, coef.size))
    comp[0] = coef
    comp[1:, :-1] = np.eye(coef.size - 1)
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


@dataclass(frozen=True)
class ArimaFit:
    order: tuple            # (p, d, q)
    ar: np.ndarray
    ma: np.ndarray
    intercept: float
    include_intercept: bool
    sigma2: float
    aicc: float
    loglik: float
    condition: int
    nobs: int
    fallback: bool = False
    notes: tuple = field(default=())

    @property
    def p(self):
        return self.order[0]

    @property
    def d(self):
        return self.order[1]

    @property
    def q(self):
        return self.order[2]

    def describe(self) -> str:
        p, d, q = self.order
        return f"ARIMA({p},{d},{q}){'+c' if self.include_intercept else ''}"


def _residuals(w, ar, ma, psi, condition):
    return _css.css_residuals(
        np.ascontiguousarray(w, dtype=float), float(psi),
        np.asarray(ar, dtype=float), np.asarray(ma, dtype=float), int(condition),
    )


def _unpack(theta, p, q, with_c):
    k = 1 if with_c else 0
    psi = float(theta[0]) if with_c else 0.0
    return psi, np.asarray(theta[k : k + p]), np.asarray(theta[k + p : k + p + q])


def _lagmatrix(w, lags, start):
    n = w.size
    return np.column_stack([w[start - i : n - i] for i in range(1, lags + 1)]) if lags else np.empty((n - start, 0))


def _coef_to_pacf(phi):
    """Step-down recursion from AR coefficients to partial autocorrelations."""
    phi = np.array(phi, dtype=float)
    kappa = np.empty(phi.size)
    for k in range(phi.size, 0, -1):
        r = phi[k - 1]
        kappa[k - 1] = r
        if abs(r) >= 1.0:
            return None
        phi = (phi[: k - 1] + r * phi[: k - 1][::-1]) / (1.0 - r * r)
    return kappa


def _to_unconstrained(coef):
    kappa = _coef_to_pacf(coef)
    if kappa is None or np.any(np.abs(kappa) >= 0.99):
        kappa = np.clip(np.nan_to_num(kappa) if kappa is not None else np.zeros(len(coef)), -0.9, 0.9)
    return np.arctanh(kappa)


def _initial(w, p, q, with_c, condition):
    """Least squares for pure AR, Hannan-Rissanen otherwise."""
    n = w.size
    if q == 0:
        X = _lagmatrix(w, p, condition)
        if with_c:
            X = np.column_stack([np.ones(n - condition), X])
        if X.shape[1] == 0:
            return np.empty(0)
        coef, *_ = np.linalg.lstsq(X, w[condition:], rcond=None)
        return coef
    long_order = int(min(max(p + q + 2, 6), max(1, (n - condition) // 3)))
    X = _lagmatrix(w, long_order, long_order)
    X = np.column_stack([np.ones(n - long_order), X])
    coef, *_ = np.linalg.lstsq(X, w[long_order:], rcond=None)
    ehat = np.zeros(n)
    ehat[long_order:] = w[long_order:] - X @ coef
    start = long_order + max(p, q)
    cols = [np.ones(n - start)] if with_c else []
    cols += [w[start - i : n - i] for i in range(1, p + 1)]
    cols += [ehat[start - j : n - j] for j in range(1, q + 1)]
    X2 = np.column_stack(cols)
    if n - start <= X2.shape[1]:
        psi = [float(w.mean())] if with_c else []
        return np.array(psi + [0.0] * (p + q))
    coef2, *_ = np.linalg.lstsq(X2, w[start:], rcond=None)
    return coef2


def fit_arima(series, order, include_intercept: bool | None = None, condition: int | None = None) -> ArimaFit:
    """Fit one ARIMA(p, d, q) by conditional sum of squares.

    ``include_intercept`` defaults to ``d <= 1``.  ``condition`` (default
    ``p``) is the number of leading differenced observations conditioned on;
    a shared value makes AICc comparable across AR orders.
    """
    p, d, q = (int(v) for v in order)
    if min(p, d, q) < 0:
        raise DomainError("ARIMA orders must be nonnegative")
    x = np.asarray(series, dtype=float)
    with_c = (d <= 1) if include_intercept is None else bool(include_intercept)
    w = np.ascontiguousarray(np.diff(x, n=d) if d else x.copy())
    condition = p if condition is None else int(condition)
    if condition < p:
        raise DomainError("condition must be at least p")
    n_eff = w.size - condition
    if n_eff < max(p + q + 2, 2):
        raise DomainError(f"too few observations ({w.size}) for ARIMA{(p, d, q)}")

    sig_floor = 1e-14 * max(float(np.mean(w * w)), np.finfo(float).tiny)

    def sse_coef(psi, ar, ma):
        e = _residuals(w, ar, ma, psi, condition)
        val = float(e @ e)
        return val if np.isfinite(val) else np.inf

    theta = _initial(w, p, q, with_c, condition)
    psi, ar, ma = _unpack(theta, p, q, with_c)
    notes = []
    stationary = ar_is_stationary(ar) and ma_is_invertible(ma)
    if q > 0 or not stationary:
        # The simplex search runs over partial autocorrelations (tanh-bounded),
        # so every trial point is stationary and invertible.
        if not stationary:
            notes.append("start projected into the stationary region")
        z0 = np.concatenate(([psi] if with_c else [], _to_unconstrained(ar), _to_unconstrained(-ma)))
        start_value = _css.css_free(z0, w, p, q, with_c, condition)
        scale = start_value if np.isfinite(start_value) and start_value > 0 else 1.0
        z, fval, _, ok = _css.nelder_mead(z0, w, p, q, with_c, condition, 1e-4, 1e-8 * scale, 300 * z0.size)
        if not (np.isfinite(fval) and fval <= start_value):
            z = z0
        if not ok:
            notes.append("Nelder-Mead stopped at its evaluation limit")
        psi, ar, ma = _css.unpack_free(z, p, q, with_c)
        psi = float(psi)
    value = sse_coef(psi, ar, ma)
    if not np.isfinite(value):
        raise DomainError(f"ARIMA{(p, d, q)} residuals are not finite")
    sigma2 = max(value / n_eff, sig_floor)
    loglik = -0.5 * n_eff * (math.log(2.0 * math.pi * sigma2) + 1.0)
    m = p + q + 1 + int(with_c)
    denom = n_eff - m - 1
    aicc = -2.0 * loglik + 2.0 * m + (2.0 * m * (m + 1) / denom if denom > 0 else np.inf)
    return ArimaFit(
        (p, d, q), np.array(ar, dtype=float), np.array(ma, dtype=float), psi, with_c,
        sigma2, aicc, loglik, condition, n_eff, notes=tuple(notes),
    )


def choose_d(series, max_d: int = 2) -> int:
    """Smallest ``d`` whose differenced series is not rejected by KPSS at 5%."""
    x = np.asarray(series, dtype=float)
    for d in range(max_d + 1):
        w = np.diff(x, n=d) if d else x
        if w.size < 10:
            return max(d - 1, 0)
        if kpss_statistic(w) <= KPSS_CRITICAL_5PCT:
            return d
    return max_d


def _random_walk_drift(x, note):
    w = np.diff(x)
    psi = float(w.mean()) if w.size else 0.0
    sigma2 = float(np.mean((w - psi) ** 2)) if w.size else 0.0
    return ArimaFit((0, 1, 0), np.empty(0), np.empty(0), psi, True, sigma2, np.nan, np.nan, 0, w.size, fallback=True, notes=(note,))


def _roots_clear(fit) -> bool:
    return _companion_radius(fit.ar) < NEAR_UNIT_RADIUS and _companion_radius(-fit.ma) < NEAR_UNIT_RADIUS


def auto_arima(series, max_p: int = 3, max_q: int = 3, max_d: int = 2) -> ArimaFit:
    """Automatic ARIMA: KPSS-chosen ``d``, exhaustive AICc search over ``(p, q)``.

    All candidates condition on the first ``max_p`` differenced values so their
    CSS likelihoods cover the same observations.  Candidates with a root
    of modulus below 1.01 are skipped.  An intercept (drift when
    ``d = 1``) is included when ``d <= 1``.  Ties keep the smaller model.
    If every candidate fails the result is a flagged random walk with drift.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 10:
        raise DomainError("auto_arima needs a 1-d series with at least 10 values")
    if not np.all(np.isfinite(x)):
        raise DomainError("series contains non-finite values")
    if np.ptp(x) <= 1e-12 * max(1.0, float(np.max(np.abs(x)))):
        mean = float(x.mean())
        return ArimaFit((0, 0, 0), np.empty(0), np.empty(0), mean, True, 0.0, np.nan, np.nan, 0, x.size, notes=("constant series",))
    d = choose_d(x, max_d)
    best = None
    for p, q in itertools.product(range(max_p + 1), range(max_q + 1)):
        try:
            fit = fit_arima(x, (p, d, q), condition=max_p)
        except (DomainError, np.linalg.LinAlgError, ValueError):
            continue
        if not np.isfinite(fit.aicc) or not _roots_clear(fit):
            continue
        if best is None or fit.aicc < best.aicc:
            best = fit
    if best is None:
        return _random_walk_drift(x, "all candidate fits failed")
    return best


@dataclass(frozen=True)
class ScoreForecast:
    values: np.ndarray
    fit: ArimaFit


def forecast_scores(fit: ArimaFit, series, H: int) -> ScoreForecast:
    """Iterated conditional-mean forecasts for horizons ``1..H``.

    Future innovations are zero; past innovations are the in-sample CSS
    residuals.  Level forecasts are obtained by integrating the differenced
    forecasts ``d`` times from the last observed values.
    """
    if H <= 0:
        raise DomainError("forecast horizon must be positive")
    x = np.asarray(series, dtype=float)
    p, d, q = fit.order
    levels = [x]
    for _ in range(d):
        levels.append(np.diff(levels[-1]))
    w = levels[-1]
    cond = min(fit.condition, w.size)
    e = np.zeros(w.size)
    if w.size > cond and (p or q):
        e[cond:] = _residuals(w, fit.ar, fit.ma, fit.intercept, cond)
    hist_w = list(w)
    hist_e = list(e)
    out = np.empty(H)
    for h in range(H):
        value = fit.intercept
        for i in range(1, p + 1):
            value += fit.ar[i - 1] * hist_w[-i]
        for j in range(1, q + 1):
            value += fit.ma[j - 1] * hist_e[-j]
        out[h] = value
        hist_w.append(value)
        hist_e.append(0.0)
    for level in reversed(levels[:-1]):
        out = level[-1] + np.cumsum(out)
    return ScoreForecast(out, fit)
