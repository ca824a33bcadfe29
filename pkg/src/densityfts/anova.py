"""Two-way functional ANOVA of a clr panel (state x gender, years as replicates).

Both estimators split each curve into ``mu + alpha_s + beta_g + residual``.
The residual is always computed as the exact remainder, so reconstruction is
exact whatever the estimator did.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coda import ClrPanel
from .errors import DomainError


@dataclass(frozen=True)
class AnovaFit:
    mu: np.ndarray          # (p,)
    alpha: np.ndarray       # (n_states, p)
    beta: np.ndarray        # (2, p)
    residuals: ClrPanel     # time-varying part, same shape as the input
    method: str
    iterations: int = 0
    converged: bool = True

    def deterministic(self) -> np.ndarray:
        """The time-invariant surface ``mu + alpha_s + beta_g`` as ``(n_states, 2, p)``."""
        return self.mu[None, None, :] + self.alpha[:, None, :] + self.beta[None, :, :]


def _check(panel: ClrPanel):
    if panel.n_states < 2:
        raise DomainError("two-way ANOVA needs at least two states")
    if panel.n_years < 1:
        raise DomainError("two-way ANOVA needs at least one year")
    if not np.all(np.isfinite(panel.values)):
        raise DomainError("panel contains non-finite values")


def _remainder(panel, mu, alpha, beta):
    y = panel.values
    return y - mu[None, None, None, :] - alpha[:, None, None, :] - beta[None, :, None, :]


def fm_anova(panel: ClrPanel) -> AnovaFit:
    """Mean-based estimator; effects sum to zero over states and over genders."""
    _check(panel)
    y = panel.values
    mu = y.mean(axis=(0, 1, 2))
    alpha = y.mean(axis=(1, 2)) - mu
    beta = y.mean(axis=(0, 2)) - mu
    resid = _remainder(panel, mu, alpha, beta)
    return AnovaFit(mu, alpha, beta, panel.with_values(resid), "fm")


def fmp_anova(panel: ClrPanel, tol: float | None = None, max_iter: int = 50) -> AnovaFit:
    """Functional median polish, applied pointwise in age.

    The grand effect is initialised at the pointwise median of the whole
    panel.  Each sweep removes row medians (per state, pooling genders and
    years) and then column medians (per gender, pooling states and years),
    moving the median of the opposite effect into the grand effect.  Sweeps
    stop once the largest adjustment is at most ``tol``; ``iterations`` counts
    the sweeps run, including the one that confirmed convergence.

    Not converging within ``max_iter`` sweeps sets ``converged=False``.
    """
    _check(panel)
    y = panel.values
    if tol is None:
        tol = 1e-8 * float(np.ptp(y))
    if tol < 0:
        raise DomainError("tol must be nonnegative")
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")

    mu = np.median(y, axis=(0, 1, 2))
    z = y - mu
    alpha = np.zeros((y.shape[0], y.shape[3]))
    beta = np.zeros((y.shape[1], y.shape[3]))
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        row = np.median(z, axis=(1, 2))
        z = z - row[:, None, None, :]
        alpha = alpha + row
        shift = np.median(beta, axis=0)
        beta = beta - shift
        mu = mu + shift

        col = np.median(z, axis=(0, 2))
        z = z - col[None, :, None, :]
        beta = beta + col
        shift = np.median(alpha, axis=0)
        alpha = alpha - shift
        mu = mu + shift

        if max(np.abs(row).max(), np.abs(col).max()) <= tol:
            converged = True
            break

    shift = np.median(alpha, axis=0)
    alpha, mu = alpha - shift, mu + shift
    shift = np.median(beta, axis=0)
    beta, mu = beta - shift, mu + shift
    resid = _remainder(panel, mu, alpha, beta)
    return AnovaFit(mu, alpha, beta, panel.with_values(resid), "fmp", sweeps, converged)


def reconstruct(fit: AnovaFit) -> ClrPanel:
    d = fit.deterministic()
    return fit.residuals.with_values(d[:, :, None, :] + fit.residuals.values)


def decompose(panel: ClrPanel, method: str = "fm", **kwargs) -> AnovaFit:
    if method == "fm":
        return fm_anova(panel)
    if method == "fmp":
        return fmp_anova(panel, **kwargs)
    raise DomainError(f"unknown decomposition {method!r}; expected 'fm' or 'fmp'")
