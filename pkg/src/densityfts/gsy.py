"""Two-stage FPCA + scalar factor model competitor.

1. FPCA of every (state, gender) series separately, keeping ``p0`` scores.
2. For each score index ``j``, the ``T x n_states`` panel of ``j``-th scores
   is reduced to ``r`` factors by the eigendecomposition of its covariance.
3. Each factor is forecast with automatic ARIMA; the forecast factors rebuild
   the score forecasts and then the curves.

Genders are modelled separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .ftsa import fpca, longrun_cov, parse_k_rule, select_K_evr
from .panel import DensityPanel
from .pipeline import ForecastSet, PipelineConfig, back_transform, forecast_series, transformed_values


@dataclass(frozen=True)
class ScoreFactors:
    mean: np.ndarray        # (n_states,)
    loadings: np.ndarray    # (n_states, r)
    factors: np.ndarray     # (T, r)
    eigenvalues: np.ndarray

    @property
    def r(self) -> int:
        return self.loadings.shape[1]

    def reconstruct(self, factors=None):
        f = self.factors if factors is None else np.asarray(factors, dtype=float)
        return self.mean + f @ self.loadings.T


def fit_score_factors(scores, r_rule="evr") -> ScoreFactors:
    """Scalar factor model of a ``(T, n_states)`` score panel via PCA.

    ``r_rule`` is ``"evr"`` (eigenvalue ratio with ``T`` = series length) or a
    fixed number of factors, which may not exceed ``n_states``.
    """
    z = np.asarray(scores, dtype=float)
    if z.ndim != 2:
        raise DomainError("score panel must be (T, n_states)")
    T, n = z.shape
    rule = parse_k_rule(r_rule)
    if rule != "evr" and rule > n:
        raise DomainError(f"r = {rule} exceeds the number of series ({n})")
    mean = z.mean(axis=0)
    zc = z - mean
    cov = zc.T @ zc / T
    lam, vec = np.linalg.eigh(0.5 * (cov + cov.T))
    lam, vec = lam[::-1], vec[:, ::-1]
    scale = max(float(np.trace(z.T @ z)) / T, np.finfo(float).tiny)
    lam = np.where(lam > 1e-24 * scale, lam, 0.0)
    if rule == "evr":
        r = select_K_evr(lam, T) if lam[0] > 0 else 0
    else:
        r = rule
    lead = np.argmax(np.abs(vec), axis=0)
    signs = np.sign(vec[lead, np.arange(n)])
    signs[signs == 0] = 1.0
    vec = vec * signs
    loadings = vec[:, :r]
    return ScoreFactors(mean, loadings, zc @ loadings, lam)


def gsy_two_stage(
    panel: DensityPanel,
    H: int,
    p0: int = 6,
    r_rule="evr",
    config: PipelineConfig | None = None,
) -> ForecastSet:
    """Forecast with the two-stage FPCA/factor approach.

    With ``config.clr`` the curves are clr transformed and the forecasts are
    mapped back by inverse clr; without it the raw densities are modelled and
    negative forecasts are set to zero before renormalising to the radix.
    The first-stage FPCA uses the long-run covariance with the configured
    kernel and bandwidth.
    """
    config = PipelineConfig() if config is None else config
    if H < 1:
        raise DomainError("horizon must be at least 1")
    if p0 < 1:
        raise DomainError("p0 must be at least 1")
    rule = parse_k_rule(r_rule)
    if rule != "evr" and rule > panel.n_states:
        raise DomainError(f"r = {rule} exceeds the number of states ({panel.n_states})")
    y = transformed_values(panel, config.clr)
    w = panel.grid.weights
    n_s, _, T, p = y.shape
    out = np.empty((n_s, 2, H, p))
    diagnostics = {"p0": p0, "genders": {}}
    for g, gender in enumerate(panel.genders):
        models = []
        for i in range(n_s):
            cov = longrun_cov(y[i, g], config.kernel, config.bandwidth, w)
            models.append(fpca(cov, y[i, g], min(p0, p)))
        k = min(m.K for m in models)
        score_fc = np.zeros((H, n_s, k))
        g_diag = {"r": [], "arima": []}
        for j in range(k):
            z = np.column_stack([m.scores[:, j] for m in models])
            fac = fit_score_factors(z, r_rule)
            if fac.r:
                f_fc, orders = forecast_series(fac.factors, H, config)
            else:
                f_fc, orders = np.zeros((H, 0)), []
            score_fc[:, :, j] = fac.reconstruct(f_fc)
            g_diag["r"].append(fac.r)
            g_diag["arima"].append(orders)
        for i, m in enumerate(models):
            out[i, g] = m.mean + score_fc[:, i, :] @ m.basis[:k]
        diagnostics["genders"][gender] = g_diag
    density = back_transform(out, panel.grid, panel.radix, config.clr)
    return ForecastSet(
        "gsy" if config.clr else "gsy_noclr", panel.grid, panel.states, panel.genders,
        panel.years[-1], density, out if config.clr else None, panel.radix, diagnostics,
    )
