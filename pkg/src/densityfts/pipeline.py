"""End-to-end point forecasts for a density panel.

clr transform -> two-way functional ANOVA -> per-state gender-stacked FPCA of
the residual curves -> automatic ARIMA on every score series -> deterministic
part plus forecast residual -> inverse clr.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .anova import decompose
from .arima import auto_arima, forecast_scores
from .coda import ClrPanel, clr_values, inv_clr_values
from .errors import DensityFTSError, DomainError
from .ftsa import mfpca_stack, parse_k_rule
from .panel import AgeGrid, DensityCurve, DensityPanel, PanelKey


@dataclass(frozen=True)
class PipelineConfig:
    decomposition: str = "fm"
    k_rule: object = "evr"
    kernel: str = "bartlett"
    bandwidth: object = "plugin"
    horizon: int = 10
    clr: bool = True
    max_p: int = 3
    max_q: int = 3
    max_d: int = 2
    fmp_tol: float | None = None
    fmp_max_iter: int = 50

    def __post_init__(self):
        if self.decomposition not in ("fm", "fmp"):
            raise DomainError(f"decomposition must be 'fm' or 'fmp', got {self.decomposition!r}")
        parse_k_rule(self.k_rule)
        if self.kernel not in ("bartlett", "flat_top"):
            raise DomainError(f"unknown kernel {self.kernel!r}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "plugin":
                raise DomainError(f"bandwidth must be 'plugin' or a positive number, got {self.bandwidth!r}")
        elif not float(self.bandwidth) > 0:
            raise DomainError("bandwidth must be positive")
        if int(self.horizon) < 1:
            raise DomainError("horizon must be at least 1")

    def with_(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class ForecastSet:
    """Forecasts for horizons ``1..H`` beyond ``base_year``.

    ``density`` has shape ``(n_states, 2, H, p)`` and integrates to the radix
    along the last axis; ``clr`` has the same shape, or is ``None`` when the
    method never worked on the clr scale.
    """

    method: str
    grid: AgeGrid
    states: tuple
    genders: tuple
    base_year: int
    density: np.ndarray
    clr: np.ndarray | None
    radix: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.density.shape[2]

    @property
    def years(self):
        return tuple(self.base_year + h for h in range(1, self.horizon + 1))

    def _index(self, key):
        state, gender, year = key
        h = int(year) - self.base_year
        if not 1 <= h <= self.horizon:
            raise KeyError(key)
        return self.states.index(state), self.genders.index(gender), h - 1

    def __getitem__(self, key) -> DensityCurve:
        i, g, h = self._index(key)
        return DensityCurve(self.grid, self.density[i, g, h], self.radix)

    def clr_curve(self, key):
        from .coda import ClrCurve

        i, g, h = self._index(key)
        values = self.clr[i, g, h] if self.clr is not None else clr_values(self.density[i, g, h], self.grid)
        return ClrCurve(self.grid, values)

    def keys(self):
        for s in self.states:
            for g in self.genders:
                for y in self.years:
                    yield PanelKey(s, g, y)


def densities_from_raw(values, grid: AgeGrid, radix: float):
    """Map forecasts made without clr back to valid densities.

    Negative values are set to zero, each curve is renormalised to the radix
    and remaining zeros are floored at ``1e-5 * radix / p`` (then renormalised)
    so divergences stay finite.
    """
    v = np.where(np.asarray(values, dtype=float) > 0, values, 0.0)
    mass = grid.integrate(v)
    flat = mass <= 0
    if np.any(flat):
        v = np.where(flat[..., None], 1.0, v)
        mass = grid.integrate(v)
    v = v * (radix / mass)[..., None]
    floor = 1e-5 * radix / grid.p
    v = np.where(v > 0, v, floor)
    return v * (radix / grid.integrate(v))[..., None]


def transformed_values(panel: DensityPanel, use_clr: bool):
    return clr_values(panel.values, panel.grid) if use_clr else panel.values.copy()


def back_transform(values, grid, radix, use_clr: bool):
    if use_clr:
        return inv_clr_values(values, grid, radix)
    return densities_from_raw(values, grid, radix)


def forecast_series(series, H: int, config: PipelineConfig):
    """Auto-ARIMA forecasts for every column of a ``(T, m)`` score array."""
    series = np.asarray(series, dtype=float)
    out = np.zeros((H, series.shape[1]))
    orders = []
    for j in range(series.shape[1]):
        fit = auto_arima(series[:, j], config.max_p, config.max_q, config.max_d)
        out[:, j] = forecast_scores(fit, series[:, j], H).values
        orders.append(fit.describe() + (" fallback" if fit.fallback else ""))
    return out, orders


def forecast_stacked_residuals(resid, weights, config: PipelineConfig, H: int):
    """Forecast one state's ``(2, T, p)`` residual curves ``H`` steps ahead."""
    model = mfpca_stack(resid[0], resid[1], config.k_rule, config.kernel, config.bandwidth, weights)
    fc, orders = forecast_series(model.scores, H, config)
    p = resid.shape[2]
    curves = model.reconstruct(fc).reshape(H, 2, p).transpose(1, 0, 2)
    diag = {"K": model.K, "bandwidth": model.bandwidth, "arima": orders}
    return curves, diag


def forecast_panel(panel: DensityPanel, config: PipelineConfig | None = None, H: int | None = None) -> ForecastSet:
    """Forecast every (state, gender) curve ``1..H`` years past the panel's end."""
    config = PipelineConfig() if config is None else config
    H = int(config.horizon if H is None else H)
    if H < 1:
        raise DomainError("horizon must be at least 1")
    y = transformed_values(panel, config.clr)
    work = ClrPanel(panel.grid, panel.states, panel.years, y, panel.radix, panel.genders)
    kwargs = {}
    if config.decomposition == "fmp":
        kwargs = {"tol": config.fmp_tol, "max_iter": config.fmp_max_iter}
    fit = decompose(work, config.decomposition, **kwargs)
    det = fit.deterministic()
    resid = fit.residuals.values
    out = np.empty((panel.n_states, 2, H, panel.grid.p))
    diagnostics = {"states": {}, "anova": {"method": fit.method, "iterations": fit.iterations, "converged": fit.converged}}
    for i, state in enumerate(panel.states):
        try:
            curves, diag = forecast_stacked_residuals(resid[i], panel.grid.weights, config, H)
        except DensityFTSError as exc:
            raise _with_context(exc, f"state {state!r}") from exc
        out[i] = det[i][:, None, :] + curves
        diagnostics["states"][state] = diag
    density = back_transform(out, panel.grid, panel.radix, config.clr)
    return ForecastSet(
        config.decomposition, panel.grid, panel.states, panel.genders, panel.years[-1],
        density, out if config.clr else None, panel.radix, diagnostics,
    )


def _with_context(exc, where):
    try:
        return type(exc)(f"{where}: {exc}")
    except TypeError:
        return DomainError(f"{where}: {exc}")


def naive_benchmark(panel: DensityPanel, H: int) -> ForecastSet:
    """No-change forecast: the last observed density at every horizon."""
    if panel.n_years < 1:
        raise DomainError("naive forecast needs at least one year")
    if H < 1:
        raise DomainError("horizon must be at least 1")
    last = panel.values[:, :, -1, :]
    density = np.repeat(last[:, :, None, :], H, axis=2)
    clr = clr_values(density, panel.grid) if np.all(density > 0) else None
    return ForecastSet("naive", panel.grid, panel.states, panel.genders, panel.years[-1], density, clr, panel.radix, {})
