"""Forecasting panels of age-at-death densities.

The pipeline clr-transforms each density, splits the panel into state and
gender effects with a two-way functional ANOVA (means or median polish),
forecasts the remaining time-varying curves with long-run-covariance FPCA and
automatic ARIMA on the scores, and maps the forecasts back to densities.
"""

__version__ = "0.1.0"

from .anova import AnovaFit, decompose, fm_anova, fmp_anova, reconstruct
from .arima import ArimaFit, ScoreForecast, auto_arima, fit_arima, forecast_scores, kpss_statistic
from .backtest import BacktestResult, ErrorRow, ErrorTable, rolling_backtest
from .coda import ClrCurve, ClrPanel, clr, clr_panel, inv_clr, inv_clr_panel
from .config import RunConfig, load_config, parse_config
from .errors import (
    ConfigError,
    DensityFTSError,
    DomainError,
    NumericalError,
    PanelParseError,
    RectangularityError,
)
from .ftsa import CovSurface, FpcaModel, autocov, fpca, longrun_cov, mfpca_stack, plugin_bandwidth, select_K_evr
from .gsy import fit_score_factors, gsy_two_stage
from .metrics import jsd, kld
from .panel import (
    RADIX,
    AgeGrid,
    DensityCurve,
    DensityPanel,
    PanelKey,
    gini_coefficient,
    load_panel,
    repair_zero_counts,
)
from .pipeline import ForecastSet, PipelineConfig, forecast_panel, naive_benchmark
from .simulate import simulate_panel

__all__ = [name for name in dir() if not name.startswith("_")]
