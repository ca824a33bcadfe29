"""Rolling-window evaluation and the KLD/JSD error table.

Training windows of fixed length ``train_T`` roll forward one year at a time.
Every window refits the whole method (decomposition included) on its own
years, forecasts ``1..H`` steps ahead and is scored against whichever of those
years are observed.  Per gender and horizon the divergences are averaged over
states (and, by default, over ages, i.e. divided by ``n_states * p``), then
over windows, and reported multiplied by 100.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .gsy import gsy_two_stage
from .metrics import jsd, kld
from .panel import DensityPanel
from .pipeline import ForecastSet, PipelineConfig, forecast_panel, naive_benchmark

METHODS = ("fm", "fmp", "gsy", "naive")
SCALE = 100.0


def run_method(method: str, train: DensityPanel, H: int, config: PipelineConfig, gsy_p0=6, gsy_r="evr") -> ForecastSet:
    if method in ("fm", "fmp"):
        return forecast_panel(train, config.with_(decomposition=method), H)
    if method == "gsy":
        return gsy_two_stage(train, H, gsy_p0, gsy_r, config)
    if method == "naive":
        return naive_benchmark(train, H)
    raise DomainError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


@dataclass(frozen=True)
class ErrorRow:
    method: str
    gender: str
    horizon: object         # int, or "mean"
    kld_x100: float
    jsd_x100: float
    n_windows: int = 0


@dataclass
class ErrorTable:
    """Per (method, gender, horizon) accuracy plus horizon means."""

    rows: list = field(default_factory=list)

    def horizon_rows(self):
        return [r for r in self.rows if r.horizon != "mean"]

    def methods(self):
        return list(dict.fromkeys(r.method for r in self.rows))

    def genders(self):
        return list(dict.fromkeys(r.gender for r in self.rows))

    def lookup(self, method, gender, horizon) -> ErrorRow:
        for r in self.rows:
            if r.method == method and r.gender == gender and r.horizon == horizon:
                return r
        raise KeyError((method, gender, horizon))

    def mean(self, method, gender) -> ErrorRow:
        return self.lookup(method, gender, "mean")

    def add_means(self) -> "ErrorTable":
        out = []
        for m in self.methods():
            for g in self.genders():
                hs = [r for r in self.horizon_rows() if r.method == m and r.gender == g]
                if not hs:
                    continue
                out.extend(hs)
                out.append(ErrorRow(
                    m, g, "mean",
                    float(np.mean([r.kld_x100 for r in hs])),
                    float(np.mean([r.jsd_x100 for r in hs])),
                    sum(r.n_windows for r in hs),
                ))
        return ErrorTable(out)

    def to_csv(self, stream=None) -> str:
        buf = io.StringIO() if stream is None else stream
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "gender", "horizon", "kld_x100", "jsd_x100"])
        for r in self.rows:
            writer.writerow([r.method, r.gender, r.horizon, repr(float(r.kld_x100)), repr(float(r.jsd_x100))])
        return buf.getvalue() if stream is None else ""

    @classmethod
    def from_csv(cls, stream) -> "ErrorTable":
        rows = []
        for rec in csv.DictReader(stream):
            h = rec["horizon"]
            rows.append(ErrorRow(
                rec["method"], rec["gender"], h if h == "mean" else int(h),
                float(rec["kld_x100"]), float(rec["jsd_x100"]),
            ))
        return cls(rows)

    def render(self) -> str:
        """Wide text layout: one line per horizon, KLD/JSD per method and gender."""
        methods, genders = self.methods(), self.genders()
        horizons = sorted({r.horizon for r in self.horizon_rows()})
        head = ["h".rjust(4)]
        for m in methods:
            for g in genders:
                head += [f"{m}:{g}:KLD".rjust(14), f"{m}:{g}:JSD".rjust(14)]
        lines = [" ".join(head)]
        for h in horizons + ["mean"]:
            cells = [str(h).rjust(4)]
            for m in methods:
                for g in genders:
                    try:
                        r = self.lookup(m, g, h)
                        cells += [f"{r.kld_x100:14.4f}", f"{r.jsd_x100:14.4f}"]
                    except KeyError:
                        cells += ["-".rjust(14)] * 2
            lines.append(" ".join(cells))
        return "\n".join(lines) + "\n"


def window_starts(n_years: int, train_T: int, H: int, full_horizon_only: bool = False):
    """Start positions of the training windows.

    By default every window with at least one holdout year is used, so
    horizon ``h`` is scored ``n_years - train_T - h + 1`` times.  With
    ``full_horizon_only`` only windows whose whole ``1..H`` holdout is
    observed are used.
    """
    if train_T < 1 or H < 1:
        raise DomainError("train window and horizon must be positive")
    if n_years < train_T + H:
        raise DomainError(f"panel has {n_years} years; need at least train window + horizon = {train_T + H}")
    last = n_years - train_T - H if full_horizon_only else n_years - train_T - 1
    return list(range(0, last + 1))


def score_forecasts(fs: ForecastSet, holdout: np.ndarray):
    """Symmetric KLD and JSD per (state, gender, horizon) on the probability scale.

    Each curve is divided by its sum over ages, so both sides are discrete
    probability vectors.
    """
    h = holdout.shape[2]
    pred = fs.density[:, :, :h]
    pred = pred / pred.sum(axis=-1, keepdims=True)
    obs = holdout / holdout.sum(axis=-1, keepdims=True)
    return kld(obs, pred), jsd(obs, pred)


@dataclass(frozen=True)
class _Job:
    panel: DensityPanel
    start: int
    train_T: int
    H: int
    methods: tuple
    config: PipelineConfig
    gsy_p0: int
    gsy_r: object
    keep_forecasts: bool


def _evaluate_window(job: _Job):
    train = job.panel.window(job.start, job.start + job.train_T)
    stop = min(job.start + job.train_T + job.H, job.panel.n_years)
    holdout = job.panel.values[:, :, job.start + job.train_T : stop]
    out = {}
    for method in job.methods:
        fs = run_method(method, train, job.H, job.config, job.gsy_p0, job.gsy_r)
        k, j = score_forecasts(fs, holdout)
        out[method] = {
            "kld": k, "jsd": j, "diagnostics": fs.diagnostics,
            "forecast": fs if job.keep_forecasts else None,
        }
    return job.start, out


@dataclass
class BacktestResult:
    table: ErrorTable
    windows: list
    forecasts: dict = field(default_factory=dict)


def to_plain(obj):
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def rolling_backtest(
    panel: DensityPanel,
    train_T: int,
    H: int,
    methods=("fm",),
    config: PipelineConfig | None = None,
    full_horizon_only: bool = False,
    average_over_ages: bool = True,
    n_jobs: int = 1,
    gsy_p0: int = 6,
    gsy_r="evr",
    keep_forecasts: bool = False,
) -> BacktestResult:
    """Rolling-window backtest of one or more methods.

    Returns the error table (KLD and JSD x 100, horizon rows then a ``mean``
    row per method and gender), a per-window manifest of model diagnostics,
    and optionally the forecasts of every window keyed by ``(start, method)``.
    Results do not depend on ``n_jobs``.
    """
    config = PipelineConfig() if config is None else config
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise DomainError(f"unknown method {m!r}; expected one of {', '.join(METHODS)}")
    starts = window_starts(panel.n_years, train_T, H, full_horizon_only)
    jobs = [_Job(panel, s, train_T, H, methods, config, gsy_p0, gsy_r, keep_forecasts) for s in starts]
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_evaluate_window, jobs))
    else:
        results = [_evaluate_window(j) for j in jobs]

    divisor = panel.n_states * (panel.grid.p if average_over_ages else 1)
    sums = {}
    windows = []
    forecasts = {}
    for start, per_method in results:
        entry = {
            "start": start,
            "train_years": [panel.years[start], panel.years[start + train_T - 1]],
            "methods": {},
        }
        for m in methods:
            res = per_method[m]
            k_g = res["kld"].sum(axis=0) / divisor     # (2, h_avail)
            j_g = res["jsd"].sum(axis=0) / divisor
            for g, gender in enumerate(panel.genders):
                for h in range(k_g.shape[1]):
                    acc = sums.setdefault((m, gender, h + 1), [0.0, 0.0, 0])
                    acc[0] += k_g[g, h]
                    acc[1] += j_g[g, h]
                    acc[2] += 1
            entry["methods"][m] = to_plain(res["diagnostics"])
            if keep_forecasts:
                forecasts[(start, m)] = res["forecast"]
        windows.append(entry)

    rows = []
    for m in methods:
        for gender in panel.genders:
            for h in range(1, H + 1):
                k_sum, j_sum, n = sums[(m, gender, h)]
                rows.append(ErrorRow(m, gender, h, SCALE * k_sum / n, SCALE * j_sum / n, n))
    return BacktestResult(ErrorTable(rows).add_means(), windows, forecasts)
