"""Command-line entry point.

Every subcommand writes its declared CSV/JSON files under ``--outdir`` and a
one-line summary to stdout.  Failures print a single JSON object to stderr and
exit with status 2 (usage and configuration errors) or 1 (data and numerical
errors).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .anova import decompose
from .backtest import ErrorTable, rolling_backtest, run_method, to_plain
from .coda import ClrPanel, clr_values
from .config import RunConfig, load_config
from .errors import ConfigError, DensityFTSError, DomainError, PanelParseError
from .ftsa import mfpca_stack
from .panel import DensityPanel, gini_table, load_panel
from .simulate import simulate_panel

SUBCOMMANDS = ("validate", "transform", "decompose", "fpca", "forecast", "backtest", "report", "simulate")


class UsageError(DensityFTSError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x) -> str:
    return repr(float(x))


def _writer(path: Path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def _age_header(panel_or_grid):
    grid = getattr(panel_or_grid, "grid", panel_or_grid)
    return [f"{a:g}" for a in grid.ages]


def _write_json(path: Path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _load(args, cfg: RunConfig) -> DensityPanel:
    if not args.input:
        raise UsageError("--input is required for this subcommand")
    if not os.path.exists(args.input):
        raise PanelParseError("input file not found", path=args.input)
    return load_panel(args.input, grid=cfg.grid())


def _training_panel(panel: DensityPanel, cfg: RunConfig) -> DensityPanel:
    if panel.n_years < cfg.train_window:
        raise DomainError(f"panel has {panel.n_years} years but train_window is {cfg.train_window}")
    return panel.window(panel.n_years - cfg.train_window, panel.n_years)


def _manifest(args, cfg: RunConfig, panel: DensityPanel, **extra):
    out = {
        "command": args.command,
        "config": cfg.echo(),
        "input": {"path": str(args.input), "sha256": _sha256(args.input)},
        "panel": {
            "n_states": panel.n_states,
            "n_years": panel.n_years,
            "p": panel.grid.p,
            "years": [panel.years[0], panel.years[-1]],
            "ages": [float(panel.grid.ages[0]), float(panel.grid.ages[-1])],
            "radix": panel.radix,
        },
        "version": __version__,
    }
    out.update(extra)
    return out


def cmd_validate(args, cfg, out: Path):
    panel = _load(args, cfg)
    fh, w = _writer(out / "gini.csv")
    with fh:
        w.writerow(["state", "gender", "year", "gini"])
        for s, g, y, v in gini_table(panel):
            w.writerow([s, g, y, _fmt(v)])
    print(f"ok n_s={panel.n_states} T={panel.n_years} p={panel.grid.p} years={panel.years[0]}-{panel.years[-1]}")


def _write_curves(path, panel_like, values):
    fh, w = _writer(path)
    with fh:
        w.writerow(["state", "gender", "year", *_age_header(panel_like)])
        for i, s in enumerate(panel_like.states):
            for g, gender in enumerate(panel_like.genders):
                for t, y in enumerate(panel_like.years):
                    w.writerow([s, gender, y, *map(_fmt, values[i, g, t])])


def cmd_transform(args, cfg, out: Path):
    panel = _load(args, cfg)
    _write_curves(out / "clr.csv", panel, clr_values(panel.values, panel.grid))
    print(f"ok wrote {panel.n_states * 2 * panel.n_years} clr curves")


def _clr_panel(panel, cfg):
    y = clr_values(panel.values, panel.grid) if cfg.clr else panel.values.copy()
    return ClrPanel(panel.grid, panel.states, panel.years, y, panel.radix, panel.genders)


def _decompose(panel, cfg):
    pc = cfg.pipeline()
    kw = {"tol": pc.fmp_tol, "max_iter": pc.fmp_max_iter} if pc.decomposition == "fmp" else {}
    return decompose(_clr_panel(panel, cfg), pc.decomposition, **kw)


def cmd_decompose(args, cfg, out: Path):
    panel = _load(args, cfg)
    fit = _decompose(panel, cfg)
    ages = _age_header(panel)
    fh, w = _writer(out / "mu.csv")
    with fh:
        w.writerow(["term", *ages])
        w.writerow(["mu", *map(_fmt, fit.mu)])
    fh, w = _writer(out / "alpha.csv")
    with fh:
        w.writerow(["state", *ages])
        for s, row in zip(panel.states, fit.alpha):
            w.writerow([s, *map(_fmt, row)])
    fh, w = _writer(out / "beta.csv")
    with fh:
        w.writerow(["gender", *ages])
        for g, row in zip(panel.genders, fit.beta):
            w.writerow([g, *map(_fmt, row)])
    _write_curves(out / "residuals.csv", panel, fit.residuals.values)
    _write_json(out / "anova.json", {"method": fit.method, "iterations": fit.iterations, "converged": fit.converged})
    print(f"ok method={fit.method} iterations={fit.iterations} converged={str(fit.converged).lower()}")


def cmd_fpca(args, cfg, out: Path):
    panel = _load(args, cfg)
    pc = cfg.pipeline()
    resid = _decompose(panel, cfg).residuals.values
    ages = _age_header(panel)
    f_sum, w_sum = _writer(out / "fpca_summary.csv")
    f_val, w_val = _writer(out / "fpca_eigenvalues.csv")
    f_fun, w_fun = _writer(out / "fpca_eigenfunctions.csv")
    with f_sum, f_val, f_fun:
        w_sum.writerow(["state", "K", "bandwidth"])
        w_val.writerow(["state", "component", "eigenvalue"])
        w_fun.writerow(["state", "component", "gender", *ages])
        p = panel.grid.p
        for i, s in enumerate(panel.states):
            m = mfpca_stack(resid[i, 0], resid[i, 1], pc.k_rule, pc.kernel, pc.bandwidth, panel.grid.weights)
            w_sum.writerow([s, m.K, _fmt(m.bandwidth)])
            for k, lam in enumerate(m.eigenvalues, start=1):
                w_val.writerow([s, k, _fmt(lam)])
            for k in range(max(m.K, 1)):
                for g, gender in enumerate(panel.genders):
                    w_fun.writerow([s, k + 1, gender, *map(_fmt, m.eigenfunctions[k, g * p : (g + 1) * p])])
    print(f"ok fpca for {panel.n_states} states")


def cmd_forecast(args, cfg, out: Path):
    panel = _load(args, cfg)
    train = _training_panel(panel, cfg)
    pc = cfg.pipeline()
    diagnostics = {}
    fh, w = _writer(out / "forecasts.csv")
    with fh:
        w.writerow(["method", "state", "gender", "year", "horizon", *_age_header(panel)])
        for method in cfg.methods:
            fs = run_method(method, train, cfg.horizon, pc, cfg.gsy_p0, cfg.gsy_rule)
            diagnostics[method] = fs.diagnostics
            for i, s in enumerate(fs.states):
                for g, gender in enumerate(fs.genders):
                    for h, y in enumerate(fs.years):
                        w.writerow([method, s, gender, y, h + 1, *map(_fmt, fs.density[i, g, h])])
    _write_json(out / "manifest.json", _manifest(
        args, cfg, panel, train_years=[train.years[0], train.years[-1]], methods=to_plain(diagnostics),
    ))
    print(f"ok forecast {','.join(cfg.methods)} for {train.years[-1] + 1}-{train.years[-1] + cfg.horizon}")


def cmd_backtest(args, cfg, out: Path):
    panel = _load(args, cfg)
    result = rolling_backtest(
        panel, cfg.train_window, cfg.horizon, cfg.methods, cfg.pipeline(),
        full_horizon_only=cfg.windows == "full", n_jobs=args.parallel,
        gsy_p0=cfg.gsy_p0, gsy_r=cfg.gsy_rule, keep_forecasts=True,
    )
    with open(out / "error_table.csv", "w", newline="", encoding="utf-8") as fh:
        result.table.to_csv(fh)
    _write_json(out / "manifest.json", _manifest(args, cfg, panel, windows=to_plain(result.windows)))

    # Observed against forecast densities of the first window, every horizon.
    first = result.windows[0]["start"]
    base = first + cfg.train_window
    fh, w = _writer(out / "plot_data.csv")
    with fh:
        w.writerow(["method", "state", "gender", "year", "horizon", "age", "observed", "forecast"])
        for method in cfg.methods:
            fs = result.forecasts[(first, method)]
            for i, s in enumerate(panel.states):
                for g, gender in enumerate(panel.genders):
                    for h in range(min(cfg.horizon, panel.n_years - base)):
                        obs = panel.values[i, g, base + h]
                        for a, age in enumerate(panel.grid.ages):
                            w.writerow([method, s, gender, panel.years[base + h], h + 1, f"{age:g}",
                                        _fmt(obs[a]), _fmt(fs.density[i, g, h, a])])
    sys.stdout.write(result.table.render())


def cmd_report(args, cfg, out: Path):
    if not args.input:
        raise UsageError("--input must point to an error table CSV")
    with open(args.input, newline="", encoding="utf-8") as fh:
        try:
            table = ErrorTable.from_csv(fh)
        except (KeyError, ValueError) as exc:
            raise PanelParseError(f"not an error table ({exc})", path=args.input) from None
    text = table.render()
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)


def cmd_simulate(args, cfg, out: Path):
    panel, _ = simulate_panel(args.states, args.years, args.ages, seed=cfg.seed, drift=args.drift)
    fh, w = _writer(out / "panel.csv")
    with fh:
        w.writerow(["state", "gender", "year", "age", "dx"])
        for i, s in enumerate(panel.states):
            for g, gender in enumerate(panel.genders):
                for t, y in enumerate(panel.years):
                    for a, age in enumerate(panel.grid.ages):
                        w.writerow([s, gender, y, f"{age:g}", _fmt(panel.values[i, g, t, a])])
    print(f"ok simulated n_s={panel.n_states} T={panel.n_years} p={panel.grid.p} seed={cfg.seed}")


COMMANDS = {name: globals()[f"cmd_{name}"] for name in SUBCOMMANDS}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="densityfts", description="Forecast panels of age-at-death densities.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--input", help="input CSV")
        sp.add_argument("--outdir", default=".", help="directory for output files")
        if name == "backtest":
            sp.add_argument("--parallel", type=int, default=os.cpu_count() or 1, help="worker processes")
        if name == "simulate":
            sp.add_argument("--states", type=int, default=10)
            sp.add_argument("--years", type=int, default=62)
            sp.add_argument("--ages", type=int, default=111)
            sp.add_argument("--drift", type=float, default=0.0)
    return parser


def _error_line(exc) -> str:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("key", "path", "row"):
        value = getattr(exc, attr, None)
        if value is not None:
            payload[attr] = value
    return json.dumps(payload, sort_keys=True)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config)
        if getattr(args, "parallel", 1) < 1:
            raise UsageError("--parallel must be at least 1")
        out = Path(args.outdir)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg, out)
    except (UsageError, ConfigError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 2
    except (DensityFTSError, OSError, ValueError, ArithmeticError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
