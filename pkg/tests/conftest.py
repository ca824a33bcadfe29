import io

import numpy as np
import pytest

from densityfts.panel import AgeGrid, DensityPanel


def panel_csv(states=("A", "B"), years=(2000, 2001, 2002), ages=range(5), drop=None, qx=False, seed=0):
    """Long-format CSV text for a small synthetic panel."""
    rng = np.random.default_rng(seed)
    lines = ["state,gender,year,age,dx" + (",qx" if qx else "")]
    for s in states:
        for g in ("F", "M"):
            for y in years:
                if drop == (s, g, y):
                    continue
                for a in ages:
                    row = f"{s},{g},{y},{a},{rng.uniform(1, 100):.6f}"
                    if qx:
                        row += f",{rng.uniform(0.05, 0.5):.6f}"
                    lines.append(row)
    return "\n".join(lines) + "\n"


def random_panel(rng, n_states, T, p, positive=True):
    grid = AgeGrid(np.arange(float(p)))
    values = rng.uniform(0.5, 2.0, (n_states, 2, T, p)) if positive else rng.standard_normal((n_states, 2, T, p))
    values = values * (1e5 / grid.integrate(values))[..., None]
    return DensityPanel(grid, [f"S{i}" for i in range(n_states)], range(2000, 2000 + T), values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_csv():
    return io.StringIO(panel_csv())


def pytest_configure(config):
    config.acceptance_results = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "acceptance_results", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 9):
        if n in results:
            ok, detail = results[n]
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n}: NOT RUN  (skipped, deselected or errored)")
