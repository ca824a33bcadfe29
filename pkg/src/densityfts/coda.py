"""Centred log-ratio transform between densities and unconstrained curves.

The continuous form is used: the geometric-mean term is the quadrature
average of ``ln d`` over the age interval, so a clr curve integrates to zero
under the same trapezoid weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .panel import GENDERS, RADIX, AgeGrid, DensityCurve, DensityPanel


def clr_values(values, grid: AgeGrid):
    """clr along the last axis of an array of strictly positive curves."""
    values = np.asarray(values, dtype=float)
    if np.any(~(values > 0)):
        raise DomainError("clr requires strictly positive values; run repair_zero_counts first")
    logs = np.log(values)
    return logs - (grid.integrate(logs) / grid.eta)[..., None]


def inv_clr_values(values, grid: AgeGrid, radix=RADIX):
    """Inverse clr along the last axis; each output curve integrates to ``radix``.

    The maximum is subtracted before exponentiating, so large inputs do not
    overflow.  Entries more than about 745 below the curve's maximum still
    underflow to zero in double precision.
    """
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError("inverse clr requires finite values")
    expd = np.exp(values - values.max(axis=-1, keepdims=True))
    return expd * (radix / grid.integrate(expd))[..., None]


@dataclass(frozen=True)
class ClrCurve:
    grid: AgeGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def integral(self) -> float:
        return float(self.grid.integrate(self.values))


def clr(curve: DensityCurve) -> ClrCurve:
    return ClrCurve(curve.grid, clr_values(curve.values, curve.grid))


def inv_clr(curve: ClrCurve, radix: float = RADIX) -> DensityCurve:
    return DensityCurve(curve.grid, inv_clr_values(curve.values, curve.grid, radix), radix)


@dataclass(frozen=True)
class ClrPanel:
    """Panel of clr curves, same layout as :class:`DensityPanel`."""

    grid: AgeGrid
    states: tuple
    years: tuple
    values: np.ndarray
    radix: float = RADIX
    genders: tuple = field(default=GENDERS)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (len(self.states), len(self.genders), len(self.years), self.grid.p)
        if values.shape != expected:
            raise DomainError(f"panel values have shape {values.shape}, expected {expected}")
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        object.__setattr__(self, "values", values)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_years(self) -> int:
        return len(self.years)

    def __getitem__(self, key) -> ClrCurve:
        state, gender, year = key
        return ClrCurve(
            self.grid,
            self.values[self.states.index(state), self.genders.index(gender), self.years.index(int(year))],
        )

    def with_values(self, values) -> "ClrPanel":
        return ClrPanel(self.grid, self.states, self.years, values, self.radix, self.genders)


def clr_panel(panel: DensityPanel) -> ClrPanel:
    return ClrPanel(
        panel.grid, panel.states, panel.years,
        clr_values(panel.values, panel.grid), panel.radix, panel.genders,
    )


def inv_clr_panel(panel: ClrPanel) -> DensityPanel:
    return DensityPanel(
        panel.grid, panel.states, panel.years,
        inv_clr_values(panel.values, panel.grid, panel.radix), panel.radix, panel.genders,
    )
