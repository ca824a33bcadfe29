"""Loading and regularising life-table death-count panels.

A panel holds one density curve per (state, gender, year) on a shared age
grid.  Curves are stored as a single ``(n_states, 2, n_years, p)`` array so the
downstream decomposition and forecasting code can work on whole axes at once;
``DensityPanel[key]`` gives the per-key :class:`DensityCurve` view.
"""

from __future__ import annotations

import csv
import io
import os
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import NamedTuple, TextIO

import numpy as np

from .errors import DomainError, PanelParseError, RectangularityError

RADIX = 1e5
GENDERS = ("F", "M")
DEFAULT_AGES = np.arange(0.0, 111.0)


def trapezoid_weights(ages):
    """Composite trapezoid weights for an arbitrary increasing grid."""
    ages = np.asarray(ages, dtype=float)
    h = np.diff(ages)
    w = np.zeros_like(ages)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


class AgeGrid:
    """Ordered ages with their trapezoid quadrature weights.

    The weights sum to ``eta = ages[-1] - ages[0]``, the length of the age
    interval, so ``grid.integrate(np.ones(p)) == grid.eta``.
    """

    __slots__ = ("ages", "weights")

    def __init__(self, ages=None):
        ages = DEFAULT_AGES if ages is None else np.asarray(ages, dtype=float)
        if ages.ndim != 1 or ages.size < 2:
            raise DomainError("an age grid needs at least two ages")
        if not np.all(np.isfinite(ages)) or np.any(np.diff(ages) <= 0):
            raise DomainError("ages must be finite and strictly increasing")
        ages = ages.copy()
        ages.setflags(write=False)
        weights = trapezoid_weights(ages)
        weights.setflags(write=False)
        self.ages = ages
        self.weights = weights

    @property
    def p(self) -> int:
        return self.ages.size

    @property
    def eta(self) -> float:
        return float(self.ages[-1] - self.ages[0])

    def integrate(self, values):
        """Quadrature integral along the last axis."""
        return np.asarray(values, dtype=float) @ self.weights

    def inner(self, f, g):
        """Quadrature inner product along the last axis."""
        return (np.asarray(f) * np.asarray(g)) @ self.weights

    def __len__(self):
        return self.ages.size

    def __eq__(self, other):
        return isinstance(other, AgeGrid) and np.array_equal(self.ages, other.ages)

    def __hash__(self):
        return hash(self.ages.tobytes())

    def __repr__(self):
        return f"AgeGrid({self.ages[0]:g}..{self.ages[-1]:g}, p={self.p})"


@dataclass(frozen=True)
class DensityCurve:
    """Deaths per year of age on an :class:`AgeGrid`."""

    grid: AgeGrid
    values: np.ndarray
    radix: float = RADIX

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.p,):
            raise DomainError(
                f"curve has {values.size} values but the grid has {self.grid.p} ages"
            )
        object.__setattr__(self, "values", values)

    def integral(self) -> float:
        return float(self.grid.integrate(self.values))

    def normalized(self) -> "DensityCurve":
        """Rescale so the quadrature integral equals the radix."""
        total = self.integral()
        if not total > 0:
            raise DomainError("cannot normalise a curve with nonpositive mass")
        return DensityCurve(self.grid, self.values * (self.radix / total), self.radix)


class PanelKey(NamedTuple):
    state: str
    gender: str
    year: int


@dataclass(frozen=True)
class DensityPanel:
    """Rectangular state x gender x year panel of density curves.

    ``values`` has shape ``(n_states, 2, n_years, p)``; gender index 0 is
    ``"F"`` and 1 is ``"M"``.
    """

    grid: AgeGrid
    states: tuple
    years: tuple
    values: np.ndarray
    radix: float = RADIX
    genders: tuple = field(default=GENDERS)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        expected = (len(self.states), len(self.genders), len(self.years), self.grid.p)
        if values.shape != expected:
            raise DomainError(f"panel values have shape {values.shape}, expected {expected}")
        if len(self.genders) != 2:
            raise DomainError("gender must have exactly two levels")
        object.__setattr__(self, "values", values)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_years(self) -> int:
        return len(self.years)

    def index(self, key) -> tuple[int, int, int]:
        state, gender, year = key
        try:
            return (
                self.states.index(state),
                self.genders.index(gender),
                self.years.index(int(year)),
            )
        except ValueError:
            raise KeyError(key) from None

    def __getitem__(self, key) -> DensityCurve:
        i, g, t = self.index(key)
        return DensityCurve(self.grid, self.values[i, g, t], self.radix)

    def keys(self):
        for s in self.states:
            for g in self.genders:
                for y in self.years:
                    yield PanelKey(s, g, y)

    def __len__(self):
        return self.values.shape[0] * self.values.shape[1] * self.values.shape[2]

    def window(self, start: int, stop: int) -> "DensityPanel":
        """Sub-panel of the years with positions ``start:stop``."""
        return DensityPanel(
            self.grid, self.states, self.years[start:stop],
            self.values[:, :, start:stop], self.radix, self.genders,
        )

    def select_states(self, states: Iterable[str]) -> "DensityPanel":
        idx = [self.states.index(s) for s in states]
        return DensityPanel(
            self.grid, tuple(self.states[i] for i in idx), self.years,
            self.values[idx], self.radix, self.genders,
        )


DEFAULT_SCHEMA = {
    "state": "state",
    "gender": "gender",
    "year": "year",
    "age": "age",
    "dx": "dx",
    "qx": "qx",
}


def _parse_float(text, column, row, path):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise PanelParseError(f"non-numeric {column} value {text!r}", row=row, path=path) from None
    if not np.isfinite(value):
        raise PanelParseError(f"non-finite {column} value {text!r}", row=row, path=path)
    return value


def _open_source(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), str(source)
    if isinstance(source, io.TextIOBase) or hasattr(source, "read"):
        return None, getattr(source, "name", None)
    raise TypeError("source must be a path or a text stream")


def load_panel(
    source: str | os.PathLike | TextIO,
    schema: Mapping[str, str] | None = None,
    grid: AgeGrid | None = None,
    radix: float = RADIX,
    repair: bool = True,
) -> DensityPanel:
    """Read a long-format ``state,gender,year,age,dx[,qx]`` table into a panel.

    Parameters
    ----------
    source : path or text stream
        UTF-8, comma separated, one row per (state, gender, year, age).
    schema : mapping, optional
        Maps the canonical column names (``state``, ``gender``, ``year``,
        ``age``, ``dx``, ``qx``) to the header names used in ``source``.
    grid : AgeGrid, optional
        Target grid; defaults to ages 0..110.  Curves observed on other ages
        are linearly interpolated onto it.
    radix : float
        Life-table radix; every curve is normalised to integrate to it.
    repair : bool
        Apply :func:`repair_zero_counts` (using ``qx`` when present).

    Raises
    ------
    PanelParseError
        Malformed header, duplicate keys, bad gender codes or non-numeric
        fields.  The message carries the 1-based line number.
    RectangularityError
        Some (state, gender, year) combination is absent.
    """
    grid = AgeGrid() if grid is None else grid
    cols = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(DEFAULT_SCHEMA)
        if unknown:
            raise PanelParseError(f"unknown schema keys {sorted(unknown)}")
        cols.update(schema)

    handle, path = _open_source(source)
    stream = handle if handle is not None else source
    try:
        reader = csv.DictReader(stream)
        header = reader.fieldnames or []
        for name in ("state", "gender", "year", "age", "dx"):
            if cols[name] not in header:
                raise PanelParseError(f"missing column {cols[name]!r}", row=1, path=path)
        has_qx = cols["qx"] in header

        cells: dict[tuple, dict[float, tuple]] = {}
        for line, rec in enumerate(reader, start=2):
            state = (rec[cols["state"]] or "").strip()
            gender = (rec[cols["gender"]] or "").strip().upper()
            if not state:
                raise PanelParseError("empty state", row=line, path=path)
            if gender not in GENDERS:
                raise PanelParseError(f"gender must be F or M, got {gender!r}", row=line, path=path)
            year_f = _parse_float(rec[cols["year"]], "year", line, path)
            if year_f != int(year_f):
                raise PanelParseError(f"year must be an integer, got {rec[cols['year']]!r}", row=line, path=path)
            age = _parse_float(rec[cols["age"]], "age", line, path)
            dx = _parse_float(rec[cols["dx"]], "dx", line, path)
            if dx < 0:
                raise PanelParseError(f"negative dx {dx}", row=line, path=path)
            qx = None
            if has_qx and (rec[cols["qx"]] or "").strip() != "":
                qx = _parse_float(rec[cols["qx"]], "qx", line, path)
            cell = cells.setdefault((state, gender, int(year_f)), {})
            if age in cell:
                raise PanelParseError(
                    f"duplicate row for ({state}, {gender}, {int(year_f)}, age {age:g})",
                    row=line, path=path,
                )
            cell[age] = (dx, qx)
    finally:
        if handle is not None:
            handle.close()

    if not cells:
        raise PanelParseError("no data rows", path=path)

    states = sorted({k[0] for k in cells})
    years = sorted({k[2] for k in cells})
    gaps = [
        (s, g, y) for s in states for g in GENDERS for y in years if (s, g, y) not in cells
    ]
    if gaps:
        raise RectangularityError(gaps)

    values = np.empty((len(states), 2, len(years), grid.p))
    for (state, gender, year), cell in cells.items():
        ages = np.array(sorted(cell))
        dx = np.array([cell[a][0] for a in ages])
        qx_list = [cell[a][1] for a in ages]
        qx = np.array(qx_list, dtype=float) if all(q is not None for q in qx_list) else None
        native = grid if np.array_equal(ages, grid.ages) else AgeGrid(ages)
        curve = DensityCurve(native, dx, radix)
        if repair:
            curve = repair_zero_counts(curve, qx)
        if native is not grid:
            if ages[0] > grid.ages[0] or ages[-1] < grid.ages[-1]:
                raise PanelParseError(
                    f"ages {ages[0]:g}..{ages[-1]:g} of ({state}, {gender}, {year}) "
                    f"do not cover the grid {grid.ages[0]:g}..{grid.ages[-1]:g}",
                    path=path,
                )
            curve = DensityCurve(grid, np.interp(grid.ages, ages, curve.values), radix)
        values[states.index(state), GENDERS.index(gender), years.index(year)] = (
            curve.normalized().values
        )
    return DensityPanel(grid, tuple(states), tuple(years), values, radix)


def life_table_deaths(qx, radix=RADIX):
    """Death counts ``d_x = l_x q_x`` from the recursion ``l_{x+1} = l_x (1 - q_x)``."""
    qx = np.asarray(qx, dtype=float)
    survivors = radix * np.concatenate(([1.0], np.cumprod(1.0 - qx)[:-1]))
    return survivors * qx


def repair_zero_counts(curve: DensityCurve, qx=None) -> DensityCurve:
    """Remove zero death counts so the curve has a finite log.

    With ``qx`` the counts are rebuilt from the life-table recursion started at
    ``l_0 = radix``; the result is on the life-table scale (the counts sum to
    the radix) and is returned as is.  Without ``qx`` zeros are floored at
    ``1e-5 * radix / p`` and the curve is renormalised so its quadrature
    integral equals the radix.
    """
    if qx is not None:
        qx = np.asarray(qx, dtype=float)
        if qx.shape != curve.values.shape:
            raise DomainError("qx needs one value per age")
        if np.any(~(qx > 0)) or np.any(qx > 1):
            raise DomainError("qx must lie in (0, 1]")
        rebuilt = DensityCurve(curve.grid, life_table_deaths(qx, curve.radix), curve.radix)
        if np.all(rebuilt.values > 0):
            return rebuilt
        curve = rebuilt
    if np.any(curve.values < 0):
        raise DomainError("death counts must be nonnegative")
    floor = 1e-5 * curve.radix / curve.grid.p
    values = np.where(curve.values > 0, curve.values, floor)
    return DensityCurve(curve.grid, values, curve.radix).normalized()


def gini_from_values(ages, values, weights) -> float:
    """Population Gini of the age-at-death distribution (double-sum form)."""
    ages = np.asarray(ages, dtype=float)
    d = np.asarray(values, dtype=float) * np.asarray(weights, dtype=float)
    if np.any(d < 0):
        raise DomainError("Gini needs nonnegative values")
    mass = d.sum()
    if not mass > 0:
        raise DomainError("Gini needs positive total mass")
    mean_age = (d @ ages) / mass
    if not mean_age > 0:
        raise DomainError("Gini undefined when the mean age at death is zero")
    spread = d @ np.abs(ages[:, None] - ages[None, :]) @ d
    return float(spread / (2.0 * mean_age * mass**2))


def gini_coefficient(curve: DensityCurve, weights=None) -> float:
    """Gini coefficient of age at death using the grid's quadrature weights.

    Pass ``weights=np.ones(p)`` to treat the curve as a discrete distribution.
    """
    w = curve.grid.weights if weights is None else weights
    return gini_from_values(curve.grid.ages, curve.values, w)


def gini_table(panel: DensityPanel):
    """Rows ``(state, gender, year, gini)`` for every curve in the panel."""
    rows = []
    for key in panel.keys():
        rows.append((key.state, key.gender, key.year, gini_coefficient(panel[key])))
    return rows
