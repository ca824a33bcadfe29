"""Synthetic density panels with a known clr-scale structure.

Curves are generated on the clr scale as

    Y_{t,s,g}(u) = mu(u) + alpha_s(u) + beta_g(u)
                   + sum_k xi_{k,t,s,g} b_k(u) + drift * t * b_1(u) + eps_{t,s,g}(u)

with AR(1) scores ``xi``, a fixed two-function basis ``b`` (orthonormal and
zero-integral under the grid's quadrature) and white measurement noise, and
then mapped to densities by inverse clr.  Used by the test-suite and the CLI
``simulate`` subcommand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coda import clr_values, inv_clr_values
from .panel import RADIX, AgeGrid, DensityPanel


@dataclass(frozen=True)
class SyntheticTruth:
    deterministic: np.ndarray   # (n_states, 2, p)
    basis: np.ndarray           # (2, p)
    scores: np.ndarray          # (n_states, 2, T, 2)
    ar: np.ndarray              # (2,)
    drift: float
    clr: np.ndarray             # (n_states, 2, T, p) noise included

    def conditional_mean(self, t_last: int, h: int):
        """``E[Y_{t_last+h} | Y_{..t_last}]`` on the clr scale, ``(n_states, 2, p)``."""
        xi = self.scores[:, :, t_last, :] * self.ar ** h
        trend = self.drift * (t_last + h) * self.basis[0]
        return self.deterministic + xi @ self.basis + trend


def _orthonormal_basis(grid: AgeGrid, funcs):
    out = []
    for f in funcs:
        v = f - grid.integrate(f) / grid.eta
        for b in out:
            v = v - grid.inner(v, b) * b
        out.append(v / np.sqrt(grid.inner(v, v)))
    return np.array(out)


def simulate_panel(
    n_states: int = 10,
    n_years: int = 62,
    p: int = 111,
    seed: int = 0,
    ar=(0.8, 0.5),
    score_sd=(0.25, 0.12),
    noise_sd: float = 0.02,
    drift: float = 0.0,
    first_year: int = 1959,
    radix: float = RADIX,
) -> tuple[DensityPanel, SyntheticTruth]:
    rng = np.random.default_rng(seed)
    grid = AgeGrid(np.arange(float(p)))
    u = grid.ages / grid.ages[-1]

    base = 0.02 * np.exp(-40.0 * u) + np.exp(-0.5 * ((u - 0.78) / 0.1) ** 2) + 1e-3
    mu = clr_values(base, grid)
    alpha = 0.1 * rng.standard_normal((n_states, 1)) * np.sin(np.pi * u) + 0.05 * rng.standard_normal(
        (n_states, 1)
    ) * np.cos(2 * np.pi * u)
    alpha = alpha - alpha.mean(axis=0)
    alpha = alpha - (grid.integrate(alpha) / grid.eta)[:, None]
    beta_f = 0.15 * np.cos(np.pi * u)
    beta_f = beta_f - grid.integrate(beta_f) / grid.eta
    beta = np.stack([beta_f, -beta_f])
    det = mu + alpha[:, None, :] + beta[None, :, :]

    basis = _orthonormal_basis(grid, [np.cos(np.pi * u), np.cos(2.0 * np.pi * u)])
    ar = np.asarray(ar, dtype=float)
    sd = np.asarray(score_sd, dtype=float)
    burn = 50
    xi = np.zeros((n_states, 2, n_years + burn, 2))
    innov = rng.standard_normal(xi.shape) * sd * np.sqrt(1.0 - ar**2)
    for t in range(1, n_years + burn):
        xi[:, :, t] = ar * xi[:, :, t - 1] + innov[:, :, t]
    xi = xi[:, :, burn:]
    trend = drift * np.arange(n_years)[:, None] * basis[0]
    noise = noise_sd * rng.standard_normal((n_states, 2, n_years, p))
    y = det[:, :, None, :] + xi @ basis + trend + noise
    y = y - (grid.integrate(y) / grid.eta)[..., None]

    states = tuple(f"S{i:02d}" for i in range(n_states))
    years = tuple(range(first_year, first_year + n_years))
    panel = DensityPanel(grid, states, years, inv_clr_values(y, grid, radix), radix)
    return panel, SyntheticTruth(det, basis, xi, ar, drift, y)
