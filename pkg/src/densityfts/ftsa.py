"""Long-run covariance, functional principal components and order selection.

Curves are handled as arrays of shape ``(T, p)`` together with the
quadrature weights of their grid.  The eigenproblem of a covariance surface
``C(u, v)`` under the weighted inner product is solved as the symmetric matrix
problem ``W^{1/2} C W^{1/2}``; eigenvectors are mapped back with
``W^{-1/2}`` so the eigenfunctions are orthonormal under quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError

BARTLETT_CONSTANT = 1.5 ** (1.0 / 3.0)


def _as_series(series):
    if isinstance(series, np.ndarray):
        x = series.astype(float, copy=False)
    else:
        x = np.asarray([getattr(c, "values", c) for c in series], dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DomainError("a functional time series must be a (T, p) array")
    return x


@dataclass(frozen=True)
class CovSurface:
    values: np.ndarray          # (p, p)
    weights: np.ndarray         # quadrature weights of the (possibly stacked) grid
    kernel: str = "none"
    bandwidth: float = 0.0


def _autocov_centered(xc, lag):
    T = xc.shape[0]
    if lag >= 0:
        return xc[: T - lag].T @ xc[lag:] / T
    return xc[-lag:].T @ xc[: T + lag] / T


def autocov(series, lag: int, weights=None) -> CovSurface:
    """Sample autocovariance surface at ``lag`` (divisor T, mean-centred).

    ``gamma_l(u, v) = T^{-1} sum_t Xc_t(u) Xc_{t+l}(v)`` for ``l >= 0`` and
    ``gamma_{-l}(u, v) = gamma_l(v, u)``.
    """
    x = _as_series(series)
    T, p = x.shape
    if abs(lag) >= T:
        raise DomainError(f"|lag| must be smaller than the series length {T}")
    xc = x - x.mean(axis=0)
    w = np.ones(p) if weights is None else np.asarray(weights, dtype=float)
    return CovSurface(_autocov_centered(xc, int(lag)), w, "none", 0.0)


def kernel_weight(x, kernel: str = "bartlett"):
    """Lag-window weight W(x) of a bounded-support kernel."""
    ax = np.abs(np.asarray(x, dtype=float))
    if kernel == "bartlett":
        return np.where(ax <= 1.0, 1.0 - ax, 0.0)
    if kernel == "flat_top":
        return np.where(ax <= 0.5, 1.0, np.where(ax <= 1.0, 2.0 - 2.0 * ax, 0.0))
    raise DomainError(f"unknown kernel {kernel!r}; expected 'bartlett' or 'flat_top'")


def _weighted_lag_sum(xc, b, kernel, moment=0):
    """sum_l W(l/b) |l|^moment gamma_l over all lags with nonzero weight."""
    T = xc.shape[0]
    cutoff = min(T - 1, int(math.floor(b)))
    total = _autocov_centered(xc, 0) * (1.0 if moment == 0 else 0.0)
    for lag in range(1, cutoff + 1):
        w = float(kernel_weight(lag / b, kernel)) * lag**moment
        if w == 0.0:
            continue
        g = _autocov_centered(xc, lag)
        total = total + w * (g + g.T)
    return total


def _hs_norm(c, weights):
    return float(np.sqrt(np.einsum("i,ij,j->", weights, c * c, weights)))


def plugin_bandwidth(series, weights=None) -> float:
    """Two-stage plug-in bandwidth for the Bartlett kernel.

    A pilot Bartlett estimate with bandwidth ``max(2, floor(T^{1/5}))`` gives
    ``C`` and its first-order derivative analogue ``C1 = sum W(l/b)|l| gamma_l``;
    then ``b = (3/2)^{1/3} (|C1| / |C|)^{2/3} T^{1/3}`` clamped to ``[1, T/4]``.
    """
    x = _as_series(series)
    T, p = x.shape
    w = np.ones(p) if weights is None else np.asarray(weights, dtype=float)
    xc = x - x.mean(axis=0)
    pilot = max(2, int(math.floor(T ** 0.2)))
    c0 = _weighted_lag_sum(xc, pilot, "bartlett")
    c1 = _weighted_lag_sum(xc, pilot, "bartlett", moment=1)
    n0 = _hs_norm(c0, w)
    if n0 == 0.0:
        return 1.0
    b = BARTLETT_CONSTANT * (_hs_norm(c1, w) / n0) ** (2.0 / 3.0) * T ** (1.0 / 3.0)
    return float(min(max(b, 1.0), max(T / 4.0, 1.0)))


def longrun_cov(series, kernel: str = "bartlett", bandwidth="plugin", weights=None) -> CovSurface:
    """Kernel sandwich estimate ``sum_l W(l/b) gamma_l`` of the long-run covariance."""
    x = _as_series(series)
    T, p = x.shape
    if T < 4:
        raise DomainError("long-run covariance needs at least 4 curves")
    kernel_weight(0.0, kernel)
    w = np.ones(p) if weights is None else np.asarray(weights, dtype=float)
    if isinstance(bandwidth, str):
        if bandwidth != "plugin":
            raise DomainError(f"bandwidth must be a positive number or 'plugin', got {bandwidth!r}")
        b = plugin_bandwidth(x, w)
    else:
        b = float(bandwidth)
        if not b > 0:
            raise DomainError("bandwidth must be positive")
    xc = x - x.mean(axis=0)
    c = _weighted_lag_sum(xc, b, kernel)
    c = 0.5 * (c + c.T)
    return CovSurface(c, w, kernel, b)


def select_K_evr(eigenvalues, T: int) -> int:
    """Eigenvalue-ratio choice of the number of components.

    ``delta = 1 / ln(max(theta_1, T))``; candidates run up to ``kappa_max``,
    the number of eigenvalues at least as large as the mean of the first
    ``min(T, len)`` eigenvalues.  Ratios at or below ``delta`` score 1, so a
    collapse to noise is never preferred.  Ties go to the smaller order.
    """
    theta = np.asarray(eigenvalues, dtype=float)
    if theta.ndim != 1 or theta.size == 0:
        raise DomainError("need a nonempty vector of eigenvalues")
    if np.any(np.diff(theta) > 1e-12 * max(1.0, abs(theta[0]))):
        raise DomainError("eigenvalues must be nonincreasing")
    if not theta[0] > 0:
        raise DomainError("all eigenvalues are zero; the order is undefined")
    if T < 1:
        raise DomainError("T must be positive")
    delta = 1.0 / math.log(max(theta[0], T))
    threshold = theta[: min(T, theta.size)].mean()
    kappa_max = int(np.count_nonzero(theta >= threshold))
    kappa_max = max(1, min(kappa_max, theta.size - 1))
    if theta.size == 1:
        return 1
    ratios = theta[1 : kappa_max + 1] / theta[:kappa_max]
    crit = np.where(ratios >= delta, ratios, 1.0)
    return int(np.argmin(crit)) + 1


def parse_k_rule(rule):
    """Normalise ``"evr"``, ``"fixed:6"``, ``6`` or ``("fixed", 6)``."""
    if isinstance(rule, (int, np.integer)) and not isinstance(rule, bool):
        k = int(rule)
    elif isinstance(rule, tuple) and len(rule) == 2 and rule[0] == "fixed":
        k = int(rule[1])
    elif isinstance(rule, str) and rule == "evr":
        return "evr"
    elif isinstance(rule, str) and rule.startswith("fixed:"):
        try:
            k = int(rule.split(":", 1)[1])
        except ValueError:
            raise DomainError(f"bad K rule {rule!r}") from None
    else:
        raise DomainError(f"bad K rule {rule!r}; expected 'evr' or 'fixed:<K>'")
    if k < 1:
        raise DomainError("a fixed K must be at least 1")
    return k


@dataclass(frozen=True)
class FpcaModel:
    """Eigen-decomposition of a covariance surface and the fitted scores.

    ``basis`` maps scores to centred curves: ``curves ~= mean + scores @ basis``.
    For a univariate fit ``basis`` is the first ``K`` eigenfunctions; for a
    gender-stacked fit it is the ``(2K, 2p)`` block arrangement whose first
    ``K`` rows carry the female blocks and last ``K`` rows the male blocks.
    """

    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray      # (n_components, n_points), rows orthonormal
    K: int
    scores: np.ndarray              # (T, K) or (T, 2K)
    basis: np.ndarray
    weights: np.ndarray
    kernel: str = "none"
    bandwidth: float = 0.0
    blocks: int = 1

    def reconstruct(self, scores=None):
        s = self.scores if scores is None else np.asarray(scores, dtype=float)
        if self.basis.shape[0] == 0:
            return np.broadcast_to(self.mean, s.shape[:-1] + self.mean.shape).copy()
        return self.mean + s @ self.basis


def _eigen(cov: CovSurface):
    c = np.asarray(cov.values, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DomainError("covariance surface must be square")
    if not np.allclose(c, c.T, rtol=0, atol=1e-10 * max(1.0, np.abs(c).max())):
        raise DomainError("covariance surface must be symmetric")
    w = np.asarray(cov.weights, dtype=float)
    if np.any(~(w > 0)):
        raise DomainError("quadrature weights must be positive")
    sw = np.sqrt(w)
    a = sw[:, None] * c * sw[None, :]
    a = 0.5 * (a + a.T)
    try:
        lam, vec = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        finite = bool(np.all(np.isfinite(a)))
        raise NumericalError(
            f"eigensolver failed ({exc}); matrix size {a.shape[0]}, finite={finite}, "
            f"max|entry|={np.abs(a).max() if finite else float('nan'):.3g}"
        ) from exc
    lam = lam[::-1]
    phi = (vec[:, ::-1] / sw[:, None]).T
    lead = np.argmax(np.abs(phi), axis=1)
    signs = np.sign(phi[np.arange(phi.shape[0]), lead])
    signs[signs == 0] = 1.0
    return lam, phi * signs[:, None]


def _clip(lam, scale):
    lam = np.where(lam > 0, lam, 0.0)
    # Eigenvalues at rounding level of the raw data are treated as exact zeros.
    lam[lam <= 1e-24 * scale] = 0.0
    return lam


def _choose_k(lam, T, rule):
    rule = parse_k_rule(rule)
    if rule == "evr":
        return 0 if not lam[0] > 0 else select_K_evr(lam, T)
    return min(rule, lam.size)


def fpca(cov: CovSurface, series, k_rule="evr") -> FpcaModel:
    """FPCA of ``series`` using the eigenfunctions of ``cov``.

    Scores are quadrature inner products of the mean-centred curves with the
    retained eigenfunctions.  A spectrum that is identically zero gives
    ``K = 0`` under the EVR rule.
    """
    x = _as_series(series)
    w = np.asarray(cov.weights, dtype=float)
    if x.shape[1] != w.size:
        raise DomainError("series and covariance surface live on different grids")
    lam, phi = _eigen(cov)
    scale = max(float(np.mean((x * x) @ w)), np.finfo(float).tiny)
    lam = _clip(lam, scale)
    K = _choose_k(lam, x.shape[0], k_rule)
    mean = x.mean(axis=0)
    basis = phi[:K]
    scores = ((x - mean) * w) @ basis.T
    return FpcaModel(mean, lam, phi, K, scores, basis, w, cov.kernel, cov.bandwidth)


def mfpca_stack(female, male, k_rule="evr", kernel="bartlett", bandwidth="plugin", weights=None) -> FpcaModel:
    """Joint FPCA of female and male series stacked on a doubled grid.

    The long-run covariance and its eigenfunctions are computed for the
    stacked curve ``(X^F, X^M)``.  Each retained eigenfunction splits into a
    female and a male block; per-gender scores are the weighted least-squares
    coefficients of that gender's centred curves on its ``K`` blocks, giving
    ``2K`` score series per year.
    """
    xf = _as_series(female)
    xm = _as_series(male)
    if xf.shape != xm.shape:
        raise DomainError("female and male series must have the same length and grid")
    T, p = xf.shape
    w = np.ones(p) if weights is None else np.asarray(weights, dtype=float)
    if w.size != p:
        raise DomainError("weights do not match the grid")
    ws = np.concatenate([w, w])
    x = np.hstack([xf, xm])
    cov = longrun_cov(x, kernel, bandwidth, ws)
    lam, phi = _eigen(cov)
    scale = max(float(np.mean((x * x) @ ws)), np.finfo(float).tiny)
    lam = _clip(lam, scale)
    K = _choose_k(lam, T, k_rule)
    mean = x.mean(axis=0)
    xc = x - mean
    sw = np.sqrt(w)
    basis = np.zeros((2 * K, 2 * p))
    scores = np.zeros((T, 2 * K))
    for g in range(2):
        block = phi[:K, g * p : (g + 1) * p]
        basis[g * K : (g + 1) * K, g * p : (g + 1) * p] = block
        if K:
            coef, *_ = np.linalg.lstsq((block * sw).T, (xc[:, g * p : (g + 1) * p] * sw).T, rcond=None)
            scores[:, g * K : (g + 1) * K] = coef.T
    return FpcaModel(mean, lam, phi, K, scores, basis, ws, cov.kernel, cov.bandwidth, blocks=2)
