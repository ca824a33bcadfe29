"""Divergences between observed and forecast densities."""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .panel import DensityCurve


def _probabilities(p, q):
    if isinstance(p, DensityCurve) and isinstance(q, DensityCurve):
        if p.grid != q.grid:
            raise DomainError("densities live on different grids")
        p, q = p.values / p.values.sum(), q.values / q.values.sum()
    p = np.asarray(getattr(p, "values", p), dtype=float)
    q = np.asarray(getattr(q, "values", q), dtype=float)
    if p.shape != q.shape:
        raise DomainError(f"shape mismatch {p.shape} vs {q.shape}")
    if np.any(~(p > 0)) or np.any(~(q > 0)):
        raise DomainError("divergences need strictly positive densities; repair zero cells first")
    return p, q


def kl_divergence(p, q):
    """One-sided discrete ``D_KL(p || q) = sum p ln(p / q)`` along the last axis."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    return np.sum(p * (np.log(p) - np.log(q)), axis=-1)


def kld(p, q):
    """Symmetric Kullback-Leibler divergence ``D_KL(p||q) + D_KL(q||p)``.

    ``DensityCurve`` arguments are rescaled to discrete probabilities (values
    over their sum) first; arrays are used as given and may carry leading
    batch axes.
    """
    p, q = _probabilities(p, q)
    out = kl_divergence(p, q) + kl_divergence(q, p)
    return float(out) if out.ndim == 0 else out


def jsd(p, q):
    """Jensen-Shannon type divergence with the geometric-mean midpoint.

    ``0.5 D_KL(p||m) + 0.5 D_KL(q||m)`` with ``m = sqrt(p q)``, unnormalised.
    With this midpoint the value is exactly one quarter of :func:`kld`.
    """
    p, q = _probabilities(p, q)
    m = np.sqrt(p * q)
    out = 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m)
    return float(out) if out.ndim == 0 else out
