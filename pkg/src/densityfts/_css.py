"""Compiled kernels for conditional-sum-of-squares ARMA estimation.

The ARMA search fits thousands of small models per panel, so the residual
recursion and the Nelder-Mead simplex search run under numba.
"""

import math

import numpy as np
from numba import njit

KAPPA_MAX = 1.0 - 1e-9


@njit(cache=True)
def pacf_to_coef(kappa):
    """Durbin-Levinson map from partial autocorrelations to AR coefficients."""
    n = kappa.size
    phi = np.zeros(n)
    tmp = np.zeros(n)
    for k in range(n):
        r = kappa[k]
        for j in range(k):
            tmp[j] = phi[j] - r * phi[k - 1 - j]
        for j in range(k):
            phi[j] = tmp[j]
        phi[k] = r
    return phi


@njit(cache=True)
def bounded_pacf(u):
    out = np.empty(u.size)
    for i in range(u.size):
        v = math.tanh(u[i])
        out[i] = min(KAPPA_MAX, max(-KAPPA_MAX, v))
    return out


@njit(cache=True)
def css_residuals(w, psi, ar, ma, condition):
    n = w.size
    p = ar.size
    q = ma.size
    e = np.zeros(n)
    for t in range(condition, n):
        a = w[t] - psi
        for i in range(p):
            a -= ar[i] * w[t - 1 - i]
        for j in range(q):
            if t - 1 - j >= condition:
                a -= ma[j] * e[t - 1 - j]
        e[t] = a
    return e[condition:]


@njit(cache=True)
def unpack_free(z, p, q, with_c):
    k = 1 if with_c else 0
    psi = z[0] if with_c else 0.0
    ar = pacf_to_coef(bounded_pacf(z[k : k + p]))
    ma = -pacf_to_coef(bounded_pacf(z[k + p : k + p + q]))
    return psi, ar, ma


@njit(cache=True)
def css_free(z, w, p, q, with_c, condition):
    psi, ar, ma = unpack_free(z, p, q, with_c)
    e = css_residuals(w, psi, ar, ma, condition)
    s = 0.0
    for v in e:
        s += v * v
    if not math.isfinite(s):
        return np.inf
    return s


@njit(cache=True)
def _sort(sim, fsim):
    order = np.argsort(fsim)
    return sim[order].copy(), fsim[order].copy()


@njit(cache=True)
def nelder_mead(z0, w, p, q, with_c, condition, xatol, fatol, maxfev):
    """Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink 0.5).

    Returns ``(z, f, nfev, converged)``.  The start simplex perturbs each
    coordinate by 5% (or 0.00025 when it is zero).
    """
    n = z0.size
    sim = np.empty((n + 1, n))
    fsim = np.empty(n + 1)
    sim[0] = z0
    for k in range(n):
        y = z0.copy()
        y[k] = y[k] * 1.05 if y[k] != 0.0 else 0.00025
        sim[k + 1] = y
    for k in range(n + 1):
        fsim[k] = css_free(sim[k], w, p, q, with_c, condition)
    nfev = n + 1
    sim, fsim = _sort(sim, fsim)
    converged = False
    while nfev < maxfev:
        xspread = 0.0
        fspread = 0.0
        for k in range(1, n + 1):
            fspread = max(fspread, abs(fsim[0] - fsim[k]))
            for j in range(n):
                xspread = max(xspread, abs(sim[k, j] - sim[0, j]))
        if xspread <= xatol and fspread <= fatol:
            converged = True
            break
        xbar = np.zeros(n)
        for k in range(n):
            xbar += sim[k]
        xbar /= n
        worst = sim[n]
        xr = 2.0 * xbar - worst
        fxr = css_free(xr, w, p, q, with_c, condition)
        nfev += 1
        shrink = False
        if fxr < fsim[0]:
            xe = 3.0 * xbar - 2.0 * worst
            fxe = css_free(xe, w, p, q, with_c, condition)
            nfev += 1
            if fxe < fxr:
                sim[n] = xe
                fsim[n] = fxe
            else:
                sim[n] = xr
                fsim[n] = fxr
        elif fxr < fsim[n - 1]:
            sim[n] = xr
            fsim[n] = fxr
        else:
            if fxr < fsim[n]:
                xc = 1.5 * xbar - 0.5 * worst
                fxc = css_free(xc, w, p, q, with_c, condition)
                nfev += 1
                if fxc <= fxr:
                    sim[n] = xc
                    fsim[n] = fxc
                else:
                    shrink = True
            else:
                xcc = 0.5 * xbar + 0.5 * worst
                fxcc = css_free(xcc, w, p, q, with_c, condition)
                nfev += 1
                if fxcc < fsim[n]:
                    sim[n] = xcc
                    fsim[n] = fxcc
                else:
                    shrink = True
            if shrink:
                for k in range(1, n + 1):
                    sim[k] = sim[0] + 0.5 * (sim[k] - sim[0])
                    fsim[k] = css_free(sim[k], w, p, q, with_c, condition)
                    nfev += 1
        sim, fsim = _sort(sim, fsim)
    return sim[0].copy(), fsim[0], nfev, converged
