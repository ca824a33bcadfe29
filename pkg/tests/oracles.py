"""Independent reference implementations used by the tests.

Each oracle is written from the defining formula with explicit loops and
shares no code with the package.
"""

import math

import numpy as np


def trapezoid_weights_loop(ages):
    n = len(ages)
    w = [0.0] * n
    for i in range(n - 1):
        h = ages[i + 1] - ages[i]
        w[i] += h / 2.0
        w[i + 1] += h / 2.0
    return w


def clr_loop(values, ages):
    w = trapezoid_weights_loop(ages)
    eta = ages[-1] - ages[0]
    logmean = sum(wi * math.log(v) for wi, v in zip(w, values)) / eta
    return [math.log(v) - logmean for v in values]


def life_table_loop(qx, radix):
    lx = radix
    out = []
    for q in qx:
        out.append(lx * q)
        lx = lx * (1.0 - q)
    return out


def gini_double_sum(ages, values, weights):
    n = len(ages)
    mass = sum(weights[i] * values[i] for i in range(n))
    mean = sum(weights[i] * values[i] * ages[i] for i in range(n)) / mass
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += weights[i] * weights[j] * values[i] * values[j] * abs(ages[i] - ages[j])
    return total / (2.0 * mean * mass * mass)


def kld_loop(p, q):
    return sum((a - b) * math.log(a / b) for a, b in zip(p, q))


def jsd_loop(p, q):
    total = 0.0
    for a, b in zip(p, q):
        m = math.sqrt(a * b)
        total += 0.5 * a * math.log(a / m) + 0.5 * b * math.log(b / m)
    return total


def autocov_loop(x, lag):
    """Lag-``lag`` autocovariance surface of a ``(T, p)`` array, divisor T."""
    T, p = len(x), len(x[0])
    mean = [sum(x[t][u] for t in range(T)) / T for u in range(p)]
    out = [[0.0] * p for _ in range(p)]
    for u in range(p):
        for v in range(p):
            s = 0.0
            if lag >= 0:
                for t in range(T - lag):
                    s += (x[t][u] - mean[u]) * (x[t + lag][v] - mean[v])
            else:
                for t in range(-lag, T):
                    s += (x[t][u] - mean[u]) * (x[t + lag][v] - mean[v])
            out[u][v] = s / T
    return out


def jacobi_eigh(a, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi eigenvalue algorithm for a symmetric matrix.

    Returns eigenvalues in decreasing order and the matching eigenvectors as
    columns.
    """
    a = [list(map(float, row)) for row in a]
    n = len(a)
    v = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    for _ in range(max_sweeps):
        off = sum(a[i][j] ** 2 for i in range(n) for j in range(n) if i != j)
        scale = sum(a[i][i] ** 2 for i in range(n)) or 1.0
        if off <= tol * tol * scale:
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                if a[i][j] == 0.0:
                    continue
                theta = (a[j][j] - a[i][i]) / (2.0 * a[i][j])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    aki, akj = a[k][i], a[k][j]
                    a[k][i] = c * aki - s * akj
                    a[k][j] = s * aki + c * akj
                for k in range(n):
                    aik, ajk = a[i][k], a[j][k]
                    a[i][k] = c * aik - s * ajk
                    a[j][k] = s * aik + c * ajk
                for k in range(n):
                    vki, vkj = v[k][i], v[k][j]
                    v[k][i] = c * vki - s * vkj
                    v[k][j] = s * vki + c * vkj
    lam = [a[i][i] for i in range(n)]
    order = sorted(range(n), key=lambda i: -lam[i])
    return np.array([lam[i] for i in order]), np.array([[v[k][i] for i in order] for k in range(n)])


def evr_hand(theta, T):
    """Eigenvalue-ratio rule evaluated literally."""
    delta = 1.0 / math.log(max(theta[0], T))
    pool = theta[: min(T, len(theta))]
    mean = sum(pool) / len(pool)
    # theta[0] >= mean holds exactly; rounding of the mean must not drop it
    kmax = max(1, sum(1 for t in theta if t >= mean))
    best_k, best = None, None
    for k in range(1, kmax + 1):
        if k >= len(theta):
            val = 1.0
        else:
            r = theta[k] / theta[k - 1]
            val = r if r >= delta else 1.0
        if best is None or val < best:
            best_k, best = k, val
    return best_k


def median_polish_loop(y, max_iter=50, tol=1e-12):
    """Tukey median polish of a rows x cols x replicates array at one age."""
    import statistics

    R, C, T = len(y), len(y[0]), len(y[0][0])
    res = [[[y[r][c][t] for t in range(T)] for c in range(C)] for r in range(R)]
    overall = statistics.median(res[r][c][t] for r in range(R) for c in range(C) for t in range(T))
    for r in range(R):
        for c in range(C):
            for t in range(T):
                res[r][c][t] -= overall
    row = [0.0] * R
    col = [0.0] * C
    for _ in range(max_iter):
        change = 0.0
        for r in range(R):
            m = statistics.median(res[r][c][t] for c in range(C) for t in range(T))
            row[r] += m
            change = max(change, abs(m))
            for c in range(C):
                for t in range(T):
                    res[r][c][t] -= m
        m = statistics.median(col)
        overall += m
        col = [x - m for x in col]
        for c in range(C):
            m = statistics.median(res[r][c][t] for r in range(R) for t in range(T))
            col[c] += m
            change = max(change, abs(m))
            for r in range(R):
                for t in range(T):
                    res[r][c][t] -= m
        m = statistics.median(row)
        overall += m
        row = [x - m for x in row]
        if change <= tol:
            break
    return overall, row, col, res


def ar_recursion(ar, intercept, history, H):
    hist = list(history)
    out = []
    for _ in range(H):
        v = intercept + sum(a * hist[-i - 1] for i, a in enumerate(ar))
        out.append(v)
        hist.append(v)
    return out
