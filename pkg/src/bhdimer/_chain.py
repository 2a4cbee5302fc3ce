"""Real Bethe root sets in offset coordinates.

The solver-produced states (ground and first excited) consist of real roots
separated by gaps slightly larger than c, with the largest root sitting
extremely close to -delta/c (ground state) or to 0 (first excited state at
strong coupling).  Writing the roots as plain doubles throws those small
offsets away, so each root is instead described by one log-offset:

    ('below', b)   lam = b - exp(x)          b = -delta/c for the ground state
    ('above', b)   lam = b + exp(x)          b = 0 for the excited top root
    'chain'        lam = lam_prev - c - exp(x)

The Bethe equations are solved in log form,

    log(c lam_n (c lam_n + delta)) - sum_j log((lam_n - lam_j - c) / (lam_n - lam_j + c)) = 0,

with every near-cancelling difference taken directly from the offsets.
"""
from __future__ import annotations

import math

import numpy as np

BELOW = "below"
ABOVE = "above"
CHAIN = "chain"
LAYOUT_KINDS = (BELOW, ABOVE, CHAIN)

# exp(-700) is still a normal double; below that the offsets underflow.
LOG_FLOOR = -700.0


def check_layout(layout) -> tuple:
    """Normalize a layout to a tuple of (kind, base) pairs.

    'below' and 'above' roots sit at base -/+ exp(x); a 'chain' root sits
    c + exp(x) under its predecessor and ignores its base.
    """
    out = []
    for entry in layout:
        kind, base = (entry, 0.0) if isinstance(entry, str) else entry
        if kind not in LAYOUT_KINDS:
            raise ValueError(f"unknown layout kind {kind!r}")
        out.append((kind, float(base)))
    if not out:
        raise ValueError("empty layout")
    if out[0][0] == CHAIN:
        raise ValueError("the first root cannot be chained")
    return tuple(out)


def ground_layout(N, c, delta):
    return ((BELOW, -delta / c),) + ((CHAIN, 0.0),) * (N - 1)


def quantities(layout, x, c, delta):
    """Roots and the cancellation-prone differences, computed from offsets.

    Returns (lam, plus_a, num, dm, dp, T) where plus_a = lam + delta/c,
    num = lam + c, dm/dp are the upper-triangular lam_i - lam_j -/+ c
    (i < j), and T = d lam / d x.
    """
    N = len(layout)
    a = delta / c
    e = np.exp(x)
    lam = np.empty(N)
    plus_a = np.empty(N)
    num = np.empty(N)
    T = np.zeros((N, N))
    for i, (kind, base) in enumerate(layout):
        if kind == CHAIN:
            lam[i] = lam[i - 1] - c - e[i]
            plus_a[i] = plus_a[i - 1] - c - e[i]
            num[i] = lam[i - 1] - e[i]
            T[i] = T[i - 1]
            T[i, i] = -e[i]
        else:
            sgn = -1.0 if kind == BELOW else 1.0
            lam[i] = base + sgn * e[i]
            plus_a[i] = (base + a) + sgn * e[i]
            num[i] = (base + c) + sgn * e[i]
            T[i, i] = sgn * e[i]
    diff = lam[:, None] - lam[None, :]
    dm = diff - c
    dp = diff + c
    for i in range(1, N):
        if layout[i][0] == CHAIN:
            dm[i - 1, i] = e[i]
            dp[i - 1, i] = 2.0 * c + e[i]
    upper = np.triu(np.ones((N, N), dtype=bool), 1)
    dm = np.where(upper, dm, 1.0)
    dp = np.where(upper, dp, 1.0)
    return lam, plus_a, num, dm, dp, T


def _exact_logs(layout, x, c, delta):
    """Masks of roots whose lam or lam + delta/c is exactly +/- exp(x).

    For those the logarithm is x itself, which stays exact even when exp(x)
    underflows (offsets far below -700 occur for the first excited state at
    strong coupling).
    """
    a = delta / c
    lam_exact = np.array([kind != CHAIN and base == 0.0 for kind, base in layout])
    plus_exact = np.array([kind != CHAIN and base + a == 0.0 for kind, base in layout])
    sign = np.array([-1.0 if kind == BELOW else 1.0 for kind, _ in layout])
    return lam_exact, plus_exact, sign


def _chained_pairs(layout) -> list[int]:
    return [i for i in range(1, len(layout)) if layout[i][0] == CHAIN]


def log_parts(layout, x, c, delta):
    """(log|lam|, sign(lam), log|plus_a|, sign(plus_a), log|num|) with exact offsets honoured."""
    lam, plus_a, num, _, _, _ = quantities(layout, x, c, delta)
    lam_exact, plus_exact, sign = _exact_logs(layout, x, c, delta)
    with np.errstate(divide="ignore"):
        loglam = np.where(lam_exact, x, np.log(np.abs(lam)))
        logplus = np.where(plus_exact, x, np.log(np.abs(plus_a)))
        lognum = np.log(np.abs(num))
    for i in _chained_pairs(layout):
        if lam_exact[i - 1]:
            # num_i = lam_{i-1} - exp(x_i) with lam_{i-1} = +/- exp(x_{i-1})
            a, b = x[i - 1], x[i]
            if sign[i - 1] < 0:
                lognum[i] = np.logaddexp(a, b)
            elif a != b:
                lognum[i] = max(a, b) + math.log(-math.expm1(-abs(a - b)))
            else:
                lognum[i] = -np.inf
    lam_sign = np.where(lam_exact, sign, np.sign(lam))
    plus_sign = np.where(plus_exact, sign, np.sign(plus_a))
    return loglam, lam_sign, logplus, plus_sign, lognum


def residual_and_jacobian(layout, x, c, delta, jacobian=True):
    """Log-form Bethe residuals, their sign consistency, and d residual / d x.

    ``sign_ok[n]`` is False where the two sides of equation n have opposite
    signs, i.e. where no choice of magnitudes can satisfy it.
    """
    N = len(layout)
    lam, plus_a, _, dm, dp, T = quantities(layout, x, c, delta)
    loglam, lam_sign, logplus, plus_sign, _ = log_parts(layout, x, c, delta)
    upper = np.triu(np.ones((N, N), dtype=bool), 1)
    adjacent = _chained_pairs(layout)
    with np.errstate(divide="ignore"):
        logdm = np.log(np.abs(dm))
    for i in adjacent:
        logdm[i - 1, i] = x[i]
    L = np.where(upper, logdm - np.log(np.abs(dp)), 0.0)
    R = 2.0 * math.log(c) + loglam + logplus - L.sum(axis=1) + L.sum(axis=0)

    neg = np.where(upper, (dm < 0) ^ (dp < 0), False)
    rhs_neg = (neg.sum(axis=1) + neg.sum(axis=0)) % 2 == 1
    sign_ok = (lam_sign * plus_sign > 0) != rhs_neg
    if not jacobian:
        return R, sign_ok, None

    lam_exact, plus_exact, _ = _exact_logs(layout, x, c, delta)
    eye = np.eye(N)
    with np.errstate(invalid="ignore", divide="ignore"):
        dlog_lam = np.where(lam_exact[:, None], eye, T / lam[:, None])
        dlog_plus = np.where(plus_exact[:, None], eye, T / plus_a[:, None])
    J = dlog_lam + dlog_plus
    # pair(n, j) = a[n, j] (T_n - T_j) with a = 1/dm - 1/dp on the upper triangle,
    # summed as matrix products so no N^3 tensor is formed
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(upper, 1.0 / dm - 1.0 / dp, 0.0)
    for i in adjacent:
        # dm = exp(x_i) exactly, so d log(dm) / dx is the unit vector e_i
        a[i - 1, i] = -1.0 / dp[i - 1, i]
    # row n gets -sum_{j>n} pair(n, j) + sum_{j<n} pair(j, n)
    J += a.T @ T - a.sum(axis=0)[:, None] * T
    J -= a.sum(axis=1)[:, None] * T - a @ T
    for i in adjacent:
        J[i, i] += 1.0
        J[i - 1, i] -= 1.0
    return R, sign_ok, J


def residual_norm(layout, x, c, delta) -> float:
    R, sign_ok, _ = residual_and_jacobian(layout, x, c, delta, jacobian=False)
    R = np.abs(R) + np.where(sign_ok, 0.0, math.pi)
    return float(np.max(R)) if np.all(np.isfinite(R)) else math.inf


def energy(layout, x, c, delta) -> float:
    """Energy from the root product, using the offset-accurate lam + c."""
    lam, _, num, _, _, _ = quantities(layout, x, c, delta)
    loglam, lam_sign, _, _, lognum = log_parts(layout, x, c, delta)
    if np.any(np.isneginf(lognum)):
        return -1.0 / (c * c)
    num_sign = np.sign(num)
    for i in _chained_pairs(layout):
        if layout[i - 1][0] != CHAIN and layout[i - 1][1] == 0.0:
            num_sign[i] = 1.0 if (layout[i - 1][0] == ABOVE and x[i - 1] > x[i]) else -1.0
    sign = float(np.prod(num_sign * lam_sign))
    logmag = float(np.sum(lognum - loglam))
    return (-1.0 + sign * math.exp(logmag)) / (c * c)


def newton(layout, x0, c, delta, tol=1e-10, max_iter=200, max_halvings=20, max_step=math.inf):
    """Damped Newton on the log-form residual.

    Returns (x, iterations, converged, residual_norm).  The step is halved
    while the residual norm fails to decrease (at most ``max_halvings``
    times); ``max_step`` optionally caps the largest log-offset change.
    Offsets deep in a chain may need to move by hundreds in one step, so
    the default leaves steps unclipped.
    """
    lam_exact, plus_exact, _ = _exact_logs(layout, np.zeros(len(layout)), c, delta)
    chained = np.array([kind == CHAIN for kind, _ in layout])
    # offsets whose logarithm enters the equations exactly may go arbitrarily low
    floor = np.where(lam_exact | plus_exact | chained, -np.inf, LOG_FLOOR)
    x = np.maximum(np.asarray(x0, dtype=float), floor)
    with np.errstate(all="ignore"):
        R, sign_ok, J = residual_and_jacobian(layout, x, c, delta)
    merit = float(R @ R)
    if not np.isfinite(merit):
        return x, 0, False, math.inf
    for it in range(max_iter):
        rnorm = residual_norm(layout, x, c, delta)
        if rnorm <= tol:
            return x, it, True, rnorm
        try:
            step = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -R, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return x, it, False, rnorm
        biggest = float(np.max(np.abs(step)))
        if biggest > max_step:
            step *= max_step / biggest
        t = 1.0
        for _ in range(max_halvings + 1):
            trial = np.maximum(x + t * step, floor)
            with np.errstate(all="ignore"):
                Rt, sign_t, Jt = residual_and_jacobian(layout, trial, c, delta)
            mt = float(Rt @ Rt)
            if np.isfinite(mt) and np.all(np.isfinite(Jt)) and mt < merit:
                break
            t *= 0.5
        else:
            return x, it, False, rnorm
        x, R, J, merit = trial, Rt, Jt, mt
    rnorm = residual_norm(layout, x, c, delta)
    return x, max_iter, rnorm <= tol, rnorm
