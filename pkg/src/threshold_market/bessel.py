"""Modified Bessel function of the first kind, order one.

Power series up to ``x = 30``, Hankel asymptotic expansion beyond. Both
branches are computed exponentially scaled so large arguments do not
overflow.
"""
import numpy as np

SERIES_LIMIT = 30.0
_SERIES_TERMS = 120
_ASYMPTOTIC_TERMS = 40


def _series_i1(x):
    half = 0.5 * x
    q = half * half
    term = half.copy()
    total = half.copy()
    for k in range(_SERIES_TERMS):
        term = term * q / ((k + 1) * (k + 2))
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    return total


def _asymptotic_i1e(x):
    # e^{-x} I_1(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k prod_{j<=k} (4 - (2j-1)^2) / (k! (8x)^k)
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _ASYMPTOTIC_TERMS + 1):
        nxt = term * (-(4.0 - (2 * k - 1) ** 2)) / (k * 8.0 * x)
        # stop at the smallest term; the series is divergent past it
        grow = np.abs(nxt) >= np.abs(term)
        nxt = np.where(grow, 0.0, nxt)
        total = total + nxt
        term = np.where(grow, 0.0, nxt)
        if not np.any(term):
            break
    return total / np.sqrt(2.0 * np.pi * x)


def i1e(x):
    """``exp(-|x|) * I1(x)``, vectorised."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(ax)
    small = ax <= SERIES_LIMIT
    if np.any(small):
        xs = ax[small]
        out[small] = _series_i1(xs) * np.exp(-xs)
    if np.any(~small):
        out[~small] = _asymptotic_i1e(ax[~small])
    out = np.where(x < 0, -out, out)
    return out if out.ndim else float(out)


def i1(x):
    x = np.asarray(x, dtype=float)
    return i1e(x) * np.exp(np.abs(x))


def i1_series(x):
    """Defining power series, no crossover; accurate but overflows past ~700."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return _series_i1(np.abs(x)) * np.sign(x)


def i1e_asymptotic(x):
    return _asymptotic_i1e(np.atleast_1d(np.asarray(x, dtype=float)))
