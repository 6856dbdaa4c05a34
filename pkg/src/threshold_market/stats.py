"""Stylized-fact statistics: kurtosis, Hill tail index, autocorrelation.

Also the distribution-comparison helpers used by the queue and cascade checks
(empirical CDFs, sup distances, two-sample KS, histogram homogeneity).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps


class StatisticError(ValueError):
    """Raised when a statistic is undefined for the given input."""


@dataclass(frozen=True)
class TailEstimate:
    exponent: float
    k_used: int
    standard_error: float


@dataclass(frozen=True)
class ACF:
    lags: np.ndarray
    values: np.ndarray
    band: float  # half-width of the 95% white-noise band, 1.96 / sqrt(n)

    def fraction_within_band(self) -> float:
        return float(np.mean(np.abs(self.values) <= self.band))

    def fraction_above_band(self) -> float:
        return float(np.mean(self.values > self.band))


def excess_kurtosis(samples) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size < 4:
        raise StatisticError("need at least 4 samples")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if not m2 > 0:
        raise StatisticError("zero variance")
    return float(np.mean(d**4) / m2**2 - 3.0)


def default_hill_k(n: int, tail_fraction: float = 0.05) -> int:
    """Order statistics used by default: the top ``tail_fraction`` of the sample."""
    return max(10, int(tail_fraction * n))


def hill_estimate(samples, k: int) -> TailEstimate:
    """Hill estimator of the tail exponent from the ``k`` largest values.

    ``samples`` must be positive magnitudes (pass ``np.abs(returns)``).

    alpha = k / sum_{i<k} log(X_(i) / X_(k)), with X_(0) the maximum.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if k < 10:
        raise StatisticError("k must be >= 10")
    if not k < n / 2:
        raise StatisticError(f"k={k} must be below n/2 (n={n})")
    top = -np.partition(-x, k)[: k + 1]
    top.sort()
    top = top[::-1]
    if top[k] <= 0:
        raise StatisticError("top order statistics must be positive")
    s = np.sum(np.log(top[:k] / top[k]))
    if not s > 0:
        raise StatisticError("degenerate tail (ties at the threshold)")
    alpha = k / s
    return TailEstimate(float(alpha), int(k), float(alpha / np.sqrt(k)))


def hill_sweep(samples, ks) -> np.ndarray:
    """Hill exponents over a grid of ``k`` (one sort, cumulative log sums)."""
    x = np.sort(np.asarray(samples, dtype=float))[::-1]
    ks = np.asarray(ks, dtype=int)
    if ks.min() < 10 or ks.max() >= x.size / 2:
        raise StatisticError("k grid must lie in [10, n/2)")
    logs = np.log(x[: ks.max() + 1])
    csum = np.cumsum(logs)
    return ks / (csum[ks - 1] - ks * logs[ks])


def default_k_grid(n: int, lo: float = 0.01, hi: float = 0.10, num: int = 20) -> np.ndarray:
    ks = np.unique(np.geomspace(max(10, lo * n), min(hi * n, n / 2 - 1), num).astype(int))
    return ks[ks >= 10]


def hill_instability(samples, ks=None) -> float:
    """Relative drift of the Hill estimate as the tail shrinks.

    Slope of alpha(k) against log(n/k), divided by the mean estimate. A power
    law gives a value near zero; an exponential tail, where alpha(k) grows
    like log(n/k), gives roughly ``1 / mean(log(n/k))``.
    """
    x = np.asarray(samples, dtype=float)
    if ks is None:
        ks = default_k_grid(x.size)
    if np.unique(ks).size < 3:
        # too few order statistics to fit a drift
        return math.nan
    alphas = hill_sweep(x, ks)
    u = np.log(x.size / np.asarray(ks, dtype=float))
    slope = np.polyfit(u, alphas, 1)[0]
    return float(slope / np.mean(alphas))


# exponential-type tails land near 0.25 on the default grid, power laws near 0
STABLE_TAIL_LIMIT = 0.15


def tail_is_stable(samples, ks=None, limit: float = STABLE_TAIL_LIMIT) -> bool:
    """True when the Hill estimate does not drift with k (power-law-like tail)."""
    return abs(hill_instability(samples, ks)) < limit


def autocorrelation(samples, max_lag: int) -> ACF:
    """Biased sample ACF at lags ``1..max_lag`` via FFT."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if not 1 <= max_lag < n / 4:
        raise StatisticError("need 1 <= max_lag < n/4")
    d = x - x.mean()
    size = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(d, size)
    acov = np.fft.irfft(spec * np.conj(spec), size)[: max_lag + 1]
    if not acov[0] > 0:
        raise StatisticError("zero variance")
    return ACF(np.arange(1, max_lag + 1), acov[1:] / acov[0], 1.96 / np.sqrt(n))


def ecdf(samples):
    """Sorted sample and its right-continuous empirical CDF values."""
    x = np.sort(np.asarray(samples, dtype=float))
    return x, np.arange(1, x.size + 1) / x.size


def ecdf_at(samples_sorted: np.ndarray, t) -> np.ndarray:
    return np.searchsorted(samples_sorted, t, side="right") / samples_sorted.size


def sup_distance_to_cdf(samples, cdf) -> float:
    """Kolmogorov distance between a sample and a vectorised CDF callable."""
    return float(_sps.kstest(np.asarray(samples, dtype=float), cdf).statistic)


def ks_distance(a, b) -> float:
    return float(_sps.ks_2samp(a, b, method="asymp").statistic)


def empirical_survival(samples, t) -> np.ndarray:
    x = np.sort(np.asarray(samples, dtype=float))
    return 1.0 - np.searchsorted(x, t, side="right") / x.size


def dominates(a, b, grid=None, tol: float = 0.0) -> bool:
    """True if the empirical CDF of ``a`` is >= that of ``b`` (less ``tol``) on ``grid``.

    That is, ``a`` is stochastically smaller than ``b``. ``tol`` absorbs
    sampling noise where the two laws coincide.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if grid is None:
        grid = np.union1d(a, b)
    return bool(np.all(ecdf_at(a, grid) >= ecdf_at(b, grid) - tol))


def homogeneity_pvalue(counts_a, counts_b) -> float:
    """Chi-square p-value that two histograms on shared bins come from one law.

    Bins empty in both histograms are dropped.
    """
    table = np.vstack([np.asarray(counts_a), np.asarray(counts_b)]).astype(float)
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        raise StatisticError("need at least two non-empty bins")
    return float(_sps.chi2_contingency(table, correction=False)[1])


def log_log_slope(t, survival) -> float:
    """Least-squares slope of log(survival) against log(t) over positive entries."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(survival, dtype=float)
    ok = (t > 0) & (s > 0)
    if ok.sum() < 2:
        raise StatisticError("need at least two positive points")
    return float(np.polyfit(np.log(t[ok]), np.log(s[ok]), 1)[0])
