"""Monte Carlo busy periods of single-server queues.

A busy period starts with one customer arriving at an empty queue and ends
the first time the system is empty again. Plain M/G/1 queues go through a
work-accumulation fast path; anything with reneging, anti-customers or
rates that vary with time or queue length goes through the explicit-queue
event loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _jit
from ._queue_kernels import general_busy, mg1_busy, run_buffered
from .distributions import ServiceDist

DEFAULT_BUFFER = 1 << 20


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RateTable:
    """Piecewise-constant rate in time and number-in-system.

    ``values[r, c]`` applies while ``time_edges[r-1] <= t < time_edges[r]`` and
    the number in system is ``c`` (the last column covers all larger counts).
    """

    time_edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        e = np.ascontiguousarray(self.time_edges, dtype=float).reshape(-1)
        v = np.ascontiguousarray(np.atleast_2d(self.values), dtype=float)
        if v.shape[0] != e.size + 1:
            raise ConfigurationError("rate table needs one row per time interval")
        if np.any(np.diff(e) <= 0):
            raise ConfigurationError("time edges must increase")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ConfigurationError("rates must be finite and >= 0")
        object.__setattr__(self, "time_edges", e)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, rate: float) -> "RateTable":
        return cls(np.empty(0), np.array([[float(rate)]]))

    @classmethod
    def by_length(cls, rates, time_edges=None) -> "RateTable":
        rates = np.atleast_2d(np.asarray(rates, dtype=float))
        return cls(np.empty(0) if time_edges is None else time_edges, rates)

    @classmethod
    def coerce(cls, rate) -> "RateTable":
        if rate is None:
            return cls.constant(0.0)
        if isinstance(rate, RateTable):
            return rate
        return cls.constant(rate)

    def __call__(self, t: float, n: int) -> float:
        row = int(np.searchsorted(self.time_edges, t, side="right"))
        return float(self.values[row, min(n, self.values.shape[1] - 1)])

    @property
    def is_constant(self) -> bool:
        return self.time_edges.size == 0 and np.all(self.values == self.values.flat[0])

    @property
    def max_rate(self) -> float:
        return float(self.values.max())

    @property
    def min_rate(self) -> float:
        return float(self.values.min())


@dataclass(frozen=True)
class AntiCustomers:
    """Arrivals that cancel ``size`` worth of queued work instead of adding any."""

    rate: float | RateTable
    size: ServiceDist


@dataclass(frozen=True)
class QueueParams:
    arrival: float | RateTable
    service: ServiceDist
    reneging: float | RateTable | None = None
    anti: AntiCustomers | None = None

    def __post_init__(self):
        table = RateTable.coerce(self.arrival)
        if not table.max_rate > 0:
            raise ConfigurationError("arrival rate must be > 0")

    @property
    def arrival_table(self) -> RateTable:
        return RateTable.coerce(self.arrival)

    @property
    def is_plain_mg1(self) -> bool:
        no_renege = self.reneging is None or RateTable.coerce(self.reneging).max_rate == 0
        return self.arrival_table.is_constant and no_renege and self.anti is None

    @property
    def rho(self) -> float:
        """Utilisation lambda * E[Y], using the largest arrival rate if it varies."""
        return self.arrival_table.max_rate * self.service.mean()

    def surely_stable(self) -> bool:
        if self.rho < 1:
            return True
        # only the rates in force as t -> infinity decide whether periods end
        if self.arrival_table.values[-1].max() * self.service.mean() < 1:
            return True
        if self.reneging is not None and RateTable.coerce(self.reneging).min_rate > 0:
            return True
        if self.anti is not None:
            anti = RateTable.coerce(self.anti.rate).min_rate * self.anti.size.mean()
            return self.rho - anti < 1
        return False


@dataclass
class BusyPeriodSample:
    durations: np.ndarray
    customers_served: np.ndarray
    reneged: np.ndarray
    work: np.ndarray
    truncated_count: int

    def __len__(self):
        return self.durations.size

    def moment(self, k: int) -> float:
        return float(np.mean(self.durations**k))


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_busy_periods(
    params: QueueParams,
    n_samples: int,
    rng=None,
    max_duration: float | None = None,
    buffer_size: int = DEFAULT_BUFFER,
    use_numba: bool | None = None,
    force_general: bool = False,
) -> BusyPeriodSample:
    """Draw ``n_samples`` busy periods.

    Busy periods longer than ``max_duration`` are abandoned and only counted in
    ``truncated_count``; the returned arrays hold completed periods only.
    """
    if n_samples < 1:
        raise ConfigurationError("n_samples must be >= 1")
    if max_duration is None:
        if not params.surely_stable():
            raise ConfigurationError(
                f"utilisation rho={params.rho:.6g} >= 1: busy periods are not almost surely finite; set max_duration"
            )
        max_duration = math.inf
    rng = _as_rng(rng)
    if use_numba is None:
        use_numba = _jit.USE_NUMBA

    def pick(k):
        return k if use_numba else k.py_func

    dur = np.empty(n_samples)
    served = np.empty(n_samples, dtype=np.int64)
    reneged = np.zeros(n_samples, dtype=np.int64)
    work = np.empty(n_samples)
    trunc = np.zeros(n_samples, dtype=np.bool_)
    svc = params.service.kernel_args()
    if params.is_plain_mg1 and not force_general:
        lam = params.arrival_table.max_rate
        run_buffered(pick(mg1_busy), rng, n_samples, buffer_size, lam, *svc, max_duration, dur, served, trunc)
        work[:] = dur
    else:
        arr = params.arrival_table
        ren = RateTable.coerce(params.reneging)
        if params.anti is None:
            anti = RateTable.constant(0.0)
            asz = ServiceDist.deterministic(1.0).kernel_args()
        else:
            anti = RateTable.coerce(params.anti.rate)
            asz = params.anti.size.kernel_args()
        run_buffered(
            pick(general_busy),
            rng,
            n_samples,
            buffer_size,
            arr.time_edges,
            arr.values,
            ren.time_edges,
            ren.values,
            anti.time_edges,
            anti.values,
            *svc,
            *asz,
            max_duration,
            dur,
            served,
            reneged,
            work,
            trunc,
        )
    keep = ~trunc
    return BusyPeriodSample(dur[keep], served[keep], reneged[keep], work[keep], int(trunc.sum()))
