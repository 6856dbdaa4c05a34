"""Discrete-time threshold-agent market.

M slow agents hold a state of +1 (own) or -1 (not own) and an interval
``(lower, upper)`` around the current price. The price follows a geometric
Brownian step perturbed by the change in weighted sentiment; agents whose
interval no longer contains the price switch state and draw a fresh interval.

Two equivalent code paths exist. The scalar operations (:func:`sentiment`,
:func:`price_step`, :func:`drift_thresholds`, :func:`detect_and_switch`,
:func:`step`) work one agent at a time and read like the model definition.
:class:`Market` drives the array kernels in :mod:`._market_kernels` and is what
long runs use. Both draw from the same :class:`MarketStreams` in the same order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from . import _jit
from ._market_kernels import advance_numba, advance_numpy

TRADING_DAYS_PER_YEAR = 252

# float64 budget for one chunk of pre-drawn threshold noise
_NOISE_CHUNK = 1 << 22
_RESET_POOL_MIN = 1 << 16


class InvalidInputError(ValueError):
    pass


@dataclass
class Agent:
    state: int
    lower: float
    upper: float
    weight: float = 1.0
    herding_coeff: float = 0.0


@dataclass(frozen=True)
class MarketParams:
    """Model constants. Defaults are the reference setting."""

    num_agents: int = 100_000
    timestep: float = 4e-6
    coupling: float = 0.1
    threshold_noise: float = 1e-8
    # threshold_noise is the variance of the per-step threshold perturbation;
    # set False to read it as a standard deviation instead
    noise_is_variance: bool = True
    reset_low_range: tuple[float, float] = (0.05, 0.25)
    reset_high_range: tuple[float, float] = (0.05, 0.25)
    herding_range: tuple[float, float] = (20.0, 100.0)
    volatility_fn: str = "sentiment_linear"
    volatility_a: float = 1.0
    volatility_b: float = 2.0
    substeps_per_day: int = 10
    initial_price: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_agents < 1:
            raise InvalidInputError("num_agents must be >= 1")
        if not self.timestep > 0:
            raise InvalidInputError("timestep must be > 0")
        if self.coupling < 0:
            raise InvalidInputError("coupling must be >= 0")
        if self.threshold_noise < 0:
            raise InvalidInputError("threshold_noise must be >= 0")
        if self.substeps_per_day < 1:
            raise InvalidInputError("substeps_per_day must be >= 1")
        if not self.initial_price > 0:
            raise InvalidInputError("initial_price must be > 0")
        for name in ("reset_low_range", "reset_high_range", "herding_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InvalidInputError(f"{name} bounds out of order: {lo} > {hi}")
        for name in ("reset_low_range", "reset_high_range"):
            if getattr(self, name)[0] <= 0:
                raise InvalidInputError(f"{name} must be strictly positive")
        if self.herding_range[0] < 0:
            raise InvalidInputError("herding_range must be >= 0")
        if self.volatility_fn not in ("constant_one", "sentiment_linear"):
            raise InvalidInputError(f"unknown volatility_fn {self.volatility_fn!r}")

    @property
    def noise_std(self) -> float:
        return math.sqrt(self.threshold_noise) if self.noise_is_variance else self.threshold_noise

    @property
    def volatility_coeffs(self) -> tuple[float, float]:
        if self.volatility_fn == "constant_one":
            return 1.0, 0.0
        return self.volatility_a, self.volatility_b

    def volatility(self, sigma: float) -> float:
        a, b = self.volatility_coeffs
        return a + b * abs(sigma)


@dataclass
class MarketState:
    """Array-of-agents view of the market at the start of step ``step_index``."""

    price: float
    states: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    weights: np.ndarray
    herding: np.ndarray
    weighted_sum: float
    prev_sentiment: float
    step_index: int = 0
    total_weight: float = field(init=False)

    def __post_init__(self):
        self.total_weight = float(np.sum(self.weights))

    @property
    def sentiment(self) -> float:
        return self.weighted_sum / self.total_weight

    @property
    def num_agents(self) -> int:
        return self.states.shape[0]

    @property
    def agents(self) -> Iterator[Agent]:
        for i in range(self.num_agents):
            yield Agent(
                int(self.states[i]),
                float(self.lower[i]),
                float(self.upper[i]),
                float(self.weights[i]),
                float(self.herding[i]),
            )

    def copy(self) -> "MarketState":
        return replace(
            self,
            states=self.states.copy(),
            lower=self.lower.copy(),
            upper=self.upper.copy(),
            weights=self.weights.copy(),
            herding=self.herding.copy(),
        )

    def recomputed_sentiment(self) -> float:
        return sentiment_of_arrays(self.states, self.weights)


class MarketStreams(NamedTuple):
    """Independent generators so each noise source is reproducible on its own."""

    init: np.random.Generator
    price: np.random.Generator
    noise: np.random.Generator
    reset: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "MarketStreams":
        children = np.random.SeedSequence(seed).spawn(4)
        return cls(*(np.random.default_rng(c) for c in children))


@dataclass
class ReturnSeries:
    daily_log_returns: np.ndarray
    substeps_per_day: int


@dataclass
class RunResult:
    prices: np.ndarray
    sentiment: np.ndarray
    switches: np.ndarray
    returns: ReturnSeries
    final_state: MarketState


def sentiment_of_arrays(states: np.ndarray, weights: np.ndarray) -> float:
    if len(states) == 0:
        raise InvalidInputError("empty agent set")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise InvalidInputError("weights must be positive")
    return float(np.dot(weights, states) / weights.sum())


def sentiment(agents: Sequence[Agent], total_weight: float | None = None) -> float:
    """Weighted average of agent states, in [-1, 1]."""
    if not agents:
        raise InvalidInputError("empty agent set")
    if any(a.weight <= 0 for a in agents):
        raise InvalidInputError("weights must be positive")
    if total_weight is None:
        total_weight = sum(a.weight for a in agents)
    if total_weight <= 0:
        raise InvalidInputError("total weight must be positive")
    return sum(a.weight * a.state for a in agents) / total_weight


def price_step(p: float, dsigma: float, eta: float, params: MarketParams, sigma: float = 0.0) -> float:
    """``p * exp(sqrt(h) * eta * f(sigma) - h/2 + kappa * dsigma)``."""
    if not p > 0:
        raise InvalidInputError("price must be positive")
    h = params.timestep
    f = params.volatility(sigma)
    return p * math.exp(math.sqrt(h) * eta * f - 0.5 * h + params.coupling * dsigma)


def drift_thresholds(agent: Agent, sigma: float, params: MarketParams, rng: np.random.Generator | None) -> Agent:
    """Herding drift for minority agents plus symmetric threshold noise.

    Two normals are drawn (lower then upper) whenever the noise level is
    positive, for majority and minority agents alike.
    """
    lo, up = agent.lower, agent.upper
    if agent.state * sigma < 0.0:
        d = agent.herding_coeff * (params.timestep * abs(sigma))
        lo = lo + d
        up = up - d
    if params.threshold_noise > 0:
        std = params.noise_std
        lo = lo + rng.standard_normal() * std
        up = up + rng.standard_normal() * std
    return replace(agent, lower=lo, upper=up)


def reset_interval(p: float, z_low: float, z_high: float) -> tuple[float, float]:
    return p / (1.0 + z_low), p * (1.0 + z_high)


def detect_and_switch(agent: Agent, p: float, params: MarketParams, rng: np.random.Generator) -> tuple[Agent, bool]:
    """Flip the agent if ``p`` is not strictly inside its interval.

    An inverted interval (``lower >= upper``) never contains ``p`` and so always
    triggers a switch at the current price.
    """
    if not p > 0:
        raise InvalidInputError("price must be positive")
    if agent.lower < p and p < agent.upper:
        return agent, False
    zl_lo, zl_hi = params.reset_low_range
    zu_lo, zu_hi = params.reset_high_range
    zl = zl_lo + (zl_hi - zl_lo) * rng.random()
    zu = zu_lo + (zu_hi - zu_lo) * rng.random()
    lo, up = reset_interval(p, zl, zu)
    return replace(agent, state=-agent.state, lower=lo, upper=up), True


def initial_state(params: MarketParams, rng: np.random.Generator, weights: np.ndarray | None = None) -> MarketState:
    """Fair-coin states and reset-rule intervals around the initial price."""
    m = params.num_agents
    p0 = params.initial_price
    states = np.where(rng.random(m) < 0.5, 1, -1).astype(np.int64)
    zl = rng.uniform(*params.reset_low_range, size=m)
    zu = rng.uniform(*params.reset_high_range, size=m)
    herding = rng.uniform(*params.herding_range, size=m)
    if weights is None:
        weights = np.ones(m)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (m,) or np.any(weights <= 0):
        raise InvalidInputError("weights must be a positive array of length num_agents")
    ws = float(np.dot(weights, states))
    return MarketState(
        price=p0,
        states=states,
        lower=p0 / (1.0 + zl),
        upper=p0 * (1.0 + zu),
        weights=weights,
        herding=herding,
        weighted_sum=ws,
        prev_sentiment=ws / float(np.sum(weights)),
    )


def step(state: MarketState, params: MarketParams, streams: MarketStreams) -> MarketState:
    """One synchronous update, agent by agent.

    Order: price moves using the sentiment change from the previous step's
    switches; every interval drifts; every agent is checked against the new
    price; sentiment is recomputed. Returns a new state.
    """
    sigma = state.sentiment
    eta = streams.price.standard_normal()
    p = price_step(state.price, sigma - state.prev_sentiment, eta, params, sigma)
    new = state.copy()
    wsum = state.weighted_sum
    for i, agent in enumerate(state.agents):
        agent = drift_thresholds(agent, sigma, params, streams.noise)
        agent, switched = detect_and_switch(agent, p, params, streams.reset)
        if switched:
            wsum = wsum + 2.0 * agent.state * agent.weight
        new.states[i] = agent.state
        new.lower[i] = agent.lower
        new.upper[i] = agent.upper
    new.price = p
    new.weighted_sum = wsum
    new.prev_sentiment = sigma
    new.step_index = state.step_index + 1
    return new


class Market:
    """Resumable simulation driver over the array kernels.

    Random numbers are drawn in chunks: one price normal per step, two
    threshold normals per agent per step (lower, upper), and a pool of reset
    uniforms consumed two per switch in agent order.
    """

    def __init__(self, params: MarketParams, state: MarketState | None = None, weights=None, use_numba: bool | None = None):
        self.params = params
        self.streams = MarketStreams.from_seed(params.rng_seed)
        if state is None:
            state = initial_state(params, self.streams.init, weights)
        self.state = state
        self._pool = np.empty(0)
        self._pool_pos = 0
        if use_numba is None:
            use_numba = _jit.USE_NUMBA
        self._kernel = advance_numba if use_numba else advance_numpy

    def _refill(self):
        m = self.state.num_agents
        rest = self._pool[self._pool_pos :]
        fresh = self.streams.reset.random(max(_RESET_POOL_MIN, 8 * m))
        self._pool = np.concatenate([rest, fresh])
        self._pool_pos = 0

    def advance(self, n_steps: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Run ``n_steps`` steps; return per-step price, sentiment and switch count."""
        p = self.params
        s = self.state
        m = s.num_agents
        prices = np.empty(n_steps)
        sigmas = np.empty(n_steps)
        switches = np.zeros(n_steps, dtype=np.int64)
        f_a, f_b = p.volatility_coeffs
        std = p.noise_std
        chunk = max(1, _NOISE_CHUNK // (2 * m))
        done = 0
        while done < n_steps:
            n = min(chunk, n_steps - done)
            eta = self.streams.price.standard_normal(n)
            if p.threshold_noise > 0:
                noise = self.streams.noise.standard_normal((n, m, 2)) * std
            else:
                noise = np.empty((0, m, 2))
            k0 = 0
            while k0 < n:
                if self._pool.shape[0] - self._pool_pos < 2 * m:
                    self._refill()
                k, self._pool_pos, s.price, s.weighted_sum, s.prev_sentiment = self._kernel(
                    eta[k0:],
                    noise[k0:] if noise.shape[0] else noise,
                    self._pool,
                    self._pool_pos,
                    s.states,
                    s.lower,
                    s.upper,
                    s.weights,
                    s.herding,
                    s.price,
                    s.weighted_sum,
                    s.prev_sentiment,
                    s.total_weight,
                    p.timestep,
                    p.coupling,
                    f_a,
                    f_b,
                    p.reset_low_range[0],
                    p.reset_low_range[1],
                    p.reset_high_range[0],
                    p.reset_high_range[1],
                    prices[done + k0 :],
                    sigmas[done + k0 :],
                    switches[done + k0 :],
                )
                k0 += k
            done += n
        s.step_index += n_steps
        return prices, sigmas, switches


def daily_returns(prices: np.ndarray, substeps_per_day: int) -> ReturnSeries:
    """Log-returns over consecutive blocks of ``substeps_per_day`` steps.

    ``prices`` includes the initial price, so it has ``total_steps + 1`` entries.
    """
    n_days = (len(prices) - 1) // substeps_per_day
    closes = np.log(prices[: n_days * substeps_per_day + 1 : substeps_per_day])
    return ReturnSeries(np.diff(closes), substeps_per_day)


def run(params: MarketParams, total_days: int, weights=None, use_numba: bool | None = None) -> RunResult:
    """Simulate ``total_days`` days from a fresh initial state."""
    if total_days < 1:
        raise InvalidInputError("total_days must be >= 1")
    market = Market(params, weights=weights, use_numba=use_numba)
    s0 = market.state
    p0, sig0 = s0.price, s0.sentiment
    prices, sigmas, switches = market.advance(total_days * params.substeps_per_day)
    prices = np.concatenate([[p0], prices])
    sigmas = np.concatenate([[sig0], sigmas])
    switches = np.concatenate([[0], switches])
    return RunResult(prices, sigmas, switches, daily_returns(prices, params.substeps_per_day), market.state)


@dataclass
class ThresholdHistogram:
    edges: np.ndarray
    counts: dict  # state (+1 / -1, or 0 when not split) -> counts per bin
    underflow: dict
    overflow: dict

    def total(self) -> int:
        return int(sum(c.sum() for c in self.counts.values()) + sum(self.underflow.values()) + sum(self.overflow.values()))


def threshold_density(state: MarketState, side: str = "lower", by_state: bool = True, bins=50) -> ThresholdHistogram:
    """Histogram of threshold positions on the price axis, optionally per state.

    With an integer ``bins`` the edges span all agents' thresholds on that side,
    so both states share the same bins. Thresholds outside explicit edges are
    counted in ``underflow``/``overflow`` so the totals always equal M.
    """
    if side not in ("lower", "upper"):
        raise InvalidInputError("side must be 'lower' or 'upper'")
    values = state.lower if side == "lower" else state.upper
    if np.ndim(bins) == 0:
        if int(bins) < 1:
            raise InvalidInputError("bins must be >= 1")
        edges = np.histogram_bin_edges(values, bins=int(bins))
    else:
        edges = np.asarray(bins, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise InvalidInputError("bin edges must be increasing with at least two entries")
    groups = {1: state.states == 1, -1: state.states == -1} if by_state else {0: np.ones(state.num_agents, bool)}
    counts, under, over = {}, {}, {}
    for key, mask in groups.items():
        v = values[mask]
        counts[key] = np.histogram(v, bins=edges)[0]
        under[key] = int(np.sum(v < edges[0]))
        over[key] = int(np.sum(v > edges[-1]))
    return ThresholdHistogram(edges, counts, under, over)
