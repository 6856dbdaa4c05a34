"""Instantaneous selling cascades and their single-server queue counterpart.

Positions are log-price depths below the level ``P*`` where the initiating
+1 agent switches. A +1 agent switching pushes the log-price down by
``2 * kappa * w / W``; an agent already in the -1 state that gets swept up
pushes it back up by its own jump. Read depth as time and jumps as service
times and the total drop is a busy period: +1 agents are customers, -1 agents
are anti-customers that cancel queued work but cannot un-serve it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _jit
from ._queue_kernels import poisson_cascades, run_buffered
from .distributions import ServiceDist
from .queue_sim import DEFAULT_BUFFER, AntiCustomers, QueueParams


class UnsupportedMappingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FieldGenerator:
    """Poisson field: thresholds at ``rate`` per unit log-price depth.

    Each threshold is independently an opposite-state (-1) agent with
    probability ``anti_fraction``. Weights are drawn from ``weights``; the
    initiator's weight too.
    """

    rate: float
    weights: ServiceDist
    anti_fraction: float = 0.0
    coupling: float = 0.1
    total_weight: float = 1000.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be > 0")
        if not 0 <= self.anti_fraction < 1:
            raise ValueError("anti_fraction must be in [0, 1)")
        if not (self.coupling > 0 and self.total_weight > 0):
            raise ValueError("coupling and total_weight must be > 0")

    @property
    def jump_scale(self) -> float:
        return 2.0 * self.coupling / self.total_weight

    @property
    def jumps(self) -> ServiceDist:
        return self.weights.scaled(self.jump_scale)


@dataclass
class ThresholdField:
    """Explicit thresholds below ``P*``: depth offsets, states and weights."""

    offsets: np.ndarray
    states: np.ndarray
    weights: np.ndarray
    coupling: float
    total_weight: float

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        self.states = np.asarray(self.states, dtype=np.int64).reshape(-1)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        n = self.offsets.size
        if self.states.size != n or self.weights.size != n:
            raise ValueError("offsets, states and weights must have equal length")
        if np.any(self.offsets < 0) or np.any(np.diff(self.offsets) < 0):
            raise ValueError("offsets must be >= 0 and sorted ascending")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be > 0")
        if not np.all(np.isin(self.states, (-1, 1))):
            raise ValueError("states must be +1 or -1")
        if not (self.coupling > 0 and self.total_weight > 0):
            raise ValueError("coupling and total_weight must be > 0")

    def jump(self, w: float) -> float:
        return 2.0 * self.coupling * w / self.total_weight

    @classmethod
    def sorted_from(cls, offsets, states, weights, coupling, total_weight) -> "ThresholdField":
        """Sort by offset; equal offsets keep their input order."""
        order = np.argsort(np.asarray(offsets, dtype=float), kind="stable")
        return cls(np.asarray(offsets)[order], np.asarray(states)[order], np.asarray(weights)[order], coupling, total_weight)


@dataclass
class CascadeOutcome:
    total_drop: float
    num_switches: int
    # (agent index, signed log-price move); index -1 is the initiator
    switches: list = field(default_factory=list)
    terminal_bounce: float = 0.0
    truncated: bool = False


def run_cascade(field_: ThresholdField, initiator_weight: float, max_switches: int = 10**7) -> CascadeOutcome:
    """Relax one cascade through an explicit field.

    The front starts at the initiator's jump. Thresholds are visited in order
    of depth while they lie at or above the front (the closed interval). A +1
    agent deepens the front by its jump; a -1 agent raises it by its jump but
    never above the depth being visited, and whatever is left over becomes
    the terminal bounce, at which point the cascade is over.
    """
    if not initiator_weight > 0:
        raise ValueError("initiator_weight must be > 0")
    first = field_.jump(initiator_weight)
    front = first
    log = [(-1, -first)]
    bounce = 0.0
    truncated = False
    for j in range(field_.offsets.size):
        x = field_.offsets[j]
        if x > front:
            break
        if len(log) >= max_switches:
            truncated = True
            break
        jump = field_.jump(field_.weights[j])
        if field_.states[j] == 1:
            front += jump
            log.append((j, -jump))
        else:
            room = front - x
            if jump >= room:
                bounce = jump - room
                front = x
                log.append((j, jump))
                break
            front -= jump
            log.append((j, jump))
    return CascadeOutcome(front, len(log), log, bounce, truncated)


@dataclass
class CascadeSample:
    drops: np.ndarray
    switches: np.ndarray
    bounces: np.ndarray
    truncated: np.ndarray


def sample_cascades(gen: FieldGenerator, n_samples: int, rng=None, max_switches: int = 10**7, buffer_size: int = DEFAULT_BUFFER, use_numba: bool | None = None) -> CascadeSample:
    """Independent cascades, each through a freshly generated Poisson field."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    if use_numba is None:
        use_numba = _jit.USE_NUMBA
    kernel = poisson_cascades if use_numba else poisson_cascades.py_func
    drops = np.empty(n_samples)
    sw = np.empty(n_samples, dtype=np.int64)
    bounce = np.empty(n_samples)
    trunc = np.zeros(n_samples, dtype=np.bool_)
    run_buffered(kernel, rng, n_samples, buffer_size, gen.rate, gen.anti_fraction, *gen.jumps.kernel_args(), max_switches, drops, sw, bounce, trunc)
    return CascadeSample(drops, sw, bounce, trunc)


def generate_field(gen: FieldGenerator, depth: float, rng) -> ThresholdField:
    """Materialise a Poisson field down to ``depth`` (for inspection and tests)."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    count = rng.poisson(gen.rate * depth)
    offsets = np.sort(rng.uniform(0.0, depth, count))
    states = np.where(rng.random(count) < gen.anti_fraction, -1, 1)
    weights = gen.weights.sample(rng, count)
    return ThresholdField(offsets, states, weights, gen.coupling, gen.total_weight)


def cascade_to_queue(gen) -> QueueParams:
    """Queue whose busy period has the law of the cascade's total drop.

    +1 thresholds arrive at ``rate * (1 - anti_fraction)`` with service time
    ``2 kappa w / W``; -1 thresholds become anti-customers at
    ``rate * anti_fraction`` cancelling the same amount of work.
    """
    if not isinstance(gen, FieldGenerator):
        raise UnsupportedMappingError("only Poisson field generators map onto a queue")
    jumps = gen.jumps
    anti = None
    if gen.anti_fraction > 0:
        anti = AntiCustomers(gen.rate * gen.anti_fraction, jumps)
    return QueueParams(arrival=gen.rate * (1.0 - gen.anti_fraction), service=jumps, anti=anti)
