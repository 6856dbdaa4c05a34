"""Positive random sizes: queue service times and agent trade weights.

Every draw is an inverse-CDF transform of one uniform so the compiled kernels
and the interpreted fallback consume identical buffers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._jit import njit

EXPONENTIAL, DETERMINISTIC, PARETO, EMPIRICAL = 0, 1, 2, 3
_KINDS = {"exponential": EXPONENTIAL, "deterministic": DETERMINISTIC, "pareto": PARETO, "empirical": EMPIRICAL}


@dataclass(frozen=True)
class ServiceMoments:
    m1: float
    m2: float
    m3: float
    m4: float

    def __post_init__(self):
        m = (self.m1, self.m2, self.m3, self.m4)
        if not all(v > 0 and math.isfinite(v) for v in m):
            raise ValueError("moments must be positive and finite")
        # Cauchy-Schwarz / Lyapunov: E[Y^2] >= E[Y]^2, E[Y^4] >= E[Y^2]^2, E[Y^3]^2 <= E[Y^2] E[Y^4]
        tol = 1e-12
        if self.m2 < self.m1**2 * (1 - tol) or self.m4 < self.m2**2 * (1 - tol) or self.m3**2 > self.m2 * self.m4 * (1 + tol):
            raise ValueError("moment sequence violates Cauchy-Schwarz")


@dataclass(frozen=True, eq=False)
class ServiceDist:
    kind: str
    p1: float = 0.0
    p2: float = 0.0
    samples: np.ndarray = field(default_factory=lambda: np.empty(0))

    @classmethod
    def exponential(cls, rate: float) -> "ServiceDist":
        if not rate > 0:
            raise ValueError("rate must be > 0")
        return cls("exponential", float(rate))

    @classmethod
    def deterministic(cls, value: float) -> "ServiceDist":
        if not value > 0:
            raise ValueError("value must be > 0")
        return cls("deterministic", float(value))

    @classmethod
    def pareto(cls, alpha: float, x_min: float) -> "ServiceDist":
        if not (alpha > 0 and x_min > 0):
            raise ValueError("alpha and x_min must be > 0")
        return cls("pareto", float(alpha), float(x_min))

    @classmethod
    def empirical(cls, samples) -> "ServiceDist":
        s = np.ascontiguousarray(samples, dtype=float)
        if s.ndim != 1 or s.size == 0 or np.any(s <= 0):
            raise ValueError("empirical samples must be a non-empty positive 1-d array")
        return cls("empirical", samples=s)

    @property
    def code(self) -> int:
        return _KINDS[self.kind]

    def kernel_args(self):
        return self.code, self.p1, self.p2, self.samples if self.samples.size else np.zeros(1)

    def moment(self, k: int) -> float:
        if self.kind == "exponential":
            return math.factorial(k) / self.p1**k
        if self.kind == "deterministic":
            return self.p1**k
        if self.kind == "pareto":
            a, xm = self.p1, self.p2
            return a * xm**k / (a - k) if a > k else math.inf
        return float(np.mean(self.samples**k))

    def mean(self) -> float:
        return self.moment(1)

    def moments(self) -> ServiceMoments:
        return ServiceMoments(*(self.moment(k) for k in (1, 2, 3, 4)))

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "exponential":
            return np.exp(-self.p1 * t)
        if self.kind == "deterministic":
            return (t < self.p1).astype(float)
        if self.kind == "pareto":
            return np.where(t < self.p2, 1.0, (self.p2 / np.maximum(t, self.p2)) ** self.p1)
        s = np.sort(self.samples)
        return 1.0 - np.searchsorted(s, t, side="right") / s.size

    def lst(self, s):
        """Laplace-Stieltjes transform E[exp(-s Y)]; complex ``s`` allowed where analytic."""
        if self.kind == "exponential":
            return self.p1 / (self.p1 + s)
        if self.kind == "deterministic":
            return np.exp(-s * self.p1)
        if self.kind == "empirical":
            return np.mean(np.exp(-np.multiply.outer(s, self.samples)), axis=-1)
        if np.iscomplexobj(s) or s < 0:
            raise ValueError("Pareto LST is only available for real s >= 0")
        if s == 0:
            return 1.0
        a, xm = self.p1, self.p2
        val, _ = integrate.quad(lambda y: math.exp(-s * y) * a * xm**a / y ** (a + 1), xm, math.inf, epsabs=1e-15, epsrel=1e-13)
        return val

    def scaled(self, c: float) -> "ServiceDist":
        """Distribution of ``c * Y``."""
        if not c > 0:
            raise ValueError("scale must be > 0")
        if self.kind == "exponential":
            return ServiceDist.exponential(self.p1 / c)
        if self.kind == "deterministic":
            return ServiceDist.deterministic(self.p1 * c)
        if self.kind == "pareto":
            return ServiceDist.pareto(self.p1, self.p2 * c)
        return ServiceDist.empirical(self.samples * c)

    def from_uniform(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "exponential":
            return -np.log1p(-u) / self.p1
        if self.kind == "deterministic":
            return np.full(u.shape, self.p1)
        if self.kind == "pareto":
            return self.p2 * (1.0 - u) ** (-1.0 / self.p1)
        return self.samples[(u * self.samples.size).astype(np.int64)]

    def sample(self, rng: np.random.Generator, size):
        return self.from_uniform(rng.random(size))


@njit
def draw(code, p1, p2, emp, u, pos):
    """Draw one value from the uniform buffer; returns (value, new_pos).

    Deterministic sizes consume nothing.
    """
    if code == DETERMINISTIC:
        return p1, pos
    x = u[pos]
    if code == EXPONENTIAL:
        return -math.log1p(-x) / p1, pos + 1
    if code == PARETO:
        return p2 * (1.0 - x) ** (-1.0 / p1), pos + 1
    return emp[int(x * emp.shape[0])], pos + 1
