"""Closed-form and semi-analytic busy-period results for M/G/1 queues."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bessel import i1e
from .distributions import ServiceDist, ServiceMoments


class DomainError(ValueError):
    pass


class ConvergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TailSpec:
    """Service tail ``P(Y > t) = L / t**alpha`` with constant ``L``."""

    alpha: float
    slowly_varying_constant: float

    def __post_init__(self):
        if self.alpha < 1:
            raise DomainError("alpha must be >= 1")
        if not self.slowly_varying_constant > 0:
            raise DomainError("slowly varying constant must be > 0")

    @classmethod
    def of_pareto(cls, dist: ServiceDist) -> "TailSpec":
        if dist.kind != "pareto":
            raise DomainError("only Pareto service has an exact power tail")
        return cls(dist.p1, dist.p2**dist.p1)

    def service_tail(self, t):
        return self.slowly_varying_constant * np.asarray(t, dtype=float) ** (-self.alpha)


def _check_mm1(lam, mu):
    if not (lam > 0 and mu > 0):
        raise DomainError("rates must be positive")
    if lam >= mu:
        raise DomainError(f"rho = {lam / mu:.6g} >= 1")


def busy_density_mm1(t, lam: float, mu: float):
    """Density of the M/M/1 busy period.

    sqrt(mu/lam) * exp(-(lam+mu) t) * I1(2 sqrt(lam mu) t) / t, evaluated with
    the scaled Bessel function so large ``t`` does not overflow.
    """
    _check_mm1(lam, mu)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t must be > 0")
    x = 2.0 * math.sqrt(lam * mu) * t
    out = math.sqrt(mu / lam) * np.exp(x - (lam + mu) * t) * i1e(x) / t
    return out if out.ndim else float(out)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def busy_cdf_mm1(t, lam: float, mu: float):
    """CDF of the M/M/1 busy period by quadrature of the density.

    The sorted grid is cut into panels no wider than ``0.5 / (lam + mu)``
    (the density's natural time scale) and each panel gets a 20-point
    Gauss-Legendre rule; the density is analytic on t > 0 so this is exact
    to rounding. Panel integrals are accumulated in order.
    """
    _check_mm1(lam, mu)
    t = np.asarray(t, dtype=float)
    flat = t.reshape(-1)
    if np.any(flat < 0) or np.any(np.isnan(flat)):
        raise DomainError("t must be >= 0")
    order = np.argsort(flat)
    # past this point the remaining mass is below exp(-700)
    cut = 700.0 / (math.sqrt(mu) - math.sqrt(lam)) ** 2
    knots = np.concatenate([[0.0], np.minimum(flat[order], cut)])
    width = 0.5 / (lam + mu)
    n_panels = np.maximum(np.ceil(np.diff(knots) / width).astype(np.int64), 1)
    owner = np.repeat(np.arange(knots.size - 1), n_panels)
    first = np.repeat(np.cumsum(n_panels) - n_panels, n_panels)
    j = np.arange(owner.size) - first
    h = (knots[owner + 1] - knots[owner]) / n_panels[owner]
    lo = knots[owner] + j * h
    nodes = lo[:, None] + 0.5 * h[:, None] * (_GL_NODES[None, :] + 1.0)
    # Gauss nodes are interior, so t > 0 holds except on empty panels
    dens = np.where(nodes > 0, busy_density_mm1(np.where(nodes > 0, nodes, 1.0), lam, mu), 0.0)
    panel = 0.5 * h * (dens @ _GL_WEIGHTS)
    per_knot = np.bincount(owner, weights=panel, minlength=knots.size - 1)
    out = np.empty_like(flat)
    out[order] = np.minimum(np.cumsum(per_knot), 1.0)
    out = out.reshape(t.shape)
    return out if out.ndim else float(out)


def busy_moment4(lam: float, moments: ServiceMoments) -> float:
    """Fourth moment of the M/G/1 busy period from the service moments."""
    if not lam > 0:
        raise DomainError("arrival rate must be > 0")
    rho = lam * moments.m1
    if rho >= 1:
        raise DomainError(f"rho = {rho:.6g} >= 1")
    q = 1.0 - rho
    return (
        moments.m4 / q**5
        + 10.0 * lam * moments.m2 * moments.m3 / q**6
        + 15.0 * lam**2 * moments.m2**3 / q**7
    )


def busy_mean(lam: float, mean_service: float) -> float:
    rho = lam * mean_service
    if rho >= 1:
        raise DomainError(f"rho = {rho:.6g} >= 1")
    return mean_service / (1.0 - rho)


def takacs_lst(s, lam: float, service_lst: Callable, tol: float = 1e-14, max_iter: int = 1_000_000):
    """Busy-period transform tau*(s) as the fixed point of x -> Y*(s + lam - lam x).

    Iterates from x = 0, which for real s >= 0 climbs monotonically to the
    smallest root. Complex ``s`` near the origin is accepted (used by
    :func:`busy_moments_lst`).
    """
    x = 0.0
    for it in range(max_iter):
        nxt = service_lst(s + lam - lam * x)
        if abs(nxt - x) < tol:
            return nxt
        x = nxt
    raise ConvergenceError(f"no convergence after {max_iter} iterations at s={s}: last step {abs(nxt - x):.3g}, x={x}")


def mm1_busy_lst(s, lam: float, mu: float):
    """Closed-form M/M/1 busy-period transform (root of the Takacs quadratic)."""
    b = lam + mu + s
    return (b - np.sqrt(b * b - 4.0 * lam * mu)) / (2.0 * lam)


def busy_mean_fd(lam: float, service_lst: Callable, h: float = 1e-5) -> float:
    """E[tau] as minus the central difference of tau* at zero."""
    return -(takacs_lst(h, lam, service_lst) - takacs_lst(-h, lam, service_lst)) / (2.0 * h)


def default_contour_radius(lam: float, mean_service: float) -> float:
    # M/M/1 busy transforms are singular at s = -(sqrt(mu) - sqrt(lam))^2; stay well inside
    rho = lam * mean_service
    return 0.25 * (1.0 - math.sqrt(rho)) ** 2 / mean_service


def transform_moments(transform: Callable, radius: float, orders=(1, 2, 3, 4), points: int = 64):
    """Moments E[X^k] = (-1)^k d^k/ds^k transform(s) at s = 0.

    Samples the transform at ``points`` equispaced nodes on a circle of
    ``radius`` around the origin and applies the trapezoidal Cauchy formula,
    a finite-difference stencil whose error decays geometrically with the
    number of nodes as long as the circle avoids the singularities.
    """
    theta = 2.0 * np.pi * np.arange(points) / points
    vals = np.array([transform(z) for z in radius * np.exp(1j * theta)])
    out = {}
    for k in orders:
        taylor = np.mean(vals * np.exp(-1j * k * theta)).real / radius**k
        out[k] = (-1) ** k * math.factorial(k) * taylor
    return out


def busy_moments_lst(lam: float, service_lst: Callable, orders=(1, 2, 3, 4), radius: float | None = None, mean_service: float | None = None, points: int = 64):
    """Busy-period moments E[tau^k] by differentiating the Takacs fixed point."""
    if radius is None:
        if mean_service is None:
            raise ValueError("give radius or mean_service")
        radius = default_contour_radius(lam, mean_service)
    return transform_moments(lambda z: takacs_lst(z, lam, service_lst), radius, orders, points)


def tail_prediction(t, rho: float, tail: TailSpec):
    """Asymptotic busy-period tail (1 - rho)^(-alpha-1) * L * t^(-alpha)."""
    if not 0 <= rho < 1:
        raise DomainError("need 0 <= rho < 1")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t must be > 0")
    out = (1.0 - rho) ** (-tail.alpha - 1.0) * tail.service_tail(t)
    return out if out.ndim else float(out)


def tabulate_mm1(t_grid, lam: float, mu: float, tail: TailSpec | None = None):
    """Columns (t, density, cdf, tail_prediction) over a grid of positive times.

    Exponential service has no power tail, so the last column is NaN unless a
    ``tail`` is supplied.
    """
    t = np.asarray(t_grid, dtype=float)
    dens = busy_density_mm1(t, lam, mu)
    cdf = busy_cdf_mm1(t, lam, mu)
    pred = tail_prediction(t, lam / mu, tail) if tail is not None else np.full(t.shape, np.nan)
    return np.atleast_1d(t), np.atleast_1d(dens), np.atleast_1d(cdf), np.atleast_1d(pred)
