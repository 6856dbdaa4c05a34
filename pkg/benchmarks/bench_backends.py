"""Wall-clock comparison of the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_backends.py [--agents 1000] [--days 252] [--busy 100000]

Both backends consume identical random buffers, so the script also checks
that they agree before reporting timings.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from threshold_market.cascade import FieldGenerator, sample_cascades
from threshold_market.distributions import ServiceDist
from threshold_market.market import Market, MarketParams
from threshold_market.queue_sim import QueueParams, sample_busy_periods


def _best(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_market(agents, days, repeat):
    params = MarketParams(num_agents=agents, rng_seed=7)
    steps = days * params.substeps_per_day

    def go(use_numba):
        return lambda: Market(params, use_numba=use_numba).advance(steps)[0]

    go(True)()  # compile outside the timing
    t_nb, p_nb = _best(go(True), repeat)
    t_np, p_np = _best(go(False), repeat)
    assert np.array_equal(p_nb, p_np), "market backends disagree"
    return t_nb, t_np


def bench_queue(n, repeat):
    params = QueueParams(0.5, ServiceDist.exponential(1.0))

    def go(use_numba):
        return lambda: sample_busy_periods(params, n, 11, use_numba=use_numba).durations

    go(True)()
    t_nb, d_nb = _best(go(True), repeat)
    t_np, d_np = _best(go(False), 1)
    assert np.array_equal(d_nb, d_np), "queue backends disagree"
    return t_nb, t_np


def bench_cascade(n, repeat):
    gen = FieldGenerator(2500.0, ServiceDist.deterministic(1.0))

    def go(use_numba):
        return lambda: sample_cascades(gen, n, 5, use_numba=use_numba).drops

    go(True)()
    t_nb, d_nb = _best(go(True), repeat)
    t_np, d_np = _best(go(False), 1)
    assert np.array_equal(d_nb, d_np), "cascade backends disagree"
    return t_nb, t_np


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--agents", type=int, default=1000)
    ap.add_argument("--days", type=int, default=252)
    ap.add_argument("--busy", type=int, default=20_000, help="busy periods / cascades per run")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    rows = [
        (f"market M={args.agents} days={args.days}", *bench_market(args.agents, args.days, args.repeat)),
        (f"M/M/1 busy periods n={args.busy}", *bench_queue(args.busy, args.repeat)),
        (f"cascades rate=2500 n={args.busy}", *bench_cascade(args.busy, args.repeat)),
    ]
    print(f"{'kernel':40s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, t_nb, t_np in rows:
        print(f"{name:40s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
