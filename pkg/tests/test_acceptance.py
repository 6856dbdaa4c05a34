"""Acceptance criteria 1-11.

Each test prints one ``criterion N: PASS|FAIL`` line (collected again in the
terminal summary) and then asserts. Tolerances are the stated ones; market
criteria use seeds 1, 2 and 3, fixed before any result was looked at.

    pytest tests/test_acceptance.py -v
"""
import math
import time
from functools import lru_cache

import numpy as np
import pytest

from threshold_market import cli, stats
from threshold_market.cascade import FieldGenerator, cascade_to_queue, sample_cascades
from threshold_market.distributions import ServiceDist
from threshold_market.market import TRADING_DAYS_PER_YEAR, Market, MarketParams, daily_returns, threshold_density
from threshold_market.queue_analytics import (
    TailSpec,
    busy_cdf_mm1,
    busy_mean,
    busy_mean_fd,
    busy_moment4,
    busy_moments_lst,
    default_contour_radius,
    mm1_busy_lst,
    tail_prediction,
    takacs_lst,
    transform_moments,
)
from threshold_market.queue_sim import QueueParams, sample_busy_periods

pytestmark = pytest.mark.acceptance

SEEDS = (1, 2, 3)
FORTY_YEARS = 40 * TRADING_DAYS_PER_YEAR


@lru_cache(maxsize=None)
def long_run(num_agents: int, seed: int, days: int = FORTY_YEARS, **kw):
    """(daily log-returns, market after the run); the market may be advanced further by callers."""
    params = MarketParams(num_agents=num_agents, rng_seed=seed, **kw)
    m = Market(params)
    prices = np.concatenate([[params.initial_price], m.advance(days * params.substeps_per_day)[0]])
    return daily_returns(prices, params.substeps_per_day).daily_log_returns, m


def _fmt(xs, spec=".3g"):
    return "/".join(format(x, spec) for x in xs)


# -- 1 -----------------------------------------------------------------------

def test_criterion_01_mm1_busy_law(report):
    t0 = time.perf_counter()
    s = sample_busy_periods(QueueParams(0.5, ServiceDist.exponential(1.0)), 10**6, np.random.default_rng(1))
    x = np.sort(s.durations)
    # exact CDF on a fine grid; linear interpolation error is below 1e-6
    grid = np.linspace(0.0, x[-1], 200_001)
    cdf_grid = busy_cdf_mm1(grid, 0.5, 1.0)
    cdf = np.interp(x, grid, cdf_grid)
    n = x.size
    sup = max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n))
    elapsed = time.perf_counter() - t0
    ok = sup < 0.01 and elapsed < 120
    report(1, ok, f"sup |F_emp - F| = {sup:.2e} (< 0.01), runtime {elapsed:.1f}s (< 120s)")
    assert ok


# -- 2 -----------------------------------------------------------------------

def test_criterion_02_fourth_moment(report):
    svc = ServiceDist.exponential(1.0)
    formula = busy_moment4(0.5, svc.moments())
    radius = default_contour_radius(0.5, 1.0)
    lst_val = transform_moments(lambda z: mm1_busy_lst(z, 0.5, 1.0), radius, orders=(4,))[4]
    takacs_val = busy_moments_lst(0.5, svc.lst, orders=(4,), radius=radius)[4]
    d = sample_busy_periods(QueueParams(0.5, svc), 10**7, np.random.default_rng(1)).durations
    mc = float(np.mean(d**4))
    rel_lst = abs(lst_val - formula) / formula
    rel_mc = abs(mc - formula) / formula
    ok = formula == pytest.approx(8448.0, rel=1e-12) and rel_lst < 1e-4 and rel_mc < 0.15
    report(2, ok, f"formula {formula:.6g}, closed-form LST 4th derivative {lst_val:.10g} (rel {rel_lst:.1e}), "
           f"Takacs-iterate derivative {takacs_val:.10g}, DES 1e7 {mc:.6g} (rel {rel_mc:.3f})")
    assert ok


# -- 3 -----------------------------------------------------------------------

def test_criterion_03_takacs(report):
    lst = ServiceDist.exponential(1.0).lst
    s = np.linspace(0.0, 10.0, 1001)
    err = max(abs(takacs_lst(v, 0.5, lst) - mm1_busy_lst(v, 0.5, 1.0)) for v in s)
    at0 = takacs_lst(0.0, 0.5, lst)
    mm1 = busy_mean_fd(0.5, lst)
    md1 = busy_mean_fd(0.5, ServiceDist.deterministic(1.0).lst)
    target = busy_mean(0.5, 1.0)
    ok = err < 1e-12 and abs(at0 - 1.0) < 1e-12 and abs(mm1 - target) < 1e-6 and abs(md1 - target) < 1e-6
    report(3, ok, f"max |Takacs - closed form| on [0,10] = {err:.1e}; tau*(0) = {at0!r}; "
           f"-tau*'(0): M/M/1 {mm1:.10f}, M/D/1 {md1:.10f} (target 2)")
    assert ok


# -- 4 -----------------------------------------------------------------------

def test_criterion_04_tail_relation(report):
    svc = ServiceDist.pareto(3.0, 1.0)
    lam = 0.5 / svc.mean()
    d = sample_busy_periods(QueueParams(lam, svc), 10**6, np.random.default_rng(1)).durations
    t_max = d.max()
    grid = np.geomspace(t_max / 10.0, t_max, 21)[:-1]
    surv = stats.empirical_survival(d, grid)
    slope = -stats.log_log_slope(grid, surv)
    pred = tail_prediction(grid, 0.5, TailSpec.of_pareto(svc))
    keep = surv > 0
    level = float(np.exp(np.mean(np.log(surv[keep] / pred[keep]))))
    ok = 2.7 <= slope <= 3.3 and 0.5 <= level <= 2.0
    report(4, ok, f"top decade [{t_max / 10:.4g}, {t_max:.4g}]: slope {slope:.3f} (in [2.7, 3.3]), "
           f"empirical/predicted level {level:.3f} (in [0.5, 2])")
    assert ok


# -- 5 -----------------------------------------------------------------------

def test_criterion_05_cascade_queue(report):
    gen = FieldGenerator(2500.0, ServiceDist.deterministic(1.0), coupling=0.1, total_weight=1000.0)
    q = cascade_to_queue(gen)
    delta = gen.jump_scale
    drops = sample_cascades(gen, 10**6, np.random.default_rng(1)).drops
    busy = sample_busy_periods(q, 10**6, np.random.default_rng(2)).durations
    # both laws live on multiples of the jump; compare lattice indices exactly
    ks = stats.ks_distance(np.rint(drops / delta), np.rint(busy / delta))
    ok = q.service.kind == "deterministic" and ks < 0.01
    report(5, ok, f"M/D/1 (lambda={q.arrival_table.max_rate:g}, d={q.service.p1:g}): KS(drop, busy) = {ks:.2e} (< 0.01)")
    assert ok


# -- 6 -----------------------------------------------------------------------

def test_criterion_06_efficient_market(report):
    t0 = time.perf_counter()
    r, _ = long_run(1000, 1, days=20_000, coupling=0.0, volatility_fn="constant_one")
    elapsed = time.perf_counter() - t0
    kurt = stats.excess_kurtosis(r)
    within = stats.autocorrelation(r, 50).fraction_within_band()
    # no-herding variant, reported for information only
    r0, _ = long_run(1000, 1, days=20_000, herding_range=(0.0, 0.0))
    info = f"C=0 variant: kurtosis {stats.excess_kurtosis(r0):.3f}, within {stats.autocorrelation(r0, 50).fraction_within_band():.2f}"
    ok = -0.2 <= kurt <= 0.2 and within >= 0.95 and elapsed < 300
    report(6, ok, f"kappa=0, f=1, M=1000, 20000 days: kurtosis {kurt:.3f} (in [-0.2, 0.2]), "
           f"ACF lags within band {within:.2f} (>= 0.95), runtime {elapsed:.1f}s; {info}")
    assert ok


# -- 7 -----------------------------------------------------------------------

def test_criterion_07_fat_tails(report):
    kurt, hill = [], []
    for seed in SEEDS:
        r, _ = long_run(1000, seed)
        kurt.append(stats.excess_kurtosis(r))
        hill.append(stats.hill_estimate(np.abs(r), stats.default_hill_k(r.size)).exponent)
    ok = all(k > 1 for k in kurt) and all(2.3 <= a <= 3.7 for a in hill)
    report(7, ok, f"M=1000, 40y, seeds {SEEDS}: kurtosis {_fmt(kurt)} (> 1), Hill {_fmt(hill)} (in [2.3, 3.7])")
    assert ok


# -- 8 -----------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_08_system_size(report):
    rows, ok = [], True
    for m in (1000, 10_000):
        for seed in SEEDS:
            r, _ = long_run(m, seed)
            k = stats.excess_kurtosis(r)
            inst = stats.hill_instability(np.abs(r))
            ok &= k > 1 and abs(inst) < stats.STABLE_TAIL_LIMIT
            rows.append(f"M={m} s{seed}: kurt {k:.2f} drift {inst:+.3f}")
    report(8, ok, f"kurtosis > 1 and |Hill drift| < {stats.STABLE_TAIL_LIMIT}: " + "; ".join(rows))
    assert ok


# -- 9 -----------------------------------------------------------------------

def test_criterion_09a_no_clustering_without_volatility_feedback(report):
    kurt, within = [], []
    for seed in SEEDS:
        r, _ = long_run(1000, seed, volatility_fn="constant_one")
        kurt.append(stats.excess_kurtosis(r))
        within.append(stats.autocorrelation(np.abs(r), 50).fraction_within_band())
    ok = all(k > 1 for k in kurt) and all(w >= 0.95 for w in within)
    report("9a", ok, f"herding, f=1, seeds {SEEDS}: kurtosis {_fmt(kurt)} (> 1), "
           f"|r| ACF lags within band {_fmt(within, '.2f')} (>= 0.95)")
    assert ok


def test_criterion_09b_clustering_with_volatility_feedback(report):
    above = []
    for seed in SEEDS:
        r, _ = long_run(1000, seed)
        above.append(stats.autocorrelation(np.abs(r), 50).fraction_above_band())
    ok = all(a == 1.0 for a in above)
    report("9b", ok, f"herding, f=1+2|sigma|, seeds {SEEDS}: fraction of |r| ACF lags above band {_fmt(above, '.2f')} (= 1)")
    assert ok


# -- 10 ----------------------------------------------------------------------

def _state_pvalue(state):
    # shared quantile bins of the pooled lower thresholds
    edges = np.quantile(state.lower, np.linspace(0.0, 1.0, 21))
    edges[0] = np.nextafter(edges[0], -np.inf)
    edges[-1] = np.nextafter(edges[-1], np.inf)
    h = threshold_density(state, side="lower", by_state=True, bins=edges)
    return stats.homogeneity_pvalue(h.counts[1], h.counts[-1])


def test_criterion_10_threshold_memory(report):
    rows, ok = [], True
    for seed in SEEDS:
        p0 = _state_pvalue(Market(MarketParams(num_agents=1000, rng_seed=seed)).state)
        _, m = long_run(1000, seed)
        extra = 0
        # step on until sentiment is nearly balanced (capped at 20000 days)
        while abs(m.state.sentiment) >= 0.05 and extra < 200_000:
            m.advance(1)
            extra += 1
        balanced = abs(m.state.sentiment) < 0.05
        p1 = _state_pvalue(m.state)
        ok &= p0 > 0.01 and balanced and p1 < 0.01
        rows.append(f"s{seed}: p(n=0) {p0:.3f}, p(|sigma|={abs(m.state.sentiment):.3f} after +{extra} steps) {p1:.1e}")
    report(10, ok, "; ".join(rows))
    assert ok


# -- 11 ----------------------------------------------------------------------

def test_criterion_11_determinism(tmp_path, report):
    small = ["--override", "market.num_agents=500", "--override", "market.days=100"]
    jobs = {
        "simulate": ["simulate", *small],
        "cascade": ["cascade", "--override", "cascade.samples=5000"],
        "queue-sim": ["queue-sim", "--override", "queue.samples=5000", "--override", "queue.reneging_rate=0.2"],
        "queue-analytic tabulate": ["queue-analytic", "tabulate"],
        "queue-analytic compare": ["queue-analytic", "compare", "--override", "analysis.compare_samples=20000"],
    }
    bad = []
    for name, argv in jobs.items():
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / name.replace(" ", "_") / rep
            assert cli.main([*argv, "--seed", "17", "--out", str(out)]) == 0
            outs.append(out)
        files = sorted(p.name for p in outs[0].iterdir())
        if files != sorted(p.name for p in outs[1].iterdir()):
            bad.append(name)
        bad += [f"{name}/{f}" for f in files if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes()]
    ret = tmp_path / "simulate" / "a" / "returns.csv"
    outs = []
    for rep in ("a", "b"):
        out = tmp_path / "analyze" / rep
        assert cli.main(["analyze", "--override", f"analysis.input={ret}", "--out", str(out)]) == 0
        outs.append(out)
    bad += [f"analyze/{p.name}" for p in outs[0].iterdir() if p.read_bytes() != (outs[1] / p.name).read_bytes()]
    ok = not bad
    report(11, ok, f"{len(jobs) + 1} subcommands run twice with seed 17: " + ("all outputs byte-identical" if ok else f"differs: {bad}"))
    assert ok
