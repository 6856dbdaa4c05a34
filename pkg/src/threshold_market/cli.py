"""Command-line front end.

    threshold-market simulate       [--config F] [--seed N] [--out DIR] [--override k=v ...]
    threshold-market cascade        ...
    threshold-market queue-sim      ...
    threshold-market queue-analytic [tabulate|compare] ...
    threshold-market analyze        ...

Each run writes plot-ready CSV files plus ``manifest.json`` into the output
directory (``--out``, else ``$THRESHOLD_MARKET_OUT``, else ``./out``).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, _jit, config as cfgmod, stats
from .cascade import FieldGenerator, ThresholdField, cascade_to_queue, run_cascade, sample_cascades
from .io import read_rows, read_series, write_columns, write_csv
from .market import run as run_market, threshold_density
from .queue_analytics import (
    TailSpec,
    busy_mean,
    busy_moment4,
    busy_moments_lst,
    tabulate_mm1,
)
from .queue_sim import AntiCustomers, ConfigurationError, QueueParams, sample_busy_periods


def _summary_rows(x: np.ndarray, max_lag: int, hill_fraction: float):
    """Long-format (statistic, lag, value) rows shared by simulate and analyze."""
    rows = [("n", "", x.size)]

    def safe(fn):
        try:
            return fn()
        except (stats.StatisticError, ValueError):
            return math.nan

    rows.append(("excess_kurtosis", "", safe(lambda: stats.excess_kurtosis(x))))
    mag = np.abs(x)
    k = stats.default_hill_k(x.size, hill_fraction)
    tail = safe(lambda: stats.hill_estimate(mag, k))
    if isinstance(tail, stats.TailEstimate):
        rows += [("hill_exponent", "", tail.exponent), ("hill_k", "", tail.k_used), ("hill_standard_error", "", tail.standard_error)]
    else:
        rows += [("hill_exponent", "", math.nan), ("hill_k", "", k), ("hill_standard_error", "", math.nan)]
    rows.append(("hill_instability", "", safe(lambda: stats.hill_instability(mag))))
    lag = min(max_lag, max(1, (x.size - 1) // 4))
    for name, series in (("acf_returns", x), ("acf_abs_returns", mag)):
        acf = safe(lambda: stats.autocorrelation(series, lag))
        if isinstance(acf, stats.ACF):
            rows.append((f"{name}_band", "", acf.band))
            rows.append((f"{name}_fraction_within_band", "", acf.fraction_within_band()))
            rows += [(name, int(L), float(v)) for L, v in zip(acf.lags, acf.values)]
    return rows


def _write_summary(out: Path, x, cfg):
    a = cfg["analysis"]
    write_csv(out / "summary.csv", "summary", ["statistic", "lag", "value"], _summary_rows(np.asarray(x, float), a["max_lag"], a["hill_fraction"]))


def _manifest(out: Path, cfg, command: str, extra=None):
    data = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "config": cfg.canonical(),
        "backend": _jit.backend_name(),
    }
    if extra:
        data.update(extra)
    (out / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def cmd_simulate(cfg, out: Path):
    params = cfg.market_params()
    m = cfg["market"]
    res = run_market(params, m["days"])
    steps = np.arange(res.prices.size)
    logp = np.log(res.prices)
    step_ret = np.concatenate([[math.nan], np.diff(logp)])
    write_columns(
        out / "price.csv",
        "price",
        {"step": steps, "price": res.prices, "log_return": step_ret, "sentiment": res.sentiment, "num_switches": res.switches},
    )
    spd = params.substeps_per_day
    n_days = res.returns.daily_log_returns.size
    day_end = np.arange(1, n_days + 1) * spd
    day_switches = res.switches[1:].reshape(n_days, spd).sum(axis=1) if n_days else np.empty(0, int)
    write_columns(
        out / "returns.csv",
        "returns",
        {
            "day": np.arange(1, n_days + 1),
            "price": res.prices[day_end],
            "log_return": res.returns.daily_log_returns,
            "sentiment": res.sentiment[day_end],
            "num_switches": day_switches,
        },
    )
    write_columns(out / "sentiment.csv", "sentiment", {"step": steps, "sentiment": res.sentiment, "num_switches": res.switches})
    rows = []
    for side in ("lower", "upper"):
        h = threshold_density(res.final_state, side=side, by_state=True, bins=m["hist_bins"])
        for state in (1, -1):
            for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts[state]):
                rows.append((side, state, lo, hi, int(c)))
    write_csv(out / "thresholds_hist.csv", "thresholds_hist", ["side", "state", "bin_left", "bin_right", "count"], rows)
    _write_summary(out, res.returns.daily_log_returns, cfg)
    return {"steps": int(steps[-1]), "days": int(n_days)}


def _read_field(path, c) -> ThresholdField:
    rows = read_rows(path)
    if rows and not _numeric(rows[0]):
        rows = rows[1:]
    if any(len(r) != 3 for r in rows):
        raise cfgmod.ConfigError(f"{path}: expected rows of offset,state,weight")
    arr = np.array([[float(v) for v in r] for r in rows]).reshape(-1, 3)
    return ThresholdField.sorted_from(arr[:, 0], arr[:, 1].astype(int), arr[:, 2], c["coupling"], c["total_weight"])


def _numeric(row):
    try:
        [float(v) for v in row]
    except ValueError:
        return False
    return True


def cmd_cascade(cfg, out: Path):
    c = cfg["cascade"]
    if c["field"]:
        field = _read_field(c["field"], c)
        res = run_cascade(field, c["initiator_weight"], c["max_switches"])
        write_csv(out / "cascades.csv", "cascades", ["drop", "switches", "bounce", "truncated"], [(res.total_drop, res.num_switches, res.terminal_bounce, res.truncated)])
        write_csv(out / "cascade_switches.csv", "cascade_switches", ["order", "agent", "log_price_move"], [(i, a, j) for i, (a, j) in enumerate(res.switches)])
        return {"mode": "explicit", "rows": len(field.offsets)}
    gen = FieldGenerator(c["rate"], cfg.weight_dist(), c["anti_fraction"], c["coupling"], c["total_weight"])
    sample = sample_cascades(gen, c["samples"], np.random.default_rng(cfg.seed), c["max_switches"])
    write_columns(out / "cascades.csv", "cascades", {"drop": sample.drops, "switches": sample.switches, "bounce": sample.bounces, "truncated": sample.truncated})
    q = cascade_to_queue(gen)
    return {"mode": "poisson", "equivalent_queue_rho": q.rho}


def _queue_params(cfg) -> QueueParams:
    q = cfg["queue"]
    svc = cfg.service_dist()
    anti = AntiCustomers(q["anti_rate"], svc) if q["anti_rate"] > 0 else None
    return QueueParams(q["arrival_rate"], svc, q["reneging_rate"] or None, anti)


def cmd_queue_sim(cfg, out: Path):
    q = cfg["queue"]
    params = _queue_params(cfg)
    max_dur = None if math.isinf(q["max_duration"]) else q["max_duration"]
    s = sample_busy_periods(params, q["samples"], np.random.default_rng(cfg.seed), max_dur)
    write_columns(out / "busy_periods.csv", "busy_periods", {"duration": s.durations, "served": s.customers_served, "reneged": s.reneged})
    rows = [("rho", params.rho), ("samples", len(s)), ("truncated", s.truncated_count), ("mean", s.moment(1)), ("moment4", s.moment(4))]
    if params.is_plain_mg1 and params.rho < 1:
        rows.append(("mean_analytic", busy_mean(params.arrival_table.max_rate, params.service.mean())))
    write_csv(out / "queue_summary.csv", "queue_summary", ["quantity", "value"], rows)
    return {"rho": params.rho}


def cmd_queue_analytic(cfg, out: Path, mode: str):
    a = cfg["analysis"]
    lam, mu = a["lambda"], a["mu"]
    n = int(round(a["t_max"] / a["t_step"]))
    grid = np.round(a["t_step"] * np.arange(1, n + 1), 12)
    tail = None
    if math.isfinite(a["tail_alpha"]) and math.isfinite(a["tail_constant"]):
        tail = TailSpec(a["tail_alpha"], a["tail_constant"])
    t, dens, cdf, pred = tabulate_mm1(grid, lam, mu, tail)
    if mode == "tabulate":
        write_columns(out / "busy_mm1.csv", "busy_mm1", {"t": t, "density": dens, "cdf": cdf, "tail_prediction": pred})
        return {"mode": mode, "cdf_at_t_max": float(cdf[-1])}
    from .distributions import ServiceDist

    params = QueueParams(lam, ServiceDist.exponential(mu))
    s = sample_busy_periods(params, a["compare_samples"], np.random.default_rng(cfg.seed))
    x = np.sort(s.durations)
    mc = stats.ecdf_at(x, t)
    diff = np.abs(mc - cdf)
    write_columns(out / "compare.csv", "compare", {"t": t, "analytic_cdf": cdf, "mc_cdf": mc, "abs_diff": diff})
    lst_m = busy_moments_lst(lam, params.service.lst, mean_service=1.0 / mu)
    rows = [
        ("sup_distance", "", float(diff.max()), ""),
        ("mean", busy_mean(lam, 1.0 / mu), s.moment(1), lst_m[1]),
        ("moment4", busy_moment4(lam, params.service.moments()), s.moment(4), lst_m[4]),
    ]
    write_csv(out / "compare_summary.csv", "compare_summary", ["quantity", "analytic", "monte_carlo", "lst_derivative"], rows)
    return {"mode": mode, "sup_distance": float(diff.max())}


def cmd_analyze(cfg, out: Path):
    a = cfg["analysis"]
    if not a["input"]:
        raise cfgmod.ConfigError(f"{cfg.where('analysis', 'input')}: analyze needs analysis.input")
    try:
        x = read_series(a["input"], a["column"] or None)
    except (OSError, KeyError, ValueError) as exc:
        raise cfgmod.ConfigError(f"{cfg.where('analysis', 'input')}: {exc}") from None
    _write_summary(out, x, cfg)
    return {"input": a["input"]}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="sectioned key=value config file")
    common.add_argument("--seed", type=int, help="override run.seed")
    common.add_argument("--out", type=Path, help=f"output directory (default ${cfgmod.OUT_ENV} or ./out)")
    common.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p = argparse.ArgumentParser(prog="threshold-market", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run the threshold market")
    sub.add_parser("cascade", parents=[common], help="stand-alone cascades")
    sub.add_parser("queue-sim", parents=[common], help="Monte Carlo busy periods")
    qa = sub.add_parser("queue-analytic", parents=[common], help="closed-form busy-period tables")
    qa.add_argument("mode", nargs="?", choices=("tabulate", "compare"), default="tabulate")
    sub.add_parser("analyze", parents=[common], help="stylized-fact statistics of a returns CSV")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config, args.override, args.seed)
        out = args.out or cfgmod.default_out_dir()
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            extra = cmd_simulate(cfg, out)
        elif args.command == "cascade":
            extra = cmd_cascade(cfg, out)
        elif args.command == "queue-sim":
            extra = cmd_queue_sim(cfg, out)
        elif args.command == "queue-analytic":
            extra = cmd_queue_analytic(cfg, out, args.mode)
        else:
            extra = cmd_analyze(cfg, out)
    except (cfgmod.ConfigError, ConfigurationError, ValueError, OSError) as exc:
        print(f"threshold-market {args.command}: error: {exc}", file=sys.stderr)
        return 2
    _manifest(out, cfg, args.command, extra)
    return 0


if __name__ == "__main__":
    sys.exit(main())
