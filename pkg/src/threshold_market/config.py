"""Sectioned ``key = value`` experiment configuration.

Every key has a default equal to the reference setting, so an empty file
reproduces the reference run. Values can be overridden with
``section.key=value`` strings. Validation errors carry the file and line of
the offending key.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .distributions import ServiceDist
from .market import TRADING_DAYS_PER_YEAR, MarketParams

OUT_ENV = "THRESHOLD_MARKET_OUT"


class ConfigError(ValueError):
    pass


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _prob(v):
    return 0 <= v < 1


def _any(v):
    return True


def _bool(s: str) -> bool:
    s = s.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _choice(*opts):
    def conv(s):
        s = s.strip()
        if s not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return s

    return conv


# section -> key -> (converter, default, check, description of the check)
SCHEMA = {
    "run": {
        "seed": (int, 0, _nonneg, ">= 0"),
        "label": (str, "run", _any, ""),
    },
    "market": {
        "num_agents": (int, 100_000, _pos, ">= 1"),
        "timestep": (float, 4e-6, _pos, "> 0"),
        "coupling": (float, 0.1, _nonneg, ">= 0"),
        "threshold_noise": (float, 1e-8, _nonneg, ">= 0"),
        "noise_is_variance": (_bool, True, _any, ""),
        "reset_low_min": (float, 0.05, _pos, "> 0"),
        "reset_low_max": (float, 0.25, _pos, "> 0"),
        "reset_high_min": (float, 0.05, _pos, "> 0"),
        "reset_high_max": (float, 0.25, _pos, "> 0"),
        "herding_min": (float, 20.0, _nonneg, ">= 0"),
        "herding_max": (float, 100.0, _nonneg, ">= 0"),
        "volatility": (_choice("constant_one", "sentiment_linear"), "sentiment_linear", _any, ""),
        "volatility_a": (float, 1.0, _any, ""),
        "volatility_b": (float, 2.0, _any, ""),
        "substeps_per_day": (int, 10, _pos, ">= 1"),
        "initial_price": (float, 1.0, _pos, "> 0"),
        "days": (int, 40 * TRADING_DAYS_PER_YEAR, _pos, ">= 1"),
        "hist_bins": (int, 50, _pos, ">= 1"),
    },
    "cascade": {
        "field": (str, "", _any, ""),
        "rate": (float, 2500.0, _pos, "> 0"),
        "anti_fraction": (float, 0.0, _prob, "in [0, 1)"),
        "weight_dist": (_choice("deterministic", "exponential", "pareto"), "deterministic", _any, ""),
        "weight": (float, 1.0, _pos, "> 0"),
        "weight_alpha": (float, 3.0, _pos, "> 0"),
        "coupling": (float, 0.1, _pos, "> 0"),
        "total_weight": (float, 1000.0, _pos, "> 0"),
        "initiator_weight": (float, 1.0, _pos, "> 0"),
        "samples": (int, 100_000, _pos, ">= 1"),
        "max_switches": (int, 10_000_000, _pos, ">= 1"),
    },
    "queue": {
        "arrival_rate": (float, 0.5, _pos, "> 0"),
        "service": (_choice("exponential", "deterministic", "pareto", "empirical"), "exponential", _any, ""),
        "service_rate": (float, 1.0, _pos, "> 0"),
        "service_time": (float, 1.0, _pos, "> 0"),
        "pareto_alpha": (float, 3.0, _pos, "> 0"),
        "pareto_xmin": (float, 1.0, _pos, "> 0"),
        "empirical_file": (str, "", _any, ""),
        "reneging_rate": (float, 0.0, _nonneg, ">= 0"),
        "anti_rate": (float, 0.0, _nonneg, ">= 0"),
        "samples": (int, 100_000, _pos, ">= 1"),
        "max_duration": (float, math.inf, _pos, "> 0"),
    },
    "analysis": {
        "input": (str, "", _any, ""),
        "column": (str, "", _any, ""),
        "max_lag": (int, 50, _pos, ">= 1"),
        "hill_fraction": (float, 0.05, lambda v: 0 < v < 0.5, "in (0, 0.5)"),
        "lambda": (float, 0.5, _pos, "> 0"),
        "mu": (float, 1.0, _pos, "> 0"),
        "t_max": (float, 20.0, _pos, "> 0"),
        "t_step": (float, 0.01, _pos, "> 0"),
        "compare_samples": (int, 1_000_000, _pos, ">= 1"),
        "tail_alpha": (float, math.nan, _any, ""),
        "tail_constant": (float, math.nan, _any, ""),
    },
}


@dataclass
class ExperimentConfig:
    values: dict
    source: str = "<defaults>"
    lines: dict = field(default_factory=dict)

    def __getitem__(self, section):
        return self.values[section]

    def where(self, section, key) -> str:
        line = self.lines.get((section, key))
        if line is None:
            # set by default or on the command line
            return f"{section}.{key}"
        return f"{self.source}:{line}: {section}.{key}"

    def canonical(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return repr(v)
            return v

        return {s: {k: clean(v) for k, v in sorted(kv.items())} for s, kv in sorted(self.values.items())}

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    def market_params(self) -> MarketParams:
        m = self.values["market"]
        try:
            return MarketParams(
                num_agents=m["num_agents"],
                timestep=m["timestep"],
                coupling=m["coupling"],
                threshold_noise=m["threshold_noise"],
                noise_is_variance=m["noise_is_variance"],
                reset_low_range=(m["reset_low_min"], m["reset_low_max"]),
                reset_high_range=(m["reset_high_min"], m["reset_high_max"]),
                herding_range=(m["herding_min"], m["herding_max"]),
                volatility_fn=m["volatility"],
                volatility_a=m["volatility_a"],
                volatility_b=m["volatility_b"],
                substeps_per_day=m["substeps_per_day"],
                initial_price=m["initial_price"],
                rng_seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(f"{self.where('market', _blame(str(exc)))}: {exc}") from None

    def service_dist(self) -> ServiceDist:
        q = self.values["queue"]
        kind = q["service"]
        if kind == "exponential":
            return ServiceDist.exponential(q["service_rate"])
        if kind == "deterministic":
            return ServiceDist.deterministic(q["service_time"])
        if kind == "pareto":
            return ServiceDist.pareto(q["pareto_alpha"], q["pareto_xmin"])
        if not q["empirical_file"]:
            raise ConfigError(f"{self.where('queue', 'empirical_file')}: required when service = empirical")
        from .io import read_series

        try:
            return ServiceDist.empirical(read_series(q["empirical_file"]))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"{self.where('queue', 'empirical_file')}: {exc}") from None

    def weight_dist(self) -> ServiceDist:
        c = self.values["cascade"]
        kind = c["weight_dist"]
        if kind == "deterministic":
            return ServiceDist.deterministic(c["weight"])
        if kind == "exponential":
            return ServiceDist.exponential(1.0 / c["weight"])
        return ServiceDist.pareto(c["weight_alpha"], c["weight"])


_RANGE_KEYS = {
    "reset_low_range": "reset_low_max",
    "reset_high_range": "reset_high_max",
    "herding_range": "herding_max",
}


def _blame(message: str) -> str:
    for name, key in _RANGE_KEYS.items():
        if name in message:
            return key
    m = re.match(r"(\w+)", message)
    return m.group(1) if m else "?"


def _key_lines(text: str) -> dict:
    lines = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"([^=:\s]+)\s*[=:]", s)
        if m and section is not None:
            lines[(section, m.group(1).strip().lower())] = no
    return lines


def _convert(section, key, raw, where):
    if section not in SCHEMA:
        raise ConfigError(f"{where}: unknown section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"{where}: unknown key {section}.{key}")
    conv, _, check, what = SCHEMA[section][key]
    try:
        val = conv(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r}: {exc}") from None
    if not check(val):
        raise ConfigError(f"{where}: value {raw!r} must be {what}")
    return val


def defaults() -> dict:
    return {s: {k: spec[1] for k, spec in keys.items()} for s, keys in SCHEMA.items()}


def load(path=None, overrides=(), seed: int | None = None) -> ExperimentConfig:
    values = defaults()
    cfg = ExperimentConfig(values)
    if path is not None:
        text = Path(path).read_text()
        cfg.source = str(path)
        cfg.lines = _key_lines(text)
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(str(exc).replace("\n", " ")) from None
        for section in parser.sections():
            if section not in SCHEMA:
                line = next((n for (s, _), n in cfg.lines.items() if s == section), None)
                loc = f"{path}:{line}" if line else str(path)
                raise ConfigError(f"{loc}: unknown section [{section}]")
            for key, raw in parser.items(section):
                values[section][key] = _convert(section, key, raw, cfg.where(section, key))
    for item in overrides:
        m = re.match(r"\s*(\w+)\.(\w+)\s*=(.*)$", item)
        if not m:
            raise ConfigError(f"--override {item!r}: expected section.key=value")
        section, key, raw = m.group(1), m.group(2).lower(), m.group(3).strip()
        val = _convert(section, key, raw, f"--override {item!r}")
        values[section][key] = val
        cfg.lines.pop((section, key), None)
    if seed is not None:
        if seed < 0:
            raise ConfigError("--seed must be >= 0")
        values["run"]["seed"] = seed
    _cross_checks(cfg)
    return cfg


def _cross_checks(cfg: ExperimentConfig):
    m = cfg["market"]
    for lo, hi in (("reset_low_min", "reset_low_max"), ("reset_high_min", "reset_high_max"), ("herding_min", "herding_max")):
        if m[lo] > m[hi]:
            raise ConfigError(f"{cfg.where('market', hi)}: {hi} ({m[hi]!r}) is below {lo} ({m[lo]!r})")


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "out"))
