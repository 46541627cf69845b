"""Sweep specs and the analyze / simulate / compare datasets behind the CLI."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import pu as pu_analysis
from .analysis.sensing import (
    FormulaMode,
    NoConvergence,
    optimal_backoff,
    solve_adaptive_fixed_point,
    su_throughput_adaptive,
    su_throughput_random,
)
from .core import ConfigError, NetworkConfig, PuMode, SuStrategy, UnstableRegime, validate_config
from .sim.engine import CSV_COLUMNS, SimParams, report_row, run_experiment

SWEEP_FIELDS = {
    "lambda": "arrival_rate",
    "epsilon": "erasure_prob",
    "m": "batch_size",
    "k": "backoff",
    "N": "num_channels",
    "B": "minislots_per_slot",
}

DEFAULT_CASES = (
    (PuMode.NETWORK_CODING, SuStrategy.RANDOM),
    (PuMode.NETWORK_CODING, SuStrategy.ADAPTIVE),
    (PuMode.ARQ, SuStrategy.RANDOM),
)

ANALYZE_COLUMNS = [
    "param", "value", "mode", "strategy", "formula_mode", "N", "L", "m", "lambda", "epsilon", "B", "k",
    "eta_p", "P_idle", "p_r", "E_D1", "eta_s", "pi0", "delta", "iterations", "status",
]
SIMULATE_COLUMNS = ["param", "value", *CSV_COLUMNS, "status"]


@dataclass
class SimOverrides:
    horizon: int = 110_000
    warmup: int | None = 10_000
    seed: int = 0
    trials: int = 1
    n_batches: int = 20


@dataclass
class ExperimentSpec:
    base: NetworkConfig
    sweep_param: str
    sweep_values: list
    formula_modes: tuple = (FormulaMode.REDERIVED,)
    simulate: bool = False
    sim: SimOverrides = field(default_factory=SimOverrides)
    cases: tuple = DEFAULT_CASES
    output_path: str | None = None

    def __post_init__(self):
        if self.sweep_param not in SWEEP_FIELDS:
            raise ConfigError([f"unknown sweep parameter {self.sweep_param!r}; choose from {sorted(SWEEP_FIELDS)}"])
        if not self.sweep_values:
            raise ConfigError(["empty sweep"])
        for v in self.sweep_values:
            self.config_at(v)
        if self.sim.warmup is not None and self.sim.horizon <= self.sim.warmup:
            raise ConfigError([f"horizon {self.sim.horizon} must exceed warmup {self.sim.warmup}"])
        self.formula_modes = tuple(FormulaMode(m) for m in self.formula_modes)
        self.cases = tuple((PuMode(a), SuStrategy(b)) for a, b in self.cases)

    def config_at(self, value, mode=None, strategy=None) -> NetworkConfig:
        name = SWEEP_FIELDS[self.sweep_param]
        if name in ("arrival_rate", "erasure_prob"):
            value = float(value)
        else:
            if float(value) != int(value):
                raise ConfigError([f"{self.sweep_param} must be an integer, got {value!r}"])
            value = int(value)
        changes = {name: value}
        if mode is not None:
            changes["pu_mode"] = mode
        if strategy is not None:
            changes["su_strategy"] = strategy
        return validate_config(dataclasses.replace(self.base, **changes))

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentSpec:
        known = {"base", "sweep", "outputs", "simulate", "sim", "cases", "output_path"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError([f"unknown key {k!r}" for k in unknown])
        sweep = d.get("sweep") or {}
        if set(sweep) - {"param", "values"}:
            raise ConfigError(["sweep takes exactly 'param' and 'values'"])
        sim = SimOverrides(**d.get("sim", {}))
        kw = {}
        if "cases" in d:
            kw["cases"] = tuple(tuple(c) for c in d["cases"])
        return cls(
            base=NetworkConfig.from_dict(d.get("base", {})),
            sweep_param=sweep.get("param", ""),
            sweep_values=list(sweep.get("values", [])),
            formula_modes=tuple(d.get("outputs", ["rederived"])),
            simulate=bool(d.get("simulate", False)),
            sim=sim,
            output_path=d.get("output_path"),
            **kw,
        )

    @classmethod
    def load(cls, path) -> ExperimentSpec:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _provenance(spec, value, cfg):
    return {
        "param": spec.sweep_param,
        "value": value,
        "mode": cfg.pu_mode.value,
        "strategy": cfg.su_strategy.value,
        "N": cfg.num_channels,
        "L": cfg.num_receivers,
        "m": cfg.batch_size,
        "lambda": cfg.arrival_rate,
        "epsilon": cfg.erasure_prob,
        "B": cfg.minislots_per_slot,
        "k": cfg.backoff,
    }


def analyze_point(cfg: NetworkConfig, formula_mode) -> dict:
    """Analytic row for one config; raises UnstableRegime / NoConvergence."""
    prof = pu_analysis.pu_profile(cfg)
    P = prof.idle_prob
    N, B = cfg.num_channels, cfg.minislots_per_slot
    row = {"eta_p": prof.max_stable_throughput, "P_idle": P}
    if cfg.su_strategy is SuStrategy.ADAPTIVE:
        k = cfg.backoff if cfg.pu_mode is PuMode.NETWORK_CODING else 0
        fp = solve_adaptive_fixed_point(P, N, B, k)
        rep = su_throughput_adaptive(P, N, B, k, formula_mode, fixed_point=fp)
        row.update(pi0=fp.pi0, delta=fp.delta, iterations=fp.iterations)
    else:
        rep = su_throughput_random(P, N, B, formula_mode)
        row.update(pi0=1.0, delta=1.0 - P, iterations=0)
    row.update(p_r=rep.success_prob, E_D1=rep.expected_sensing_cost, eta_s=rep.throughput)
    return row


def cmd_analyze(spec: ExperimentSpec) -> list[dict]:
    rows = []
    for value in spec.sweep_values:
        for mode, strategy in spec.cases:
            cfg = spec.config_at(value, mode, strategy)
            for fm in spec.formula_modes:
                row = _provenance(spec, value, cfg)
                row["formula_mode"] = fm.value
                try:
                    row.update(analyze_point(cfg, fm))
                    row["status"] = "ok"
                except UnstableRegime:
                    row["status"] = "unstable"
                except NoConvergence:
                    row["status"] = "no-convergence"
                rows.append({c: row.get(c, math.nan) for c in ANALYZE_COLUMNS})
    return rows


def sim_params(spec: ExperimentSpec, cfg: NetworkConfig) -> SimParams:
    s = spec.sim
    return SimParams(cfg, s.horizon, s.warmup, s.seed, s.trials, s.n_batches)


def cmd_simulate(spec: ExperimentSpec, keep_reports: bool = False):
    rows, reports = [], []
    for value in spec.sweep_values:
        for mode, strategy in spec.cases:
            cfg = spec.config_at(value, mode, strategy)
            rep = run_experiment(sim_params(spec, cfg), record_trace=keep_reports)
            row = {"param": spec.sweep_param, "value": value, **report_row(rep)}
            row["status"] = "ok" if rep.queue_stable else "unstable"
            rows.append(row)
            reports.append(rep)
    return (rows, reports) if keep_reports else rows


COMPARE_COLUMNS = [
    "param", "value", "mode", "strategy", "formula_mode", "eta_s_analytic", "eta_s_sim", "stderr_eta_s",
    "rel_diff", "gain_sim", "gain_analytic",
]


@dataclass
class Comparison:
    rows: list
    per_sweep: dict  # (mode, strategy, formula_mode) -> {"max": .., "mean": ..}
    gains: list
    tolerance: float
    passed: bool
    failures: list


def _key(row):
    return (float(row["value"]), row["mode"], row["strategy"])


def _num(x):
    try:
        return float(x)
    except (TypeError, ValueError):
        return math.nan


def cmd_compare(analytic_rows, sim_rows, tolerance: float = 0.03) -> Comparison:
    """Join analytic and simulated rows; a pure function of the two datasets.

    Bands checked: mean |relative difference| of each adaptive series stays
    below ``tolerance``, and the simulated adaptive-over-random gain is
    non-negative everywhere.
    """
    sim = {_key(r): r for r in sim_rows}
    ana_keys = {_key(r) for r in analytic_rows}
    if ana_keys != set(sim):
        raise ValueError("analytic and simulated sweep grids do not match")
    params = {r["param"] for r in analytic_rows} | {r["param"] for r in sim_rows}
    if len(params) != 1:
        raise ValueError(f"datasets sweep different parameters: {sorted(params)}")

    def gain(value, table, col):
        a = table.get((value, PuMode.NETWORK_CODING.value, SuStrategy.ADAPTIVE.value))
        r = table.get((value, PuMode.NETWORK_CODING.value, SuStrategy.RANDOM.value))
        if a is None or r is None:
            return math.nan
        ra = _num(r[col])
        return _num(a[col]) / ra - 1.0 if ra else math.nan

    by_mode: dict = {}
    for r in analytic_rows:
        by_mode.setdefault(r["formula_mode"], {})[_key(r)] = r
    rows = []
    series: dict = {}
    for ar in analytic_rows:
        key = _key(ar)
        sr = sim[key]
        fm = ar["formula_mode"]
        ea, es = _num(ar["eta_s"]), _num(sr["eta_s_hat"])
        rel = (ea - es) / es if es else math.nan
        rows.append({
            "param": ar["param"], "value": key[0], "mode": key[1], "strategy": key[2], "formula_mode": fm,
            "eta_s_analytic": ea, "eta_s_sim": es, "stderr_eta_s": _num(sr["stderr_eta_s"]),
            "rel_diff": rel, "gain_sim": gain(key[0], sim, "eta_s_hat"), "gain_analytic": gain(key[0], by_mode[fm], "eta_s"),
        })
        if not math.isnan(rel):
            series.setdefault((key[1], key[2], fm), []).append(abs(rel))
    per_sweep = {k: {"max": max(v), "mean": float(np.mean(v))} for k, v in series.items()}
    failures = []
    for (mode, strat, fm), st in per_sweep.items():
        if strat == SuStrategy.ADAPTIVE.value and st["mean"] >= tolerance:
            failures.append(f"{mode}/{strat}/{fm}: mean |rel diff| {st['mean']:.2%} >= {tolerance:.0%}")
    gains = sorted({(r["value"], r["gain_sim"]) for r in rows if not math.isnan(r["gain_sim"])})
    for v, g in gains:
        if g < 0:
            failures.append(f"simulated adaptive gain {g:.2%} < 0 at {v}")
    return Comparison(rows, per_sweep, gains, tolerance, not failures, failures)


def optimal_k_rows(cfg: NetworkConfig, k_max: int):
    P = pu_analysis.idle_probability(cfg)
    k_star, curve = optimal_backoff(P, cfg.num_channels, cfg.minislots_per_slot, k_max)
    rows = []
    for k, d in enumerate(curve):
        pi0 = solve_adaptive_fixed_point(P, cfg.num_channels, cfg.minislots_per_slot, k).pi0
        rows.append({"k": k, "P_idle": P, "pi0": float(pi0), "delta": float(d)})
    return k_star, rows


def write_csv(rows, columns, path_or_file):
    def _w(fh):
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: _fmt(r.get(c)) for c in columns})

    if hasattr(path_or_file, "write"):
        _w(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            _w(fh)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
