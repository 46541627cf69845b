"""Command-line entry point: analyze, simulate, compare, optimal-k, rlnc-check.

Exit status: 0 when every checked band holds, 2 when a band is violated,
1 on an execution error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import experiments as ex
from .analysis.sensing import FormulaMode
from .core import ConfigError, NetworkConfig, UnstableRegime
from .sim.engine import TRACE_COLUMNS, trace_rows

EXIT_OK, EXIT_ERROR, EXIT_BANDS = 0, 1, 2


def _formula_modes(arg):
    if arg == "both":
        return (FormulaMode.REDERIVED, FormulaMode.AS_PRINTED)
    return (FormulaMode(arg),)


def _load_spec(args) -> ex.ExperimentSpec:
    if not args.config:
        raise ConfigError(["--config is required"])
    spec = ex.ExperimentSpec.load(args.config)
    if args.formula_mode:
        spec.formula_modes = _formula_modes(args.formula_mode)
    if args.seed is not None:
        spec.sim = dataclasses.replace(spec.sim, seed=args.seed)
    return spec


def _out(args, spec=None):
    path = args.out or (spec.output_path if spec else None)
    return path or sys.stdout


def cmd_analyze(args):
    spec = _load_spec(args)
    ex.write_csv(ex.cmd_analyze(spec), ex.ANALYZE_COLUMNS, _out(args, spec))
    return EXIT_OK


def _trace_path(args):
    base = args.out or "trace"
    root, _ = os.path.splitext(base)
    return root + ".trace.csv"


def cmd_simulate(args):
    spec = _load_spec(args)
    rows, reports = ex.cmd_simulate(spec, keep_reports=True) if args.trace else (ex.cmd_simulate(spec), [])
    ex.write_csv(rows, ex.SIMULATE_COLUMNS, _out(args, spec))
    if args.trace:
        with open(_trace_path(args), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["value", "mode", "strategy", "trial", *TRACE_COLUMNS])
            for row, rep in zip(rows, reports):
                cfg = rep.params.cfg
                for i, tr in enumerate(rep.trials):
                    for r in trace_rows(tr):
                        w.writerow([row["value"], cfg.pu_mode.value, cfg.su_strategy.value, i, *r])
    return EXIT_OK


def cmd_compare(args):
    if args.analytic and args.simulated:
        ana = ex.read_csv(args.analytic)
        sim = ex.read_csv(args.simulated)
    else:
        spec = _load_spec(args)
        ana = ex.cmd_analyze(spec)
        sim = ex.cmd_simulate(spec)
    ana = [r for r in ana if r["status"] == "ok"]
    ok_keys = {ex._key(r) for r in ana}
    sim = [r for r in sim if ex._key(r) in ok_keys]
    cmp = ex.cmd_compare(ana, sim, args.tolerance)
    ex.write_csv(cmp.rows, ex.COMPARE_COLUMNS, args.out or sys.stdout)
    for (mode, strat, fm), st in sorted(cmp.per_sweep.items()):
        print(f"# {mode}/{strat}/{fm}: max |rel diff| {st['max']:.2%}, mean {st['mean']:.2%}", file=sys.stderr)
    for msg in cmp.failures:
        print(f"# FAIL {msg}", file=sys.stderr)
    return EXIT_OK if cmp.passed else EXIT_BANDS


def _config_from_args(args) -> NetworkConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        try:
            return ex.ExperimentSpec.from_dict(json.loads(text)).base
        except ConfigError:
            return NetworkConfig.from_json(text)
    return NetworkConfig()


def cmd_optimal_k(args):
    cfg = _config_from_args(args)
    k_star, rows = ex.optimal_k_rows(cfg, args.k_max)
    ex.write_csv(rows, ["k", "P_idle", "pi0", "delta"], args.out or sys.stdout)
    print(f"# k* = {k_star}", file=sys.stderr)
    return EXIT_OK


def cmd_rlnc_check(args):
    from .rlnc import GaloisField, decode_trials, innovation_probability, nonsingular_probability
    from .rlnc.codec import check_test_vector, make_test_vector, read_test_vectors, write_test_vectors

    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    ok = True
    gf2 = innovation_probability(GaloisField(1), 2)
    good = gf2.exact and gf2.probability == 0.375
    ok &= good
    print(f"GF(2) m=2 nonsingular fraction {gf2.probability} (exact={gf2.exact}) {'ok' if good else 'FAIL'}")
    g16 = GaloisField(16)
    dec, nonsing, exact = decode_trials(g16, 8, args.trials, rng)
    frac = dec / args.trials
    good = frac >= 0.999 and exact == dec and dec == nonsing
    ok &= good
    print(f"GF(2^16) m=8 decoded {dec}/{args.trials} ({frac:.5f}; bound {nonsingular_probability(2**16, 8):.8f}), "
          f"exact recoveries {exact} {'ok' if good else 'FAIL'}")
    if args.write_vectors:
        vecs = [make_test_vector(GaloisField(w), m, 8, rng) for w in (1, 4, 8, 16) for m in (1, 2, 4)]
        write_test_vectors(args.write_vectors, vecs)
        print(f"wrote {len(vecs)} vectors to {args.write_vectors}")
    if args.vectors:
        lines = read_test_vectors(args.vectors)
        bad = [i for i, ln in enumerate(lines) if not check_test_vector(ln)]
        ok &= not bad
        print(f"test vectors: {len(lines) - len(bad)}/{len(lines)} ok")
    return EXIT_OK if ok else EXIT_BANDS


def build_parser():
    p = argparse.ArgumentParser(prog="specshape", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON ExperimentSpec")
        sp.add_argument("--seed", type=int, help="64-bit base seed")
        sp.add_argument("--out", help="output CSV path (default stdout)")
        sp.add_argument("--formula-mode", choices=["as-printed", "rederived", "both"])

    sp = sub.add_parser("analyze", help="analytic sweep dataset")
    common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("simulate", help="Monte-Carlo sweep dataset")
    common(sp)
    sp.add_argument("--trace", action="store_true", help="also dump per-slot traces next to --out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="analytic vs simulated datasets")
    common(sp)
    sp.add_argument("--analytic", help="CSV from analyze")
    sp.add_argument("--simulated", help="CSV from simulate")
    sp.add_argument("--tolerance", type=float, default=0.03)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("optimal-k", help="prediction distance over backoff values")
    common(sp)
    sp.add_argument("--k-max", type=int, default=12)
    sp.set_defaults(func=cmd_optimal_k)

    sp = sub.add_parser("rlnc-check", help="codec self-check and conformance vectors")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--vectors", help="check vectors from this file")
    sp.add_argument("--write-vectors", help="write fresh vectors to this file")
    sp.set_defaults(func=cmd_rlnc_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, UnstableRegime, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
