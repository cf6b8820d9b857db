"""Command-line front end.

Subcommands:
  simulate      Monte-Carlo BER/FER campaign over an Eb/N0 grid.
  complexity    Operation-count report for the two phase estimators.
  oracle-check  Desk-scale agreement check between the filter-smoother and
                the grid-search reference estimator.

Flags mirror ScenarioConfig; --config loads a JSON file with the same field
names (command-line flags win). MIMOPHN_WORKERS sets the default worker
count.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .bicm import make_constellation
from .channel import ChannelConfig, PhnConfig, apply_channel, generate_phn, \
    generate_rician_channel
from .ekfs import EkfsConfig, run_ekfs
from .detector import SoftSymbolStats
from .em import MapOracleConfig, map_oracle
from .harness import (ComplexityParams, ScenarioConfig, complexity_ekfs,
                      complexity_map, emit_results, noise_var_uncoded,
                      run_monte_carlo)


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None,
                   help="JSON file with ScenarioConfig fields")
    p.add_argument("--scenario", type=str, default=None,
                   choices=["proposed_em", "no_tracking", "disjoint", "no_phn"])
    p.add_argument("--ebn0", type=float, nargs="+", default=None,
                   help="Eb/N0 grid in dB")
    p.add_argument("--phn-var", type=float, default=None)
    p.add_argument("--em-iters", type=int, default=None)
    p.add_argument("--pilot-spacing", type=int, default=None)
    p.add_argument("--num-tx", type=int, default=None)
    p.add_argument("--num-rx", type=int, default=None)
    p.add_argument("--mod-order", type=int, default=None)
    p.add_argument("--block-len", type=int, default=None)
    p.add_argument("--decoder-iters", type=int, default=None)
    p.add_argument("--frames", type=int, default=None, dest="frames_per_point")
    p.add_argument("--min-errors", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, dest="base_seed")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", type=str, default="results.csv")
    p.add_argument("--manifest", type=str, default=None)


def _scenario_config(args) -> ScenarioConfig:
    fields = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            fields.update(json.load(f))
    overrides = {
        "scenario": args.scenario,
        "ebn0_grid_db": tuple(args.ebn0) if args.ebn0 else None,
        "phn_var": args.phn_var,
        "em_iters": args.em_iters,
        "pilot_spacing": args.pilot_spacing,
        "num_tx": args.num_tx,
        "num_rx": args.num_rx,
        "mod_order": args.mod_order,
        "block_len": args.block_len,
        "decoder_iters": args.decoder_iters,
        "frames_per_point": args.frames_per_point,
        "min_errors": args.min_errors,
        "base_seed": args.base_seed,
        "workers": args.workers,
    }
    fields.update({k: v for k, v in overrides.items() if v is not None})
    if "ebn0_grid_db" in fields:
        fields["ebn0_grid_db"] = tuple(fields["ebn0_grid_db"])
    if "workers" not in fields:
        fields["workers"] = int(os.environ.get("MIMOPHN_WORKERS", "1"))
    valid = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(fields) - valid
    if unknown:
        raise SystemExit(f"unknown config fields: {sorted(unknown)}")
    return ScenarioConfig(**fields)


def _cmd_simulate(args) -> int:
    cfg = _scenario_config(args)

    def progress(pr):
        for it, st in enumerate(pr.stats, start=1):
            print(f"[{pr.scenario}] ebn0={pr.ebn0_db:g} dB iter={it} "
                  f"ber={st.ber:.3e} fer={st.fer:.3e} frames={st.frames_counted}")

    results = run_monte_carlo(cfg, progress=progress)
    manifest = args.manifest or (os.path.splitext(args.out)[0] + "_manifest.json")
    emit_results(results, args.out, manifest, cfg)
    print(f"wrote {args.out} and {manifest}")
    return 0


def _cmd_complexity(args) -> int:
    p = ComplexityParams(
        num_tx=args.num_tx, num_rx=args.num_rx, frame_len=args.frame_len,
        mod_order=args.mod_order, grid_step=args.grid_step,
        ap_cycles=args.ap_cycles, decoder_iters=args.decoder_iters,
        var_degree=args.var_degree, check_degree=args.check_degree,
    )
    literal = args.bookkeeping == "literal"
    cm = complexity_map(p, literal=literal)
    ce = complexity_ekfs(p, literal=literal)
    print(f"{args.num_tx}x{args.num_rx} ({args.bookkeeping} bookkeeping)")
    print(f"  grid-search estimator: {cm.total:.3e} "
          f"(mult {cm.mults:.3e}, add {cm.adds:.3e})")
    print(f"  filter-smoother:       {ce.total:.3e} "
          f"(mult {ce.mults:.3e}, add {ce.adds:.3e})")
    print(f"  ratio: {cm.total / ce.total:.3e}")
    return 0


def _cmd_oracle_check(args) -> int:
    cst = make_constellation(args.mod_order)
    ch_cfg = ChannelConfig(args.num_tx, args.num_rx, args.rician_db)
    noise_var = noise_var_uncoded(args.ebn0, args.mod_order)
    oracle_cfg = MapOracleConfig(grid_step=args.grid_step, ap_cycles=args.ap_cycles)
    agree = 0
    worst = 0.0
    for trial in range(args.trials):
        seed = [args.seed, trial]
        h = generate_rician_channel(ch_cfg, seed + [0])
        phn = generate_phn(PhnConfig(args.phn_var, args.frame_len),
                           args.num_tx, args.num_rx, seed + [1])
        rng = np.random.default_rng(seed + [2])
        sym_idx = rng.integers(0, cst.order, size=(args.num_tx, args.frame_len))
        symbols = cst.points[sym_idx]
        y = apply_channel(symbols, h, phn, noise_var, seed + [3])

        second = np.einsum("ik,jk->kij", symbols, np.conj(symbols))
        soft = SoftSymbolStats(alpha=symbols, second_moment=second)
        ek = EkfsConfig(args.phn_var, noise_var, args.num_rx, args.num_tx)
        smoothed = run_ekfs(y, h, soft, ek).smoothed_state.T
        ref = map_oracle(y, h, symbols, oracle_cfg, args.phn_var)
        gap = float(np.max(np.abs(smoothed - ref)))
        worst = max(worst, gap)
        agree += int(gap <= args.tolerance)
    frac = agree / args.trials
    print(f"agreement within {args.tolerance} rad: {agree}/{args.trials} "
          f"({100 * frac:.1f}%), worst gap {worst:.4f} rad")
    return 0 if frac >= args.required_fraction else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mimophn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte-Carlo BER/FER campaign")
    _add_scenario_args(sim)
    sim.set_defaults(func=_cmd_simulate)

    comp = sub.add_parser("complexity", help="operation-count report")
    comp.add_argument("--num-tx", type=int, default=2)
    comp.add_argument("--num-rx", type=int, default=2)
    comp.add_argument("--frame-len", type=int, default=8176)
    comp.add_argument("--mod-order", type=int, default=16)
    comp.add_argument("--grid-step", type=float, default=1e-3)
    comp.add_argument("--ap-cycles", type=int, default=4)
    comp.add_argument("--decoder-iters", type=int, default=1)
    comp.add_argument("--var-degree", type=int, default=4)
    comp.add_argument("--check-degree", type=int, default=32)
    comp.add_argument("--bookkeeping", choices=["calibrated", "literal"],
                      default="calibrated")
    comp.set_defaults(func=_cmd_complexity)

    orc = sub.add_parser("oracle-check",
                         help="filter-smoother vs grid-search agreement")
    orc.add_argument("--num-tx", type=int, default=2)
    orc.add_argument("--num-rx", type=int, default=2)
    orc.add_argument("--mod-order", type=int, default=16)
    orc.add_argument("--frame-len", type=int, default=8)
    orc.add_argument("--ebn0", type=float, default=25.0)
    orc.add_argument("--phn-var", type=float, default=5e-5)
    orc.add_argument("--rician-db", type=float, default=2.0)
    orc.add_argument("--grid-step", type=float, default=1e-2)
    orc.add_argument("--ap-cycles", type=int, default=4)
    orc.add_argument("--trials", type=int, default=20)
    orc.add_argument("--tolerance", type=float, default=0.05)
    orc.add_argument("--required-fraction", type=float, default=0.95)
    orc.add_argument("--seed", type=int, default=7)
    orc.set_defaults(func=_cmd_oracle_check)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
