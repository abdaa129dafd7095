"""Command-line entry points: topology, train, evaluate, sweep, report.

Exit codes: 0 success, 2 configuration error (also argparse usage), 3
numerical abort, 4 infeasible instance.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import ConfigError, InfeasibleError, NumericalAbort
from .experiments import (
    LEARNED_METHODS,
    TAG_TOPOLOGY,
    derived_seed,
    evaluate_methods,
    load_train_checkpoint,
    merge_results,
    run_seed,
    run_sweep,
)
from .geometry import (
    classify_field_region,
    edof_planar,
    generate_topology,
    rayleigh_distance,
)
from .reporting import (
    read_result_csv,
    summary_from_result,
    write_json,
    write_manifest,
    write_result_csv,
    write_rows_csv,
)

CURVE_COLUMNS = [
    "episode",
    "reward",
    "sum_se",
    "ee",
    "infeasible",
    "noise_sigma",
    "critic_loss",
    "actor_objective",
]
CADENCE_COLUMNS = ["episode", "eval_drops", "sum_se_median", "ee_median"]
SWEEP_COLUMNS = [
    "axis",
    "value",
    "method",
    "seed",
    "median_sum_se",
    "median_ee",
    "n_drops",
    "config_hash",
]


def _load(args) -> ExperimentConfig:
    return load_config(args.config)


def _seeds(config: ExperimentConfig, args) -> tuple[int, ...]:
    return (args.seed,) if args.seed is not None else config.seeds


def _out_dir(args, config: ExperimentConfig) -> str:
    out = args.out or os.environ.get("CFXL_OUT_DIR") or os.path.join(
        "runs", config.config_hash()
    )
    os.makedirs(out, exist_ok=True)
    return out


def cmd_topology(args) -> int:
    config = _load(args)
    seed = _seeds(config, args)[0]
    topology = generate_topology(config.topology, derived_seed(seed, TAG_TOPOLOGY))
    lam = topology.wavelength
    print(f"bs={topology.num_bs} panels of {topology.bs_antennas_per_panel} antennas, "
          f"ue={topology.num_ue} panels of {topology.ue_antennas_per_panel} antennas, "
          f"wavelength={lam} m, area={topology.area_side} m")
    for m, panel in enumerate(topology.bs_panels):
        d_ray = rayleigh_distance(panel.diagonal, lam)
        a, b = panel.side_lengths
        print(f"bs {m}: center={np.round(panel.center, 3).tolist()} "
              f"aperture={panel.diagonal:.4g} m rayleigh={d_ray:.4g} m "
              f"edof={edof_planar(max(a, lam), max(b, lam), lam):.4g}")
    for k in range(topology.num_ue):
        pos = topology.ue_centers[k]
        dists = np.linalg.norm(topology.bs_centers - pos, axis=1)
        regions = [
            classify_field_region(float(d), p.diagonal, lam).name.lower()
            for d, p in zip(dists, topology.bs_panels)
        ]
        print(f"ue {k}: pos={np.round(pos, 3).tolist()} "
              f"dist_min={dists.min():.4g} m dist_max={dists.max():.4g} m "
              f"regions={regions}")
    return 0


def _train_one_seed(config, seed, out, resume):
    result, outcomes = run_seed(config, seed, out_dir=out, resume_from=resume)
    for method, outcome in outcomes.items():
        if outcome.curve:
            write_rows_csv(
                os.path.join(out, f"training_curve_{method}_s{seed}.csv"),
                outcome.curve,
                CURVE_COLUMNS,
            )
        if outcome.cadence_eval:
            write_rows_csv(
                os.path.join(out, f"training_eval_{method}_s{seed}.csv"),
                outcome.cadence_eval,
                CADENCE_COLUMNS,
            )
    return result


def cmd_train(args) -> int:
    config = _load(args)
    seeds = _seeds(config, args)
    if args.checkpoint and len(seeds) != 1:
        raise ConfigError("--checkpoint resume needs exactly one seed (use --seed)")
    out = _out_dir(args, config)
    chash = config.config_hash()
    results_path = os.path.join(out, f"results_{chash}.csv")
    summary_path = os.path.join(out, f"summary_{chash}.json")
    write_manifest(
        os.path.join(out, "manifest.json"), chash, seeds, [results_path, summary_path]
    )
    results = [_train_one_seed(config, s, out, args.checkpoint) for s in seeds]
    merged = merge_results(results)
    write_result_csv(results_path, merged)
    write_json(summary_path, summary_from_result(merged))
    print(f"results: {results_path}")
    print(f"summary: {summary_path}")
    return 0


def cmd_evaluate(args) -> int:
    config = _load(args)
    seeds = _seeds(config, args)
    if args.checkpoint and len(seeds) != 1:
        raise ConfigError("--checkpoint evaluation needs exactly one seed (use --seed)")
    out = _out_dir(args, config)
    chash = config.config_hash()
    results_path = os.path.join(out, f"results_{chash}.csv")
    summary_path = os.path.join(out, f"summary_{chash}.json")
    write_manifest(
        os.path.join(out, "manifest.json"), chash, seeds, [results_path, summary_path]
    )
    results = []
    for seed in seeds:
        outcomes = {}
        methods = config.methods or None
        if args.checkpoint:
            outcome, _ = load_train_checkpoint(config, seed, args.checkpoint)
            outcomes[outcome.method] = outcome
        if methods is None:
            from .config import default_methods

            methods = tuple(
                m
                for m in default_methods(config.task.kind)
                if m not in LEARNED_METHODS or m in outcomes
            )
        results.append(evaluate_methods(config, seed, methods, outcomes))
    merged = merge_results(results)
    write_result_csv(results_path, merged)
    write_json(summary_path, summary_from_result(merged))
    print(f"results: {results_path}")
    print(f"summary: {summary_path}")
    return 0


def cmd_sweep(args) -> int:
    config = _load(args)
    seeds = _seeds(config, args)
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values must be comma-separated integers: {exc}") from exc
    if not values:
        raise ConfigError("--values is empty")
    out = _out_dir(args, config)
    chash = config.config_hash()
    csv_path = os.path.join(out, f"sweep_{args.axis}_{chash}.csv")
    json_path = os.path.join(out, f"sweep_{args.axis}_{chash}.json")
    write_manifest(os.path.join(out, "manifest.json"), chash, seeds, [csv_path, json_path])
    rows = run_sweep(config, args.axis, values, seeds, jobs=args.jobs)
    write_rows_csv(csv_path, rows, SWEEP_COLUMNS)
    summary: dict = {"axis": args.axis, "values": values, "cells": {}}
    for value in values:
        per_method: dict = {}
        for method in sorted({r["method"] for r in rows}):
            vals = [
                r["median_sum_se"] for r in rows if r["value"] == value and r["method"] == method
            ]
            ees = [
                r["median_ee"] for r in rows if r["value"] == value and r["method"] == method
            ]
            if vals:
                per_method[method] = {
                    "median_sum_se": float(np.median(vals)),
                    "median_ee": float(np.median(ees)),
                    "n_seeds": len(vals),
                }
        summary["cells"][str(value)] = per_method
    write_json(json_path, summary)
    print(f"sweep table: {csv_path}")
    print(f"sweep summary: {json_path}")
    return 0


def cmd_report(args) -> int:
    result = read_result_csv(args.results)
    summary = summary_from_result(result)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"summary_{result.config_hash}.json")
        write_json(path, summary)
        print(f"summary: {path}")
    else:
        import json

        print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfxl",
        description="Cell-free XL-MIMO near-field simulator and MADDPG task runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="experiment TOML path")
        p.add_argument("--seed", type=int, default=None, help="override config seeds")
        p.add_argument("--out", default=None, help="output directory (or CFXL_OUT_DIR)")

    p = sub.add_parser("topology", help="print the sampled network geometry")
    common(p)
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("train", help="train the configured task and evaluate")
    common(p)
    p.add_argument("--checkpoint", default=None, help="resume from this checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate baselines (and a checkpointed policy)")
    common(p)
    p.add_argument("--checkpoint", default=None, help="trained policy checkpoint")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="train/evaluate across a topology axis")
    common(p)
    p.add_argument("--axis", required=True, choices=("num_bs", "bs_antennas"))
    p.add_argument("--values", required=True, help="comma-separated integers")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarize an existing results CSV")
    p.add_argument("--results", required=True, help="results CSV path")
    p.add_argument("--out", default=None, help="write summary JSON here instead of stdout")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
