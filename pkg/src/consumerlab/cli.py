"""Command-line front end.

Subcommands: gen-types (product type sets), landscape (difficulty probe
over an unconstrained type sample), run (one simulation), experiment
(paired social/non-social batch plus analysis report), analyze (recompute
the report from raw run CSVs).

Every command is deterministic given its flags and config file; there is
no wall-clock seeding. Settings resolve as flags > config file > defaults.
Config files are plain `key = value` lines with `#` comments; keys are the
RunConfig field names and unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from dataclasses import fields

import numpy as np

from . import products, stats
from .harness import (METRIC_NAMES, PairResult, RunConfig, RunResult,
                      batch, read_run_samples, run, run_file_name,
                      run_metrics, spawn_streams, summary_row, write_run_csv,
                      write_summary_csv, ConfigError)
from .serialize import fmt_float, write_csv

_RUN_FILE_RE = re.compile(r"run_(\d+)_(social|nonsocial)\.csv$")


# ---------------------------------------------------------------------------
# configuration plumbing


def parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _coerce(name: str, text: str, target_type) -> object:
    if target_type is bool:
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"{name}: cannot parse '{text}' as a boolean")
    return target_type(text)


def build_config(config_path: str | None, flag_overrides: dict) -> RunConfig:
    """Merge defaults, config-file entries and flag overrides (in that
    order of increasing precedence)."""
    field_types = {f.name: f.type for f in fields(RunConfig)}
    type_map = {"int": int, "float": float, "bool": bool, "str": str}
    overrides: dict[str, object] = {}
    if config_path:
        for key, text in parse_config_file(config_path).items():
            if key not in field_types:
                raise ValueError(f"unknown configuration key: {key}")
            target = field_types[key]
            if isinstance(target, str):
                target = type_map[target]
            overrides[key] = _coerce(key, text, target)
    for key, value in flag_overrides.items():
        if value is not None:
            overrides[key] = value
    return RunConfig().with_overrides(**overrides)


def _validated_config(args, **flag_overrides) -> RunConfig:
    config = build_config(getattr(args, "config", None), flag_overrides)
    problems = config.validate()
    if problems:
        raise ConfigError(problems)
    for warning in config.density_warnings():
        print(f"warning: {warning}", file=sys.stderr)
    return config


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_types(args) -> int:
    config = _validated_config(args, seed=args.seed, n_types=args.count,
                               min_type_distance=args.min_dist)
    rng = spawn_streams(config.seed)["types"]
    try:
        types = products.generate_type_set(
            config.n_types, config.min_type_distance, rng,
            max_attempts=config.max_type_attempts, slope=config.utility_slope,
            step=config.relax_step, tol=config.relax_tol,
            max_iter=config.relax_max_iter,
            min_separation=config.overlap_angle,
            separation_weight=config.overlap_weight)
    except products.GenerationError as err:
        print(f"error: minimum signature distance {config.min_type_distance} "
              f"not satisfiable: {err} (achieved {err.achieved} types)",
              file=sys.stderr)
        return 1
    products.write_type_csv(types, args.out)
    if len(types) > 1:
        dists = products.pairwise_signature_distances(types)
        upper = dists[np.triu_indices(len(types), k=1)]
        print(f"wrote {len(types)} types to {args.out}; pairwise signature "
              f"distance min={upper.min():.4f} mean={upper.mean():.4f} "
              f"max={upper.max():.4f}")
    else:
        print(f"wrote 1 type to {args.out}")
    return 0


def cmd_landscape(args) -> int:
    if args.samples < 2:
        print("error: --samples must be >= 2", file=sys.stderr)
        return 2
    config = _validated_config(args, seed=args.seed)
    rng = spawn_streams(config.seed)["types"]
    types = products.generate_type_set(
        args.samples, 0.0, rng, max_attempts=max(args.samples, 10_000),
        slope=config.utility_slope, step=config.relax_step,
        tol=config.relax_tol, max_iter=config.relax_max_iter,
        min_separation=config.overlap_angle,
        separation_weight=config.overlap_weight)
    radius = config.maxima_radius if config.maxima_radius > 0 else None
    max_ids, distances = products.landscape_distances(types, radius)
    utilities = [t.utility for t in types]
    try:
        value = stats.fdc(utilities, distances)
        summary = f"# fdc = {fmt_float(value)}"
        message = f"fdc = {value:.4f} over {len(types)} sampled types " \
                  f"({len(max_ids)} maxima)"
    except ValueError:
        summary = "# fdc = undefined (degenerate landscape)"
        message = f"fdc undefined over {len(types)} sampled types (flat landscape)"
    max_set = set(max_ids)
    extra = [[fmt_float(distances[k]), str(int(t.type_id in max_set))]
             for k, t in enumerate(types)]
    products.write_type_csv(types, args.out,
                            extra_header=",nearest_max_dist,is_max",
                            extra_cells=extra, trailer=summary)
    print(message)
    return 0


def cmd_run(args) -> int:
    config = _validated_config(args, seed=args.seed, cycles=args.cycles,
                               social=args.social)
    result = run(config)
    write_run_csv(result, args.out)
    print(",".join(summary_row(result)))
    return 0


def _write_report_files(results_by_pair: list[PairResult], out_dir: str,
                        report_path: str) -> None:
    metric_pairs = {name: ([], []) for name in METRIC_NAMES}
    for pair in results_by_pair:
        for name in METRIC_NAMES:
            s_val = getattr(pair.social.metrics, name)
            ns_val = getattr(pair.nonsocial.metrics, name)
            if s_val is None or ns_val is None:
                continue
            metric_pairs[name][0].append(s_val)
            metric_pairs[name][1].append(ns_val)
    rows = [stats.comparison_row(name, social, nonsocial)
            for name, (social, nonsocial) in metric_pairs.items()]
    stats.write_report_csv(rows, report_path)
    for name in ("mean_units", "mean_coverage", "mean_path_length"):
        social, nonsocial = metric_pairs[name]
        for arm, values in (("social", social), ("nonsocial", nonsocial)):
            if values:
                stats.write_density_csv(
                    stats.gaussian_kde(values),
                    os.path.join(out_dir, f"kde_{name}_{arm}.csv"))


def cmd_experiment(args) -> int:
    config = _validated_config(args)
    pairs = batch(args.pairs, args.seed_base, config, workers=args.workers)
    os.makedirs(args.out_dir, exist_ok=True)
    flat: list[RunResult] = []
    for pair in pairs:
        for result in (pair.social, pair.nonsocial):
            write_run_csv(result, os.path.join(
                args.out_dir, run_file_name(result.config.seed,
                                            result.config.social)))
            flat.append(result)
    write_summary_csv(flat, os.path.join(args.out_dir, "summary.csv"))
    _write_report_files(pairs, args.out_dir,
                        os.path.join(args.out_dir, "report.csv"))
    print(f"{args.pairs} pairs ({2 * args.pairs} runs) written to {args.out_dir}")
    return 0


def cmd_analyze(args) -> int:
    config = _validated_config(args)
    by_seed: dict[int, dict[str, str]] = {}
    if not os.path.isdir(args.in_dir):
        print(f"error: {args.in_dir} is not a directory", file=sys.stderr)
        return 1
    for name in sorted(os.listdir(args.in_dir)):
        match = _RUN_FILE_RE.fullmatch(name)
        if match:
            seed, arm = int(match.group(1)), match.group(2)
            by_seed.setdefault(seed, {})[arm] = os.path.join(args.in_dir, name)
    if not by_seed:
        print(f"error: no run_<seed>_<social|nonsocial>.csv files in "
              f"{args.in_dir}", file=sys.stderr)
        return 1
    gaps = [str(seed) for seed, arms in sorted(by_seed.items())
            if len(arms) != 2]
    if gaps:
        print(f"error: incomplete pairs for seeds: {', '.join(gaps)}",
              file=sys.stderr)
        return 1
    pairs = []
    for seed in sorted(by_seed):
        arms = {}
        for arm in ("social", "nonsocial"):
            samples = read_run_samples(by_seed[seed][arm])
            arms[arm] = _metrics_only_result(samples, config, seed,
                                             arm == "social")
        pairs.append(PairResult(seed=seed, social=arms["social"],
                                nonsocial=arms["nonsocial"]))
    _write_report_files(pairs, os.path.dirname(os.path.abspath(args.out)),
                        args.out)
    print(f"analysis of {len(pairs)} pairs written to {args.out}")
    return 0


def _metrics_only_result(samples, config: RunConfig, seed: int,
                         social: bool) -> RunResult:
    cfg = config.with_overrides(seed=seed, social=social)
    return RunResult(config=cfg, init_checksum="", network_checksum_start="",
                     network_checksum_end="", samples=samples, fdc=None,
                     consumption_events=sum(s.total_units for s in samples),
                     metrics=run_metrics(samples, cfg))


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_flag(parser) -> None:
    parser.add_argument("--config", help="key = value settings file")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consumerlab",
        description="Deterministic consumer-agent simulation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-types", help="generate a spaced product type set")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--min-dist", type=float, default=None,
                   help="minimum pairwise signature distance")
    p.add_argument("--out", required=True)
    _add_config_flag(p)
    p.set_defaults(func=cmd_gen_types)

    p = sub.add_parser("landscape",
                       help="probe landscape difficulty over an unconstrained sample")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--out", required=True)
    _add_config_flag(p)
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("run", help="run one simulation")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cycles", type=int, default=None)
    p.add_argument("--social", action=argparse.BooleanOptionalAction,
                   default=None)
    p.add_argument("--out", required=True)
    _add_config_flag(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment",
                       help="run a paired social vs non-social experiment")
    p.add_argument("--pairs", type=int, default=30)
    p.add_argument("--seed-base", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_config_flag(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("analyze",
                       help="recompute the analysis report from run CSVs")
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out", required=True)
    _add_config_flag(p)
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
