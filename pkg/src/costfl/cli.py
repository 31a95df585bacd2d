"""Command-line entry point: ``costfl run | sweep | validate``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import config as cfgmod
from .engine import (
    build_setup,
    convergence_accuracy,
    cost_to_accuracy,
    rounds_to_accuracy,
    run_experiment,
    write_outputs,
)
from .errors import ConfigError, FLError

logger = logging.getLogger("costfl")

OUT_ENV = "COSTFL_OUT"
EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

TABLE_COLUMNS = [
    "policy",
    "knob",
    "seed",
    "status",
    "target",
    "final_accuracy",
    "rounds_to_target",
    "cost_to_target",
    "normalized_cost",
    "total_emissions",
    "rounds",
    "stop_reason",
    "error",
]


def _default_out(name: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "runs")) / name


def cmd_validate(args) -> int:
    cfg = cfgmod.load_config(args.config, args.set)
    sys.stdout.write(yaml.safe_dump(cfgmod.to_dict(cfg), sort_keys=False))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = cfgmod.load_config(args.config, args.set)
    out = Path(args.out) if args.out else _default_out(Path(args.config).stem)
    try:
        result = run_experiment(cfg, jobs=args.jobs)
    except FLError as exc:
        rnd = getattr(exc, "round_idx", None)
        where = f"round {rnd}: " if rnd is not None else ""
        print(f"error: {where}{exc}", file=sys.stderr)
        return EXIT_RUNTIME
    summary = write_outputs(cfg, result, out)
    print(
        f"{summary['policy']}: {summary['rounds']} rounds ({summary['stop_reason']}), "
        f"final accuracy {summary['final_accuracy']:.4f}, "
        f"emissions {summary['total_emissions']:.4f} gCO2eq -> {out}"
    )
    return EXIT_OK


@dataclass(frozen=True)
class SweepSpec:
    base: dict
    policies: tuple
    knobs: tuple
    seeds: tuple
    output: Path
    target: float | None = None


def load_sweep(path, overrides=()) -> SweepSpec:
    path = Path(path)
    raw = cfgmod.load_raw(path)
    if "base" not in raw:
        raise ConfigError("sweep: base: required field is missing")
    base = raw["base"]
    if isinstance(base, str):
        base_path = Path(base) if Path(base).is_absolute() else path.parent / base
        base = cfgmod.load_raw(base_path)
    if not isinstance(base, dict):
        raise ConfigError("sweep: base must be a mapping or a path to a config file")
    base = cfgmod.apply_overrides(base, list(raw.get("set") or ()) + list(overrides))
    axes = raw.get("axes") or {}
    policies = tuple(axes.get("policy") or ())
    knobs = tuple(float(k) for k in axes.get("knob") or ())
    seeds = tuple(int(s) for s in axes.get("seed") or ())
    for name, axis in (("policy", policies), ("knob", knobs), ("seed", seeds)):
        if not axis:
            raise ConfigError(f"sweep: axes.{name} must be a non-empty list")
    target = raw.get("target")
    if target is not None and not 0.0 <= float(target) <= 1.0:
        raise ConfigError("sweep: target must be in [0, 1]")
    # validate every cell's config up front
    for p in policies:
        probe = dict(base)
        probe["selection"] = {**(base.get("selection") or {}), "policy": p}
        cfgmod.from_dict(probe)
    return SweepSpec(
        base, policies, knobs, seeds, Path(raw.get("output") or _default_out(path.stem)),
        None if target is None else float(target),
    )


def _cell_config(spec: SweepSpec, policy: str, knob: float, seed: int):
    raw = cfgmod.apply_overrides(spec.base, [f"selection.policy={policy}", f"partition.knob={knob}", f"seed={seed}"])
    return cfgmod.from_dict(raw)


def _run_group(spec: SweepSpec, knob: float, seed: int) -> list[dict]:
    """Run every policy at one (knob, seed); random runs first and sets the baseline."""
    policies = ["random"] + [p for p in spec.policies if p != "random"]
    results, errors = {}, {}
    setup = None
    for policy in policies:
        cfg = _cell_config(spec, policy, knob, seed)
        cell_dir = spec.output / "cells" / f"{policy}_knob{knob}_seed{seed}"
        try:
            if setup is None:
                setup = build_setup(cfg)
            res = run_experiment(cfg, setup=setup)
            results[policy] = (cfg, res)
            write_outputs(cfg, res, cell_dir)
        except FLError as exc:
            rnd = getattr(exc, "round_idx", None)
            errors[policy] = f"round {rnd}: {exc}" if rnd is not None else str(exc)

    target = spec.target
    if target is None and "random" in results:
        cfg, res = results["random"]
        target = convergence_accuracy(res, cfg.stopping.min_delta, cfg.stopping.patience)
    base_cost = None
    if target is not None and "random" in results:
        base_cost = cost_to_accuracy(results["random"][1], target)

    rows = []
    for policy in spec.policies:
        row = {"policy": policy, "knob": knob, "seed": seed, "target": target}
        if policy in errors or policy not in results:
            row.update(status="error", error=errors.get(policy, "baseline failed"))
            rows.append(row)
            continue
        cfg, res = results[policy]
        cost = cost_to_accuracy(res, target) if target is not None else None
        row.update(
            status="ok",
            final_accuracy=res.final_accuracy,
            rounds_to_target=rounds_to_accuracy(res, target) if target is not None else None,
            cost_to_target=cost,
            normalized_cost=100.0 * (cost / base_cost) if cost is not None and base_cost else None,
            total_emissions=res.total_emissions,
            rounds=len(res.records),
            stop_reason=res.stop_reason,
        )
        rows.append(row)
    return rows


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[dict]:
    groups = [(k, s) for k in spec.knobs for s in spec.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_group, [spec] * len(groups), *zip(*groups)))
    else:
        chunks = [_run_group(spec, k, s) for k, s in groups]
    rows = [r for chunk in chunks for r in chunk]
    order = {p: i for i, p in enumerate(spec.policies)}
    rows.sort(key=lambda r: (r["knob"], r["seed"], order[r["policy"]]))
    return rows


def write_table(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({c: "" if row.get(c) is None else row.get(c) for c in TABLE_COLUMNS})


def cmd_sweep(args) -> int:
    spec = load_sweep(args.config, args.set)
    if args.out:
        spec = SweepSpec(spec.base, spec.policies, spec.knobs, spec.seeds, Path(args.out), spec.target)
    spec.output.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(spec, jobs=args.jobs)
    table = spec.output / "comparison.csv"
    write_table(rows, table)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} cells ({failed} failed) -> {table}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="costfl", description="Cost-aware federated learning simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run one experiment"),
        ("sweep", "run a policy x knob x seed comparison"),
        ("validate", "check a config and print it with defaults resolved"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML experiment (or sweep) file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a field, e.g. selection.seed=7")
        if name != "validate":
            p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./runs)")
            p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
