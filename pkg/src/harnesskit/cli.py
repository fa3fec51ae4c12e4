"""Command-line interface: run suites, diagnose logs, report metrics, evolve.

    harnesskit run --config cfg.yaml [--disable-layer action] [--out log.jsonl]
    harnesskit diagnose --log runs/episodes.jsonl
    harnesskit report --log runs/episodes.jsonl
    harnesskit evolve --config evolve.yaml [--registry dir]
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from harnesskit import diagnosis, evolution, metrics, persistence
from harnesskit.config import (
    EvolutionConfig,
    SuiteConfig,
    load_evolution_config,
    load_manifest,
    load_suite_config,
    split_hygiene_check,
)
from harnesskit.interventions import PASS_THROUGH, load_registry, load_set, save_set
from harnesskit.runner import run_suite

LAYER_CHOICES = ("contract", "skill", "action", "regulation")


class CliError(RuntimeError):
    pass


def cmd_run(
    config_path: str | Path,
    disable_layers: Sequence[str] = (),
    out: str | Path | None = None,
) -> Path:
    config: SuiteConfig = load_suite_config(config_path)
    split_hygiene_check(config.tasks)
    units = load_manifest(config.tasks, config.split)
    if not units:
        raise CliError(f"no tasks in split '{config.split}' of {config.tasks}")
    if config.intervention_set is None:
        intervention_set = PASS_THROUGH
    else:
        intervention_set = load_set(config.intervention_set)
    if config.split == "test" and not intervention_set.frozen:
        raise CliError(
            "refusing to evaluate a non-frozen intervention set on the test split; "
            "freeze it (evolve does this automatically) first"
        )
    disabled = tuple(disable_layers) + config.disable_layers
    rows = run_suite(
        units,
        config.policy,
        intervention_set,
        base_seed=config.seed,
        runs=config.runs,
        budget=config.budget,
        disabled_layers=frozenset(disabled),
        workers=config.workers,
    )
    out_path = Path(out) if out is not None else config.out
    persistence.write_log(rows, out_path)
    summary = metrics.summarize(rows)
    print(f"wrote {len(rows)} episodes to {out_path}")
    print(metrics.render_summary(summary))
    return out_path


def cmd_diagnose(log_path: str | Path) -> dict[str, dict[str, int]]:
    rows = persistence.read_log(log_path)
    reports = diagnosis.diagnose_rows(rows)
    if not reports:
        print("no failures to diagnose")
        return {}
    table = diagnosis.histogram(rows, reports)
    print(diagnosis.render_histogram(table))
    return table


def cmd_report(log_path: str | Path) -> dict:
    rows = persistence.read_log(log_path)
    if not rows:
        raise CliError(f"log {log_path} is empty")
    summary = metrics.summarize(rows)
    print(metrics.render_summary(summary))
    return summary


def cmd_evolve(
    config_path: str | Path, registry: str | Path | None = None
) -> tuple[Path, evolution.EvolutionReport]:
    config: EvolutionConfig = load_evolution_config(config_path)
    registry_dir = Path(registry) if registry is not None else config.registry
    candidates = load_registry(registry_dir)
    if not candidates:
        raise CliError(f"no candidate interventions in {registry_dir}")
    base = load_set(config.base_set) if config.base_set is not None else None
    units = []
    for manifest_path, family in config.train:
        split_hygiene_check(manifest_path)
        for unit in load_manifest(manifest_path, "train"):
            units.append(replace(unit, family=family) if family else unit)
    final, report = evolution.evolve(
        base,
        candidates,
        units,
        config.policy,
        seed=config.seed,
        budget=config.budget,
    )
    config.out.parent.mkdir(parents=True, exist_ok=True)
    save_set(final, config.out)
    print(evolution.render_report(report))
    print(f"wrote frozen set '{final.set_id}' v{final.version} to {config.out}")
    return config.out, report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harnesskit",
        description="Runtime harness for frozen text-emitting policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a task suite and write an episode log")
    run_p.add_argument("--config", required=True, help="suite config YAML")
    run_p.add_argument(
        "--disable-layer",
        action="append",
        default=[],
        choices=LAYER_CHOICES,
        help="ablate one harness layer (repeatable)",
    )
    run_p.add_argument("--out", default=None, help="override the log path")

    diag_p = sub.add_parser("diagnose", help="classify failures in an episode log")
    diag_p.add_argument("--log", required=True)

    rep_p = sub.add_parser("report", help="aggregate metrics over an episode log")
    rep_p.add_argument("--log", required=True)

    evo_p = sub.add_parser("evolve", help="grow an intervention set on a train split")
    evo_p.add_argument("--config", required=True, help="evolution config YAML")
    evo_p.add_argument("--registry", default=None, help="override the candidate directory")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cmd_run(args.config, args.disable_layer, args.out)
        elif args.command == "diagnose":
            cmd_diagnose(args.log)
        elif args.command == "report":
            cmd_report(args.log)
        else:
            cmd_evolve(args.config, args.registry)
    except (CliError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
