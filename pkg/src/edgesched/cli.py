"""Command-line entry point: ``edgesched run|compare|tables|oracle-check|emit-fixtures``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .config import ENV_VAR, RunConfig, load_run_config
from .experiments import (BASELINES, MIGRATION_VARIANTS, QOS_VARIANTS, atomic_write, build_specs,
                          compare_manifest, figure_tables, long_table, run_outputs, run_specs,
                          spec_from_manifest, specs_from_compare_manifest, write_run, sha256, RunSpec)
from .fixtures import DEFAULT_CLUSTER, QOS_PRESETS, cluster_from_dict
from .checks import run_checks
from .simulator import SchedulerChoice
from .workload import MEAN_SWEEP, STD_SWEEP, Scenario, load_scenario

log = logging.getLogger("edgesched")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load_cluster_dict(path: Optional[str]) -> dict:
    if path is None:
        return json.loads(json.dumps(DEFAULT_CLUSTER))
    with open(path) as fh:
        data = yaml.safe_load(fh)
    cluster_from_dict(data)  # validate early
    return data


def _scenario(arg: str) -> Scenario:
    if Path(arg).exists():
        return load_scenario(arg)
    return Scenario.from_name(arg)


def _check_scheduler(name: str) -> str:
    try:
        SchedulerChoice.parse(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return name.lower()


def _check_presets(names: Sequence[str]) -> list[str]:
    for p in names:
        if p not in QOS_PRESETS:
            raise UsageError(f"unknown QoS preset {p!r}; expected one of {', '.join(QOS_PRESETS)}")
    return list(names)


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text())
        cluster, spec, cfg = spec_from_manifest(manifest)
        outputs = run_outputs(cluster, spec, cfg)
        for name, text in outputs.items():
            atomic_write(out / name, text)
        atomic_write(out / "manifest.json", Path(args.manifest).read_text())
        bad = [n for n, t in outputs.items() if manifest["outputs"].get(n) != sha256(t)]
        if bad:
            log.error("re-run differs from manifest in: %s", ", ".join(bad))
            return EXIT_FAIL
        log.info("re-run reproduces %s", ", ".join(sorted(outputs)))
        return EXIT_OK

    cfg = load_run_config(args.config)
    cluster = _load_cluster_dict(args.cluster)
    scheduler = _check_scheduler(args.scheduler or cfg.scheduler_kind)
    scenario = _scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    spec = RunSpec(scenario, scheduler, _check_presets([args.qos_preset])[0])
    write_run(out, cluster, spec, cfg)
    log.info("wrote %s", out)
    return EXIT_OK


def _compare_specs(args: argparse.Namespace) -> list[RunSpec]:
    scenarios: list[str | Scenario] = []
    if args.scenario:
        scenarios = [_scenario(s) for s in args.scenario]
    if args.grid in ("mean", "all"):
        scenarios += list(MEAN_SWEEP)
    if args.grid in ("std", "all"):
        scenarios += [s for s in STD_SWEEP if s not in scenarios]
    if not scenarios:
        raise UsageError("empty scenario grid: pass --grid or --scenario")
    if args.schedulers:
        schedulers = [_check_scheduler(s) for s in args.schedulers.split(",")]
    elif args.study == "migration":
        schedulers = list(MIGRATION_VARIANTS)
    elif args.study == "qos":
        schedulers = ["kubedsm"]
    else:
        schedulers = list(BASELINES)
    if args.qos_presets:
        presets = _check_presets(args.qos_presets.split(","))
    elif args.study == "qos":
        presets = list(QOS_VARIANTS)
    else:
        presets = ["Default"]
    seeds = range(args.seeds) if args.seed_list is None else [int(s) for s in args.seed_list.split(",")]
    return build_specs(scenarios, schedulers, seeds, presets)


def cmd_compare(args: argparse.Namespace) -> int:
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text())
        cluster, specs, cfg = specs_from_compare_manifest(manifest)
    else:
        cfg = load_run_config(args.config)
        cluster = _load_cluster_dict(args.cluster)
        specs = _compare_specs(args)
    results = run_specs(cluster, specs, cfg, args.jobs)
    failures = [r for r in results if r.error]
    for f in failures:
        log.error("run %s failed: %s", f.spec.key, f.error)
    outputs = {"long.csv": long_table(results)}
    outputs.update({f"tables/{k}": v for k, v in figure_tables(outputs["long.csv"]).items()})
    out = Path(args.out)
    for name, text in outputs.items():
        atomic_write(out / name, text)
    manifest = compare_manifest(cluster, specs, cfg, outputs, failures)
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("%d runs, %d failed; wrote %s", len(results), len(failures), out)
    if args.manifest:
        old = json.loads(Path(args.manifest).read_text())["outputs"]
        if old != manifest["outputs"]:
            log.error("re-run differs from manifest")
            return EXIT_FAIL
    return EXIT_FAIL if failures else EXIT_OK


def cmd_tables(args: argparse.Namespace) -> int:
    tables = figure_tables(Path(args.input).read_text())
    for name, text in tables.items():
        atomic_write(Path(args.out) / name, text)
    log.info("wrote %s", ", ".join(sorted(tables)))
    return EXIT_OK


def cmd_oracle_check(args: argparse.Namespace) -> int:
    rep = run_checks(args.instances, args.seed)
    print(f"match vs brute force: {rep.instances} instances, {rep.count_mismatches} count mismatches, "
          f"{rep.frag_mismatches} fragmentation mismatches (max error {rep.max_frag_error:.3g})")
    if rep.gaps:
        print(f"exact allocation: {rep.alloc_instances} instances, {rep.gap_violations} negative gaps, "
              f"mean QoS gap {sum(rep.gaps) / len(rep.gaps):.3f}, max {max(rep.gaps):.3f}")
    print(f"elapsed {rep.seconds:.1f}s")
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_emit_fixtures(args: argparse.Namespace) -> int:
    out = Path(args.out)
    atomic_write(out / "cluster.yaml", yaml.safe_dump(DEFAULT_CLUSTER, sort_keys=False))
    atomic_write(out / "run-config.yaml", yaml.safe_dump(RunConfig().to_dict(), sort_keys=False))
    for name in MEAN_SWEEP + tuple(s for s in STD_SWEEP if s not in MEAN_SWEEP):
        atomic_write(out / "scenarios" / f"{name}.yaml",
                     yaml.safe_dump(Scenario.from_name(name).to_dict(), sort_keys=False))
    log.info("wrote fixtures to %s", out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgesched", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--cluster", help="cluster YAML (default: built-in evaluation cluster)")
        sp.add_argument("--config", help=f"run-config YAML (default: ${ENV_VAR} or built-in defaults)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--manifest", help="re-run from a manifest and check outputs match it")

    run = sub.add_parser("run", help="simulate one scenario under one scheduler")
    common(run)
    run.add_argument("--scenario", default="1.5_0.4", help="scenario file or <mean>_<std> name")
    run.add_argument("--scheduler", help="kubedsm, bef, sef, cf, k8s or kubedsm-<variant>")
    run.add_argument("--seed", type=int)
    run.add_argument("--qos-preset", default="Default", help=", ".join(QOS_PRESETS))
    run.set_defaults(func=cmd_run)

    cmp = sub.add_parser("compare", help="paired-seed comparison over a scenario grid")
    common(cmp)
    cmp.add_argument("--grid", choices=("mean", "std", "all", "none"), default="none")
    cmp.add_argument("--scenario", action="append", help="extra scenario file or name (repeatable)")
    cmp.add_argument("--study", choices=("baselines", "migration", "qos"), default="baselines",
                     help="default scheduler and preset set")
    cmp.add_argument("--schedulers", help="comma-separated scheduler names")
    cmp.add_argument("--qos-presets", help="comma-separated QoS presets")
    cmp.add_argument("--seeds", type=int, default=10, help="use seeds 0..N-1")
    cmp.add_argument("--seed-list", help="comma-separated explicit seeds")
    cmp.add_argument("--jobs", type=int, default=1)
    cmp.set_defaults(func=cmd_compare)

    tab = sub.add_parser("tables", help="per-figure tables from a long-format CSV")
    tab.add_argument("--in", dest="input", required=True)
    tab.add_argument("--out", required=True)
    tab.set_defaults(func=cmd_tables)

    orc = sub.add_parser("oracle-check", help="compare the heuristics with the exhaustive oracle")
    orc.add_argument("--instances", type=int, default=1000)
    orc.add_argument("--seed", type=int, default=0)
    orc.set_defaults(func=cmd_oracle_check)

    fix = sub.add_parser("emit-fixtures", help="write the default cluster, scenarios and run-config")
    fix.add_argument("--out", required=True)
    fix.set_defaults(func=cmd_emit_fixtures)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except (ValueError, KeyError, FileNotFoundError, yaml.YAMLError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
