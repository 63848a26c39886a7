"""Command-line entry point: ``greencores {simulate,compare,sweep,gen-trace}``.

Precedence for every setting is flags > config file > built-in defaults.
Without ``--vm-trace``/``--supply-trace`` a synthetic desk-scale workload is
generated from ``--synth`` (or defaults) and the run seed.

Exit codes: 0 success, 1 validation error, 2 runtime assertion failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .engine import SimConfig, SimReport, run
from .packing import POLICIES, IdealPoint, PolicyConfig, reposition_critical
from .traces import (
    SynthSpec,
    parse_supply_trace,
    parse_vm_trace,
    synth_traces,
    write_supply_trace,
    write_vm_trace,
)

COMPARE_COLUMNS = ["policy", "normalized_harvest", "evictions_critical", "evictions_best_effort"]
SWEEP_COLUMNS = [
    "distance", "tau_critical_rnw", "tau_critical_sq", "harvest_core_s", "harvest_j",
    "evictions", "evictions_critical", "evictions_best_effort",
]


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _add_common(p: argparse.ArgumentParser, traces: bool = True) -> None:
    p.add_argument("--config", help="JSON config file with flat simulator keys")
    if traces:
        p.add_argument("--vm-trace", help="VM trace CSV (vm_id,arrival_s,lifetime_s,cores,criticality)")
        p.add_argument("--supply-trace", help="supply CSV (time_s,value or time_s,fraction)")
    p.add_argument("--synth", help="JSON synthetic-workload spec used when traces are not given")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--policy", choices=POLICIES)
    p.add_argument("--tau-critical", type=IdealPoint.parse, metavar="RNW,SQ")
    p.add_argument("--tau-best-effort", type=IdealPoint.parse, metavar="RNW,SQ")
    p.add_argument("--servers", type=int)
    p.add_argument("--duration-s", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="greencores", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation")
    _add_common(p)

    p = sub.add_parser("compare", help="run several policies on identical traces")
    _add_common(p)
    p.add_argument("--policies", default=",".join(POLICIES), help="comma-separated policy names")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("sweep", help="vary the distance between the two ideal points")
    _add_common(p)
    p.add_argument("--distances", required=True,
                   help="comma-separated Manhattan distances between the ideal points (default pair: 1.30)")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("gen-trace", help="write a synthetic VM trace and supply trace")
    _add_common(p, traces=False)
    return parser


def load_config(args) -> SimConfig:
    cfg = SimConfig.load(args.config) if args.config else SimConfig()
    policy = cfg.policy
    if getattr(args, "policy", None):
        policy = replace(policy, policy=args.policy)
    if args.tau_critical is not None:
        policy = replace(policy, tau_critical=args.tau_critical)
    if args.tau_best_effort is not None:
        policy = replace(policy, tau_best_effort=args.tau_best_effort)
    changes = {"policy": policy}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.servers is not None:
        changes["server_count"] = args.servers
    if args.duration_s is not None:
        changes["duration_s"] = args.duration_s
    return replace(cfg, **changes)


def _synth_spec(args, cfg: SimConfig) -> SynthSpec:
    spec = SynthSpec.load(args.synth) if args.synth else SynthSpec()
    if args.servers is not None:
        spec.servers = args.servers
    if cfg.duration_s is not None:
        spec.duration_s = cfg.duration_s
    return spec


def load_traces(args, cfg: SimConfig):
    vm_path = getattr(args, "vm_trace", None)
    supply_path = getattr(args, "supply_trace", None)
    if (vm_path is None) != (supply_path is None):
        raise UsageError("give both --vm-trace and --supply-trace, or neither")
    if vm_path is None:
        spec = _synth_spec(args, cfg)
        _progress(f"synthesising traces (seed={cfg.seed}, duration={spec.duration_s}s)")
        return synth_traces(spec, cfg.seed)
    for path in (vm_path, supply_path):
        if not os.path.isfile(path):
            raise UsageError(f"trace file not found: {path}")
    n, r, _ = cfg.resolve()
    return parse_vm_trace(vm_path), parse_supply_trace(supply_path, n_green=max(1, n - r))


@dataclass
class CompareReport:
    reports: dict

    @property
    def normalized_harvest(self) -> dict:
        peak = max(r.harvested_green_core_seconds for r in self.reports.values())
        if peak == 0:
            return {k: 0.0 for k in self.reports}
        return {k: r.harvested_green_core_seconds / peak for k, r in self.reports.items()}

    def to_json(self) -> dict:
        norm = self.normalized_harvest
        return {
            "policies": list(self.reports),
            "normalized_harvest": norm,
            "eviction_rates": {
                k: {
                    "critical": r.evictions["critical"] / r.arrivals if r.arrivals else 0.0,
                    "best-effort": r.evictions["best-effort"] / r.arrivals if r.arrivals else 0.0,
                    "total": r.eviction_rate,
                }
                for k, r in self.reports.items()
            },
            "reports": {k: r.to_json() for k, r in self.reports.items()},
        }

    def rows(self) -> list[list]:
        norm = self.normalized_harvest
        return [
            [k, norm[k], r.evictions["critical"], r.evictions["best-effort"]]
            for k, r in self.reports.items()
        ]


def _run_job(job) -> SimReport:
    cfg, vm, supply = job
    return run(cfg, vm, supply)


def _run_all(jobs, workers: int) -> list[SimReport]:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    vm, supply = load_traces(args, cfg)
    _progress(f"simulating {len(vm)} VMs on {cfg.server_count} servers ({cfg.policy.policy})")
    report = run(cfg, vm, supply)
    report.write(args.out)
    print(report.summary())
    return 0


def cmd_compare(args) -> int:
    names = [p.strip() for p in args.policies.split(",") if p.strip()]
    if len(names) < 2:
        raise UsageError("compare needs at least two policies")
    for name in names:
        if name not in POLICIES:
            raise UsageError(f"unknown policy {name!r}; expected one of {', '.join(POLICIES)}")
    if len(set(names)) != len(names):
        raise UsageError("duplicate policy names")
    cfg = load_config(args)
    vm, supply = load_traces(args, cfg)
    jobs = [(replace(cfg, policy=replace(cfg.policy, policy=name)), vm, supply) for name in names]
    reports = dict(zip(names, _run_all(jobs, args.jobs)))
    comp = CompareReport(reports)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "compare.json"), "w") as fh:
        json.dump(comp.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_csv(os.path.join(args.out, "compare.csv"), COMPARE_COLUMNS, comp.rows())
    for r in reports.values():
        print(r.summary())
    return 0


def parse_distances(text: str) -> list[float]:
    try:
        out = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --distances value {text!r}") from None
    if not out:
        raise UsageError("--distances is empty")
    return out


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    distances = parse_distances(args.distances)
    taus = []
    for d in distances:
        try:
            taus.append(reposition_critical(cfg.policy.tau_critical, cfg.policy.tau_best_effort, d))
        except ValueError as exc:
            raise UsageError(f"infeasible distance {d}: {exc}") from None
    vm, supply = load_traces(args, cfg)
    jobs = [
        (replace(cfg, policy=PolicyConfig("proposed", tau, cfg.policy.tau_best_effort)), vm, supply)
        for tau in taus
    ]
    reports = _run_all(jobs, args.jobs)
    rows = [
        [d, tau.d_rnw, tau.d_sq, r.harvested_green_core_seconds, r.harvested_energy_joules,
         r.evictions_total, r.evictions["critical"], r.evictions["best-effort"]]
        for d, tau, r in zip(distances, taus, reports)
    ]
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "sweep.csv"), SWEEP_COLUMNS, rows)
    for row in rows:
        print(f"distance={row[0]}: harvest={row[3]} core-s, evictions={row[5]}")
    return 0


def cmd_gen_trace(args) -> int:
    cfg = load_config(args)
    spec = _synth_spec(args, cfg)
    vm, supply = synth_traces(spec, cfg.seed)
    os.makedirs(args.out, exist_ok=True)
    write_vm_trace(vm, os.path.join(args.out, "vm_trace.csv"))
    write_supply_trace(supply, os.path.join(args.out, "supply.csv"))
    print(f"wrote {len(vm)} VMs and {len(supply)} supply points to {args.out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "gen-trace": cmd_gen_trace,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AssertionError as exc:
        print(f"internal assertion failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
