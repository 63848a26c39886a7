"""Deterministic discrete-event simulation of a homogeneous server fleet.

Three event kinds drive the run. At equal timestamps supply changes go
first, then departures, then arrivals. Fleet state is piecewise constant
between events, so the harvest integrals are exact sums of
``value * interval``.
"""
from __future__ import annotations

import csv
import heapq
import json
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import kernels
from .packing import PolicyConfig, IdealPoint
from .power_model import PowerParams, default_params, solve_regular_core_count
from .server_state import Criticality, Server, VmRequest, awake_target, normalized_lifetime
from .traces import SupplyTrace, VmTrace, trace_hash

SUPPLY, DEPARTURE, ARRIVAL = 0, 1, 2

TIMESERIES_COLUMNS = ["time_s", "sum_cg_used", "sum_m", "sum_l", "fleet_power_w", "capacity_fraction"]


class ConfigError(ValueError):
    """Invalid simulator configuration."""


@dataclass(frozen=True)
class SimConfig:
    server_count: int = 50
    cores_per_server: int = 44
    renewables_core_count: int | None = 4
    power: PowerParams | None = None
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    supply_step: int = 900
    seed: int = 0
    redeploy_evicted: bool = False
    eviction_latency: int = 0
    duration_s: int | None = None

    def __post_init__(self):
        if self.server_count < 1:
            raise ConfigError(f"server_count must be >= 1, got {self.server_count}")
        if self.cores_per_server < 1:
            raise ConfigError(f"cores_per_server must be >= 1, got {self.cores_per_server}")
        if self.supply_step <= 0:
            raise ConfigError(f"supply_step must be > 0, got {self.supply_step}")
        if self.eviction_latency < 0:
            raise ConfigError(f"eviction_latency must be >= 0, got {self.eviction_latency}")
        if self.duration_s is not None and self.duration_s <= 0:
            raise ConfigError(f"duration_s must be > 0, got {self.duration_s}")
        rc = self.renewables_core_count
        if rc is not None and not 0 <= rc <= self.cores_per_server:
            raise ConfigError(f"renewables_core_count={rc} outside [0, {self.cores_per_server}]")
        if rc is None and self.power is None:
            raise ConfigError("need renewables_core_count or explicit power parameters with p_grid")

    def resolve(self) -> tuple[int, int, PowerParams]:
        """Return (n, r, params) with p_grid and r consistent with each other."""
        n = self.cores_per_server
        rc = self.renewables_core_count
        if self.power is None:
            return n, n - rc, default_params(n, n - rc)
        self.power.check_server(n)
        r = solve_regular_core_count(n, self.power)
        if rc is not None and r != n - rc:
            raise ConfigError(
                f"p_grid={self.power.p_grid} W fits {r} regular cores, but "
                f"renewables_core_count={rc} implies {n - rc}"
            )
        return n, r, self.power

    _POWER_KEYS = ("p_act", "p_slp", "p_pin", "p_grid", "u_rt", "f_slope", "f_offset")

    @classmethod
    def from_mapping(cls, data: dict) -> "SimConfig":
        data = dict(data)
        power_kw = {k: data.pop(k) for k in cls._POWER_KEYS if k in data}
        policy_kw = {}
        if "policy" in data:
            policy_kw["policy"] = data.pop("policy")
        for key in ("tau_critical", "tau_best_effort"):
            if key in data:
                v = data.pop(key)
                policy_kw[key] = IdealPoint(*map(float, v)) if isinstance(v, (list, tuple)) else IdealPoint.parse(v)
        known = {f.name for f in fields(cls)} - {"power", "policy"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            policy = PolicyConfig(**policy_kw)
            power = None
            if power_kw:
                base = default_params()
                if "p_grid" not in power_kw:
                    raise ConfigError("power parameters given without p_grid")
                merged = {f.name: getattr(base, f.name) for f in fields(PowerParams)}
                merged.update({k: float(v) for k, v in power_kw.items()})
                power = PowerParams(**merged)
                if "renewables_core_count" not in data:
                    data["renewables_core_count"] = None
            return cls(power=power, policy=policy, **data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "SimConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_mapping(data)

    def to_mapping(self) -> dict:
        n, r, params = self.resolve()
        out = {
            "server_count": self.server_count,
            "cores_per_server": n,
            "renewables_core_count": n - r,
            "supply_step": self.supply_step,
            "seed": self.seed,
            "redeploy_evicted": self.redeploy_evicted,
            "eviction_latency": self.eviction_latency,
            "duration_s": self.duration_s,
            "policy": self.policy.policy,
            "tau_critical": list(self.policy.tau_critical.as_tuple()),
            "tau_best_effort": list(self.policy.tau_best_effort.as_tuple()),
        }
        for k in self._POWER_KEYS:
            out[k] = getattr(params, k)
        return out


@dataclass
class SimReport:
    policy: str
    duration_s: int
    arrivals: int = 0
    placed: int = 0
    placement_failures: int = 0
    harvested_green_core_seconds: int = 0
    harvested_energy_joules: float = 0.0
    evictions: dict = field(default_factory=lambda: {c.value: 0 for c in Criticality})
    nlt_samples: list = field(default_factory=list)
    time_series: list = field(default_factory=list)
    trace_hash: str = ""
    event_log: list = field(default_factory=list, repr=False)

    @property
    def evictions_total(self) -> int:
        return sum(self.evictions.values())

    @property
    def eviction_rate(self) -> float:
        return self.evictions_total / self.arrivals if self.arrivals else 0.0

    def to_json(self) -> dict:
        return {
            "policy": self.policy,
            "duration_s": self.duration_s,
            "arrivals": self.arrivals,
            "placed": self.placed,
            "placement_failures": self.placement_failures,
            "harvested_green_core_seconds": self.harvested_green_core_seconds,
            "harvested_energy_joules": self.harvested_energy_joules,
            "evictions": dict(self.evictions),
            "evictions_total": self.evictions_total,
            "eviction_rate": self.eviction_rate,
            "nlt_samples": list(self.nlt_samples),
            "trace_hash": self.trace_hash,
        }

    def summary(self) -> str:
        return (
            f"{self.policy}: harvest={self.harvested_green_core_seconds} core-s "
            f"({self.harvested_energy_joules:.1f} J), evictions critical="
            f"{self.evictions['critical']} best-effort={self.evictions['best-effort']}, "
            f"failures={self.placement_failures}"
        )

    def write(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        write_timeseries(self.time_series, os.path.join(out_dir, "timeseries.csv"))


def write_timeseries(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMESERIES_COLUMNS)
        for row in rows:
            w.writerow(row)


def read_timeseries(path) -> list[tuple]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TIMESERIES_COLUMNS:
            raise ValueError(f"unexpected time-series header {header}")
        return [(int(a), int(b), int(c), int(d), float(e), float(f)) for a, b, c, d, e, f in reader]


def integrate_metrics(prev_time: int, now: int, green_used: int, harvest_power: float) -> tuple[int, float]:
    """Core-seconds and joules accrued over ``[prev_time, now)`` at constant state."""
    if now < prev_time:
        raise ValueError(f"time went backwards: {now} < {prev_time}")
    dt = now - prev_time
    return green_used * dt, harvest_power * dt


def record_eviction(report: SimReport, request: VmRequest, now: int) -> float:
    """Count an eviction and append its normalised lifetime."""
    assert now < request.departure_time, f"vm {request.vm_id} evicted at {now}, after departure"
    nlt = normalized_lifetime(request, now)
    report.evictions[request.criticality.value] += 1
    report.nlt_samples.append(nlt)
    return nlt


class Simulation:
    """One run over a fleet; construct, then call :meth:`run` once."""

    def __init__(self, cfg: SimConfig, vm_trace: VmTrace, supply: SupplyTrace, record_log: bool = False,
                 check_invariants: bool = False):
        self.cfg = cfg
        self.vm_trace = vm_trace
        self.supply = supply
        self.record_log = record_log
        self.check = check_invariants
        n, r, params = cfg.resolve()
        self.n, self.r, self.params = n, r, params
        count = cfg.server_count
        self.servers = [Server(i, n, r) for i in range(count)]
        self.m = np.zeros(count, dtype=np.int64)
        self.awake = np.zeros(count, dtype=np.int64)
        self.r_arr = np.full(count, r, dtype=np.int64)
        self.n_arr = np.full(count, n, dtype=np.int64)
        if cfg.duration_s is not None:
            self.horizon = cfg.duration_s
        else:
            last_supply = supply.points[-1][0] + cfg.supply_step if len(supply) else 0
            last_arrival = vm_trace.requests[-1].arrival_time + 1 if len(vm_trace) else 0
            self.horizon = max(last_supply, last_arrival, 1)
        self.report = SimReport(policy=cfg.policy.policy, duration_s=self.horizon,
                                trace_hash=trace_hash(vm_trace, supply))
        self._heap: list = []
        self._seq = 0
        self._where: dict[int, tuple[int, int]] = {}  # vm_id -> (server index, incarnation)
        self._original: dict[int, VmRequest] = {}
        self._fraction = 0.0
        self._green_used = 0
        self._harvest_w = 0.0
        self._power_dirty = False

    def _push(self, time, kind, payload):
        heapq.heappush(self._heap, (time, kind, self._seq, payload))
        self._seq += 1

    def _log(self, *entry):
        if self.record_log:
            self.report.event_log.append(entry)

    def _sync(self, i: int) -> None:
        s = self.servers[i]
        old = max(0, int(self.m[i]) - self.r)
        self.m[i] = s.m
        self.awake[i] = s.awake_green
        self._green_used += max(0, s.m - self.r) - old
        self._power_dirty = True

    def _harvest_power(self) -> float:
        if self._power_dirty:
            p = self.params
            self._harvest_w = kernels.fleet_harvest_power(
                self.m, self.awake, self.n_arr, self.r_arr,
                p.p_pin, p.p_act, p.p_slp, p.f_slope, p.f_offset, p.p_grid,
            )
            self._power_dirty = False
        return self._harvest_w

    def _fleet_power(self) -> float:
        p = self.params
        slept = (self.n_arr - self.r_arr) - self.awake
        cpu = self.m * p.p_pin + slept * p.p_slp + (self.n_arr - self.m - slept) * p.p_act
        return float((p.f_slope * cpu + p.f_offset).sum())

    def _choose(self, req: VmRequest) -> int:
        cfg = self.cfg.policy
        cores = req.core_count
        if cfg.policy == "proposed":
            tau = cfg.ideal_point(req)
            return int(kernels.choose_ideal_point(self.m, self.awake, self.r_arr, cores, tau.d_rnw, tau.d_sq))
        if cfg.policy == "crit-aware" and req.is_critical:
            idx = int(kernels.choose_spread_regular(self.m, self.r_arr, cores))
            if idx >= 0:
                return idx
        return int(kernels.choose_best_fit(self.m, self.awake, self.r_arr, cores, False))

    def _arrive(self, now: int, req: VmRequest, fresh: bool) -> None:
        if fresh:
            self.report.arrivals += 1
            self._original[req.vm_id] = req
        idx = self._choose(req)
        if idx < 0:
            self.report.placement_failures += 1
            self._log(now, "fail", req.vm_id, -1, req.core_count)
            return
        self.servers[idx].place_vm(req, now)
        self._sync(idx)
        self.report.placed += 1
        token = self._seq
        self._where[req.vm_id] = (idx, token)
        self._log(now, "place", req.vm_id, idx, req.core_count)
        if req.departure_time < self.horizon:
            self._push(req.departure_time, DEPARTURE, (req.vm_id, token))

    def _depart(self, now: int, vm_id: int, token: int) -> None:
        where = self._where.get(vm_id)
        if where is None or where[1] != token:
            return
        idx = where[0]
        cores = self.servers[idx].release_vm(vm_id, now)
        del self._where[vm_id]
        self._sync(idx)
        self._log(now, "release", vm_id, idx, cores)

    def _apply_supply(self, now: int, fraction: float) -> None:
        # a VM finishing at this instant leaves rather than counting as evicted
        for vm_id in [v for v in self._where if self._original[v].departure_time <= now]:
            self._depart(now, vm_id, self._where[vm_id][1])
        for i, server in enumerate(self.servers):
            result = server.apply_supply_signal(fraction, now)
            for ev in result.evicted:
                del self._where[ev.vm_id]
                original = self._original[ev.vm_id]
                record_eviction(self.report, original, now)
                self._log(now, "evict", ev.vm_id, i, ev.record.request.core_count)
                if self.cfg.redeploy_evicted:
                    remaining = original.departure_time - now
                    if remaining > 0:
                        again = replace(ev.record.request, arrival_time=now, lifetime=remaining)
                        self._push(now, ARRIVAL, (again, False))
            self._sync(i)
        self._log(now, "supply", fraction)

    def _supply_signal(self, now: int, fraction: float, deferred: bool) -> None:
        if not deferred:
            self._fraction = fraction
        else:
            fraction = self._fraction
        if (
            not deferred
            and self.cfg.eviction_latency > 0
            and any(awake_target(fraction, s.n_green) < s.awake_green for s in self.servers)
        ):
            self._push(now + self.cfg.eviction_latency, SUPPLY, (fraction, True))
        else:
            self._apply_supply(now, fraction)
        if not deferred:
            self.report.time_series.append((
                now, self._green_used, int(self.m.sum()),
                int(((self.n_arr - self.r_arr) - self.awake).sum()),
                self._fleet_power(), fraction,
            ))

    def _verify(self) -> None:
        live = 0
        for i, s in enumerate(self.servers):
            s.check_invariants()
            assert self.m[i] == s.m and self.awake[i] == s.awake_green, f"array drift on server {i}"
            live += s.m
        expect = sum(self.servers[i].vms[v].request.core_count for v, (i, _) in self._where.items())
        assert live == expect, f"conservation broken: {live} != {expect}"
        assert self._green_used == int(np.maximum(self.m - self.r_arr, 0).sum())

    def run(self) -> SimReport:
        for t, frac in self.supply.resample(self.cfg.supply_step, self.horizon):
            self._push(t, SUPPLY, (frac, False))
        for req in self.vm_trace:
            if req.arrival_time < self.horizon:
                self._push(req.arrival_time, ARRIVAL, (req, True))

        rep = self.report
        prev = 0
        while self._heap:
            now, kind, _, payload = heapq.heappop(self._heap)
            if now >= self.horizon:
                break
            cs, joules = integrate_metrics(prev, now, self._green_used, self._harvest_power())
            rep.harvested_green_core_seconds += cs
            rep.harvested_energy_joules += joules
            prev = now
            if kind == SUPPLY:
                self._supply_signal(now, *payload)
            elif kind == DEPARTURE:
                self._depart(now, *payload)
            else:
                self._arrive(now, *payload)
            if self.check:
                self._verify()
        cs, joules = integrate_metrics(prev, self.horizon, self._green_used, self._harvest_power())
        rep.harvested_green_core_seconds += cs
        rep.harvested_energy_joules += joules
        return rep


def run(cfg: SimConfig, vm_trace: VmTrace, supply: SupplyTrace, record_log: bool = False,
        check_invariants: bool = False) -> SimReport:
    return Simulation(cfg, vm_trace, supply, record_log=record_log, check_invariants=check_invariants).run()
