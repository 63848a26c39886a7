"""VM-arrival and renewable-supply traces: CSV I/O, normalisation, synthesis.

VM trace CSV columns: ``vm_id,arrival_s,lifetime_s,cores,criticality``.
Supply CSV columns: ``time_s,value`` for raw generation readings (normalised
on load) or ``time_s,fraction`` for capacity fractions already in [0, 1].
Times are integer seconds from simulation start.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .server_state import Criticality, VmRequest

VM_HEADER = ["vm_id", "arrival_s", "lifetime_s", "cores", "criticality"]


class TraceError(ValueError):
    """Malformed or inconsistent trace input."""


@dataclass(frozen=True)
class VmTrace:
    requests: tuple[VmRequest, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "requests", tuple(self.requests))
        seen = set()
        prev = None
        for req in self.requests:
            if req.vm_id in seen:
                raise TraceError(f"duplicate vm_id {req.vm_id}")
            seen.add(req.vm_id)
            if prev is not None and req.arrival_time < prev:
                raise TraceError(f"vm {req.vm_id}: arrival {req.arrival_time} before previous {prev}")
            prev = req.arrival_time

    def __len__(self):
        return len(self.requests)

    def __iter__(self):
        return iter(self.requests)

    @property
    def end_time(self) -> int:
        return max((r.departure_time for r in self.requests), default=0)


@dataclass(frozen=True)
class SupplyTrace:
    points: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        pts = tuple((int(t), float(v)) for t, v in self.points)
        object.__setattr__(self, "points", pts)
        prev = None
        for t, v in pts:
            if prev is not None and t < prev:
                raise TraceError(f"supply time {t} before previous {prev}")
            if not 0.0 <= v <= 1.0:
                raise TraceError(f"supply fraction {v} at t={t} outside [0, 1]")
            prev = t

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def value_at(self, t: int) -> float:
        """Zero-order hold; 0 before the first sample."""
        value = 0.0
        for ts, v in self.points:
            if ts > t:
                break
            value = v
        return value

    def resample(self, step: int, horizon: int) -> "SupplyTrace":
        """Held values at ``0, step, 2*step, ...`` strictly below ``horizon``."""
        if step <= 0:
            raise TraceError(f"supply step must be positive, got {step}")
        times = [p[0] for p in self.points]
        vals = [p[1] for p in self.points]
        out = []
        for t in range(0, max(horizon, 1), step):
            idx = np.searchsorted(times, t, side="right") - 1
            out.append((t, vals[idx] if idx >= 0 else 0.0))
        return SupplyTrace(tuple(out))


def _open_text(source):
    if hasattr(source, "read"):
        return source
    return open(source, newline="")


def _int_field(text: str, name: str, lineno: int) -> int:
    try:
        value = float(text)
    except ValueError:
        raise TraceError(f"line {lineno}: {name}={text!r} is not a number") from None
    if not math.isfinite(value) or value != int(value):
        raise TraceError(f"line {lineno}: {name}={text!r} is not an integer")
    return int(value)


def parse_vm_trace(source) -> VmTrace:
    """Read a VM trace from a path or an open file."""
    fh = _open_text(source)
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceError("vm trace is empty (missing header)")
        header = [h.strip() for h in header]
        if header != VM_HEADER:
            raise TraceError(f"vm trace header must be {','.join(VM_HEADER)}, got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(VM_HEADER):
                raise TraceError(f"line {lineno}: expected {len(VM_HEADER)} fields, got {len(row)}")
            vm_id = _int_field(row[0], "vm_id", lineno)
            arrival = _int_field(row[1], "arrival_s", lineno)
            lifetime = _int_field(row[2], "lifetime_s", lineno)
            cores = _int_field(row[3], "cores", lineno)
            crit = row[4].strip()
            try:
                crit = Criticality(crit)
            except ValueError:
                raise TraceError(f"line {lineno}: criticality must be critical or best-effort, got {crit!r}") from None
            try:
                rows.append(VmRequest(vm_id, cores, crit, arrival, lifetime))
            except ValueError as exc:
                raise TraceError(f"line {lineno}: {exc}") from None
            if arrival < 0:
                raise TraceError(f"line {lineno}: negative arrival_s {arrival}")
            if len(rows) > 1 and arrival < rows[-2].arrival_time:
                raise TraceError(f"line {lineno}: arrival_s {arrival} is earlier than the previous row")
    return VmTrace(tuple(rows))


def format_vm_trace(trace: VmTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VM_HEADER)
    for r in trace:
        w.writerow([r.vm_id, r.arrival_time, r.lifetime, r.core_count, r.criticality.value])
    return buf.getvalue()


def write_vm_trace(trace: VmTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_vm_trace(trace))


def normalize_supply(raw, n_green: int = 1) -> SupplyTrace:
    """Scale raw supply readings so the peak wakes all ``n_green`` cores (fraction 1)."""
    if n_green < 1:
        raise TraceError(f"n_green must be >= 1, got {n_green}")
    pts = [(int(t), float(v)) for t, v in raw]
    if not pts:
        raise TraceError("supply trace is empty")
    if any(v < 0 or not math.isfinite(v) for _, v in pts):
        raise TraceError("supply values must be finite and non-negative")
    peak = max(v for _, v in pts)
    if peak == 0:
        raise TraceError("supply trace is all zero; no renewable capacity to normalise")
    return SupplyTrace(tuple((t, v / peak) for t, v in pts))


def parse_supply_trace(source, n_green: int = 1) -> SupplyTrace:
    fh = _open_text(source)
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceError("supply trace is empty (missing header)")
        header = [h.strip() for h in header]
        if header not in (["time_s", "value"], ["time_s", "fraction"]):
            raise TraceError(f"supply header must be time_s,value or time_s,fraction, got {','.join(header)}")
        pts = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise TraceError(f"line {lineno}: expected 2 fields, got {len(row)}")
            t = _int_field(row[0], "time_s", lineno)
            try:
                v = float(row[1])
            except ValueError:
                raise TraceError(f"line {lineno}: {header[1]}={row[1]!r} is not a number") from None
            if pts and t < pts[-1][0]:
                raise TraceError(f"line {lineno}: time_s {t} is earlier than the previous row")
            pts.append((t, v))
    if header[1] == "value":
        return normalize_supply(pts, n_green)
    try:
        return SupplyTrace(tuple(pts))
    except TraceError as exc:
        raise TraceError(f"supply fractions: {exc}") from None


def format_supply_trace(trace: SupplyTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s", "fraction"])
    for t, v in trace:
        w.writerow([t, repr(v)])
    return buf.getvalue()


def write_supply_trace(trace: SupplyTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_supply_trace(trace))


def trace_hash(vm_trace: VmTrace, supply: SupplyTrace) -> str:
    h = hashlib.sha256()
    h.update(format_vm_trace(vm_trace).encode())
    h.update(format_supply_trace(supply).encode())
    return h.hexdigest()


@dataclass
class SynthSpec:
    """Parameters for a synthetic desk-scale workload and diurnal solar supply.

    Defaults: log-normal lifetimes (median 1 h, sigma 1.2), core counts drawn
    geometrically over 1/2/4/8 and solar following max(0, sin) with sunrise at
    06:00 and sunset at 18:00. These are synthetic choices, not measured data.
    """

    servers: int = 50
    duration_s: int = 86_400
    arrival_rate: float = 2_000 / 86_400
    lifetime_median_s: float = 3_600.0
    lifetime_sigma: float = 1.2
    core_choices: list[int] = field(default_factory=lambda: [1, 2, 4, 8])
    core_geometric_p: float = 0.5
    best_effort_share: float = 0.3
    sunrise_h: float = 6.0
    sunset_h: float = 18.0
    supply_step_s: int = 900

    def validate(self) -> None:
        if self.duration_s <= 0:
            raise TraceError("duration_s must be positive")
        if self.arrival_rate <= 0:
            raise TraceError("arrival_rate must be positive")
        if self.lifetime_median_s <= 0 or self.lifetime_sigma < 0:
            raise TraceError("lifetime median must be positive and sigma non-negative")
        if not self.core_choices or any(c < 1 for c in self.core_choices):
            raise TraceError("core_choices must be positive integers")
        if not 0 < self.core_geometric_p <= 1:
            raise TraceError("core_geometric_p must lie in (0, 1]")
        if not 0 <= self.best_effort_share <= 1:
            raise TraceError("best_effort_share must lie in [0, 1]")
        if not 0 <= self.sunrise_h < self.sunset_h <= 24:
            raise TraceError("need 0 <= sunrise_h < sunset_h <= 24")
        if self.supply_step_s <= 0:
            raise TraceError("supply_step_s must be positive")

    @classmethod
    def from_mapping(cls, data: dict) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise TraceError(f"unknown synth keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SynthSpec":
        with open(path) as fh:
            return cls.from_mapping(json.load(fh))

    def to_mapping(self) -> dict:
        return asdict(self)


def solar_fraction(t: int | np.ndarray, sunrise_h: float = 6.0, sunset_h: float = 18.0):
    """Diurnal max(0, sin) supply shape, 1.0 at solar noon, 0 at night."""
    hours = (np.asarray(t, dtype=float) / 3600.0) % 24.0
    phase = (hours - sunrise_h) / (sunset_h - sunrise_h)
    return np.where((phase > 0) & (phase < 1), np.sin(np.pi * np.clip(phase, 0, 1)), 0.0)


def synth_traces(spec: SynthSpec, seed: int) -> tuple[VmTrace, SupplyTrace]:
    spec.validate()
    rng = np.random.default_rng(seed)

    arrivals = []
    t = 0.0
    while True:
        t += rng.exponential(1.0 / spec.arrival_rate)
        if t >= spec.duration_s:
            break
        arrivals.append(int(t))
    count = len(arrivals)

    lifetimes = np.maximum(1, np.rint(rng.lognormal(math.log(spec.lifetime_median_s), spec.lifetime_sigma, count)))
    k = len(spec.core_choices)
    weights = spec.core_geometric_p * (1 - spec.core_geometric_p) ** np.arange(k)
    cores = rng.choice(np.asarray(spec.core_choices), size=count, p=weights / weights.sum())
    best_effort = rng.random(count) < spec.best_effort_share

    reqs = tuple(
        VmRequest(
            vm_id=i,
            core_count=int(cores[i]),
            criticality=Criticality.BEST_EFFORT if best_effort[i] else Criticality.CRITICAL,
            arrival_time=arrivals[i],
            lifetime=int(lifetimes[i]),
        )
        for i in range(count)
    )

    times = np.arange(0, spec.duration_s, spec.supply_step_s)
    # already a fraction of peak; a night-only window stays all zero
    frac = solar_fraction(times, spec.sunrise_h, spec.sunset_h)
    supply = SupplyTrace(tuple(zip(times.tolist(), frac.tolist())))
    return VmTrace(reqs), supply
