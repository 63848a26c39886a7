"""Per-server VM execution model.

A server has ``r`` regular cores that stay in the real-time profile and
``n - r`` renewables-driven cores whose awake count follows the renewable
supply. VMs are pinned statically at placement: regular cores first, then
awake renewables-driven ("green") cores. When supply drops below the number
of pinned green cores, VMs are evicted (best-effort before critical) and only
then are the freed cores put to sleep.

Cores are fungible within a class, so only counts are tracked.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field


class Criticality(str, enum.Enum):
    CRITICAL = "critical"
    BEST_EFFORT = "best-effort"


class CapacityError(ValueError):
    """The server lacks free awake cores for the requested VM."""


@dataclass(frozen=True)
class VmRequest:
    vm_id: int
    core_count: int
    criticality: Criticality
    arrival_time: int
    lifetime: int

    def __post_init__(self):
        if self.core_count < 1:
            raise ValueError(f"vm {self.vm_id}: core_count must be >= 1, got {self.core_count}")
        if self.lifetime <= 0:
            raise ValueError(f"vm {self.vm_id}: lifetime must be > 0, got {self.lifetime}")
        if not isinstance(self.criticality, Criticality):
            object.__setattr__(self, "criticality", Criticality(self.criticality))

    @property
    def departure_time(self) -> int:
        return self.arrival_time + self.lifetime

    @property
    def is_critical(self) -> bool:
        return self.criticality is Criticality.CRITICAL


@dataclass(frozen=True)
class VmRecord:
    request: VmRequest
    server_id: int
    pinned_green: int
    pinned_regular: int
    placed_at: int

    @property
    def vm_id(self) -> int:
        return self.request.vm_id


@dataclass(frozen=True)
class GreenCoreInventory:
    c_g_active: int
    c_g_used: int
    c_r_active: int
    c_r_used: int

    @property
    def free(self) -> int:
        return (self.c_g_active + self.c_r_active) - (self.c_g_used + self.c_r_used)


@dataclass(frozen=True)
class EvictedVm:
    vm_id: int
    criticality: Criticality
    nlt: float
    record: VmRecord


@dataclass
class EvictionReport:
    trigger_time: int
    evicted: list[EvictedVm] = field(default_factory=list)

    @property
    def cores_freed(self) -> int:
        return sum(e.record.request.core_count for e in self.evicted)


def normalized_lifetime(request: VmRequest, now: int) -> float:
    """Fraction of its intended lifetime a VM ran before ``now``, clamped to [0, 1]."""
    frac = (now - request.arrival_time) / request.lifetime
    return min(1.0, max(0.0, frac))


def awake_target(capacity_fraction: float, n_green: int) -> int:
    """Renewables-driven cores kept awake for a supply fraction (floored)."""
    if not 0.0 <= capacity_fraction <= 1.0:
        raise ValueError(f"capacity fraction must lie in [0, 1], got {capacity_fraction}")
    # tolerate representation error such as 0.3 * 10 == 2.9999999999999996
    return min(n_green, int(math.floor(capacity_fraction * n_green + 1e-9)))


def select_evictions(records, green_pin_excess: int) -> list[int]:
    """Fewest evictions covering ``green_pin_excess`` pinned green cores.

    Lexicographic objective: fewest critical VMs, then fewest best-effort VMs.
    Within a class VMs go largest green pinning first, ties by smaller id.
    Only VMs holding green cores are candidates.
    """
    if green_pin_excess <= 0:
        return []
    key = lambda rec: (-rec.pinned_green, rec.vm_id)
    best_effort = sorted((x for x in records if x.pinned_green > 0 and not x.request.is_critical), key=key)
    critical = sorted((x for x in records if x.pinned_green > 0 and x.request.is_critical), key=key)

    be_total = sum(x.pinned_green for x in best_effort)
    chosen_critical = []
    covered = be_total
    for rec in critical:
        if covered >= green_pin_excess:
            break
        chosen_critical.append(rec)
        covered += rec.pinned_green

    need = green_pin_excess - sum(x.pinned_green for x in chosen_critical)
    chosen = []
    for rec in best_effort:
        if need <= 0:
            break
        chosen.append(rec)
        need -= rec.pinned_green
    return [x.vm_id for x in chosen] + [x.vm_id for x in chosen_critical]


class Server:
    """Mutable core accounting for one host."""

    def __init__(self, server_id: int, n: int, r: int, awake_green: int = 0):
        if not 0 <= r <= n:
            raise ValueError(f"regular cores r={r} outside [0, {n}]")
        if not 0 <= awake_green <= n - r:
            raise ValueError(f"awake_green={awake_green} outside [0, {n - r}]")
        self.server_id = server_id
        self.n = n
        self.r = r
        self.awake_green = awake_green
        self.pinned_regular = 0
        self.pinned_green = 0
        self.vms: dict[int, VmRecord] = {}

    def __repr__(self):
        return (
            f"Server(id={self.server_id}, n={self.n}, r={self.r}, awake_green={self.awake_green}, "
            f"m={self.m}, vms={len(self.vms)})"
        )

    @property
    def n_green(self) -> int:
        return self.n - self.r

    @property
    def m(self) -> int:
        return self.pinned_regular + self.pinned_green

    @property
    def l(self) -> int:
        return self.n_green - self.awake_green

    @property
    def free_regular(self) -> int:
        return self.r - self.pinned_regular

    @property
    def free_green(self) -> int:
        return self.awake_green - self.pinned_green

    @property
    def free_cores(self) -> int:
        return self.free_regular + self.free_green

    def inventory(self) -> GreenCoreInventory:
        m = self.m
        return GreenCoreInventory(
            c_g_active=self.awake_green,
            c_g_used=max(0, m - self.r),
            c_r_active=self.r,
            c_r_used=min(m, self.r),
        )

    def place_vm(self, req: VmRequest, now: int) -> VmRecord:
        if req.vm_id in self.vms:
            raise ValueError(f"vm {req.vm_id} already placed on server {self.server_id}")
        if self.free_cores < req.core_count:
            raise CapacityError(
                f"server {self.server_id} has {self.free_cores} free awake cores, "
                f"vm {req.vm_id} needs {req.core_count}"
            )
        regular = min(self.free_regular, req.core_count)
        green = req.core_count - regular
        rec = VmRecord(req, self.server_id, pinned_green=green, pinned_regular=regular, placed_at=now)
        self.pinned_regular += regular
        self.pinned_green += green
        self.vms[req.vm_id] = rec
        return rec

    def release_vm(self, vm_id: int, now: int | None = None) -> int:
        try:
            rec = self.vms.pop(vm_id)
        except KeyError:
            raise KeyError(f"vm {vm_id} is not placed on server {self.server_id}") from None
        self.pinned_regular -= rec.pinned_regular
        self.pinned_green -= rec.pinned_green
        return rec.request.core_count

    def select_evictions(self, green_pin_excess: int) -> list[int]:
        return select_evictions(self.vms.values(), green_pin_excess)

    def apply_supply_signal(self, capacity_fraction: float, now: int) -> EvictionReport:
        """Move the awake renewables-driven count to the supply-proportional target.

        Evictions complete before any core is put to sleep; unpinned green
        cores are slept first.
        """
        target = awake_target(capacity_fraction, self.n_green)
        report = EvictionReport(trigger_time=now)
        if target >= self.awake_green:
            self.awake_green = target
            return report
        excess = self.pinned_green - target
        if excess > 0:
            for vm_id in self.select_evictions(excess):
                rec = self.vms[vm_id]
                self.release_vm(vm_id, now)
                report.evicted.append(
                    EvictedVm(vm_id, rec.request.criticality, normalized_lifetime(rec.request, now), rec)
                )
        self.awake_green = target
        return report

    def check_invariants(self) -> None:
        assert 0 <= self.pinned_regular <= self.r, self
        assert 0 <= self.pinned_green <= self.awake_green <= self.n_green, self
        assert self.pinned_regular == sum(v.pinned_regular for v in self.vms.values()), self
        assert self.pinned_green == sum(v.pinned_green for v in self.vms.values()), self
        assert self.m == sum(v.request.core_count for v in self.vms.values()), self
