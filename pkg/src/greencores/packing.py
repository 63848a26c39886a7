"""Placement policies over Green Cores inventories.

``proposed`` ranks servers by closeness to a per-criticality ideal point in
the (d_rnw, d_sq) feature plane. ``best-fit`` packs tightest first.
``crit-aware`` spreads critical VMs over regular cores (most free regular
capacity first, never touching green cores while any server can take them)
and best-fits best-effort VMs.

These functions are the readable reference. The simulator uses the array
kernels in :mod:`greencores.kernels`, which must pick the same first server.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .server_state import GreenCoreInventory, VmRequest

POLICIES = ("proposed", "best-fit", "crit-aware")


@dataclass(frozen=True)
class IdealPoint:
    d_rnw: float
    d_sq: float

    def __post_init__(self):
        for name in ("d_rnw", "d_sq"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"ideal point {name}={v} outside [0, 1]")

    @classmethod
    def parse(cls, text: str) -> "IdealPoint":
        """Parse ``"a,b"`` as (d_rnw, d_sq)."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 2:
            raise ValueError(f"ideal point needs two comma-separated values, got {text!r}")
        return cls(float(parts[0]), float(parts[1]))

    def as_tuple(self) -> tuple[float, float]:
        return (self.d_rnw, self.d_sq)


DEFAULT_TAU_CRITICAL = IdealPoint(1.0, 0.5)
DEFAULT_TAU_BEST_EFFORT = IdealPoint(0.2, 0.0)


@dataclass(frozen=True)
class PolicyConfig:
    policy: str = "proposed"
    tau_critical: IdealPoint = field(default=DEFAULT_TAU_CRITICAL)
    tau_best_effort: IdealPoint = field(default=DEFAULT_TAU_BEST_EFFORT)

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {', '.join(POLICIES)}")

    def ideal_point(self, req: VmRequest) -> IdealPoint:
        return self.tau_critical if req.is_critical else self.tau_best_effort


@dataclass(frozen=True)
class ScoredServer:
    server_id: int
    score: float


def get_rnw(inv: GreenCoreInventory) -> float:
    if inv.c_g_active == 0:
        return 0.0
    return abs(inv.c_g_active - inv.c_g_used) / inv.c_g_active


def get_sq(inv: GreenCoreInventory) -> float:
    if inv.c_r_active == 0:
        return 0.0
    return abs(inv.c_r_active - inv.c_r_used) / inv.c_r_active


def get_distance(d_rnw: float, d_sq: float, tau: IdealPoint) -> float:
    """Euclidean distance to ``tau`` scaled by sqrt(2) into [0, 1]."""
    return math.sqrt((tau.d_sq - d_sq) ** 2 + (tau.d_rnw - d_rnw) ** 2) / math.sqrt(2.0)


def _best_fit_order(req, candidates):
    scored = []
    for sid, inv in candidates:
        total = inv.c_g_active + inv.c_r_active
        free_after = inv.free - req.core_count
        score = 1.0 - free_after / total if total > 0 else 1.0
        scored.append((free_after, sid, ScoredServer(sid, score)))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [s for _, _, s in scored]


def _spread_order(req, candidates):
    scored = []
    for sid, inv in candidates:
        free_after = inv.c_r_active - inv.c_r_used - req.core_count
        score = free_after / inv.c_r_active if inv.c_r_active > 0 else 0.0
        scored.append((-free_after, sid, ScoredServer(sid, score)))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [s for _, _, s in scored]


def get_placement_preferences(
    req: VmRequest, candidates: list[tuple[int, GreenCoreInventory]], cfg: PolicyConfig
) -> list[ScoredServer]:
    """Rank feasible candidate servers for ``req``, best first."""
    if not candidates:
        return []
    if cfg.policy == "proposed":
        tau = cfg.ideal_point(req)
        scored = [
            ScoredServer(sid, 1.0 - get_distance(get_rnw(inv), get_sq(inv), tau)) for sid, inv in candidates
        ]
        scored.sort(key=lambda s: (-s.score, s.server_id))
        return scored
    if cfg.policy == "best-fit":
        return _best_fit_order(req, candidates)
    # crit-aware
    if not req.is_critical:
        return _best_fit_order(req, candidates)
    safe = [(sid, inv) for sid, inv in candidates if inv.c_r_used + req.core_count <= inv.c_r_active]
    rest = [(sid, inv) for sid, inv in candidates if inv.c_r_used + req.core_count > inv.c_r_active]
    return _spread_order(req, safe) + _best_fit_order(req, rest)


def distance_l1(a: IdealPoint, b: IdealPoint) -> float:
    return abs(a.d_rnw - b.d_rnw) + abs(a.d_sq - b.d_sq)


def reposition_critical(
    tau_critical: IdealPoint, tau_best_effort: IdealPoint, distance: float
) -> IdealPoint:
    """Slide the critical ideal point along its line to the best-effort point.

    ``distance`` is the Manhattan separation between the two points after the
    move; the default points sit 1.30 apart. Raises ``ValueError`` if the
    result leaves the unit square.
    """
    base = distance_l1(tau_critical, tau_best_effort)
    if base == 0:
        raise ValueError("ideal points coincide; no direction to move along")
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    if math.isclose(distance, base, rel_tol=0.0, abs_tol=1e-12):
        return tau_critical
    t = distance / base
    d_rnw = tau_best_effort.d_rnw + t * (tau_critical.d_rnw - tau_best_effort.d_rnw)
    d_sq = tau_best_effort.d_sq + t * (tau_critical.d_sq - tau_best_effort.d_sq)
    eps = 1e-12
    if not (-eps <= d_rnw <= 1 + eps and -eps <= d_sq <= 1 + eps):
        raise ValueError(
            f"distance {distance} puts the critical ideal point at ({d_rnw:.4f}, {d_sq:.4f}), outside [0, 1]^2"
        )
    return IdealPoint(min(1.0, max(0.0, d_rnw)), min(1.0, max(0.0, d_sq)))
