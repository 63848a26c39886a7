"""Carbon-aware VM packing over renewables-driven CPU cores.

Simulates servers whose renewables-driven cores sleep and wake with
renewable supply, pins VMs statically, evicts best-effort VMs before
critical ones when supply drops, and places VMs with an ideal-point policy
over the Green Cores inventory (plus best-fit and criticality-aware baselines).
"""
from .engine import SimConfig, SimReport, Simulation, run
from .packing import IdealPoint, PolicyConfig, get_placement_preferences
from .power_model import (
    PowerParams,
    instantaneous_harvest_power,
    leakage_power,
    server_power,
    solve_regular_core_count,
)
from .server_state import Criticality, GreenCoreInventory, Server, VmRecord, VmRequest
from .traces import SupplyTrace, SynthSpec, VmTrace, synth_traces

__version__ = "0.1.0"

__all__ = [
    "Criticality",
    "GreenCoreInventory",
    "IdealPoint",
    "PolicyConfig",
    "PowerParams",
    "Server",
    "SimConfig",
    "SimReport",
    "Simulation",
    "SupplyTrace",
    "SynthSpec",
    "VmRecord",
    "VmRequest",
    "VmTrace",
    "get_placement_preferences",
    "instantaneous_harvest_power",
    "leakage_power",
    "run",
    "server_power",
    "solve_regular_core_count",
    "synth_traces",
]
