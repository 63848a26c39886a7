"""Fleet-wide hot loops: per-arrival server selection and fleet power totals.

Every kernel exists twice. The ``*_nb`` variant is an explicit loop compiled
with numba; the ``*_np`` variant is vectorised numpy. The unsuffixed public
name points at the numba loop unless ``GREENCORES_DISABLE_NUMBA`` is set.
Both variants return identical results, including tie-breaking (lowest
server index wins).

Fleet state is passed as parallel int64 arrays indexed by server position:
``m`` pinned cores, ``awake`` renewables-driven cores in the real-time
profile, ``r`` regular cores, ``n`` total cores.
"""
import math

import numpy as np

from ._accel import HAS_NUMBA, njit

_SQRT2 = math.sqrt(2.0)


@njit
def _choose_ideal_point_nb(m, awake, r, cores, tau_rnw, tau_sq):
    best = -1
    best_score = -1.0
    sqrt2 = math.sqrt(2.0)
    for i in range(m.shape[0]):
        if r[i] + awake[i] - m[i] < cores:
            continue
        g_used = m[i] - r[i]
        if g_used < 0:
            g_used = 0
        r_used = m[i] if m[i] < r[i] else r[i]
        rnw = 0.0
        if awake[i] > 0:
            rnw = abs(awake[i] - g_used) / awake[i]
        sq = 0.0
        if r[i] > 0:
            sq = abs(r[i] - r_used) / r[i]
        d = math.sqrt((tau_sq - sq) ** 2 + (tau_rnw - rnw) ** 2) / sqrt2
        score = 1.0 - d
        if score > best_score:
            best_score = score
            best = i
    return best


def _choose_ideal_point_np(m, awake, r, cores, tau_rnw, tau_sq):
    feasible = (r + awake - m) >= cores
    if not feasible.any():
        return -1
    g_used = np.maximum(m - r, 0)
    r_used = np.minimum(m, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        rnw = np.where(awake > 0, np.abs(awake - g_used) / np.where(awake > 0, awake, 1), 0.0)
        sq = np.where(r > 0, np.abs(r - r_used) / np.where(r > 0, r, 1), 0.0)
    d = np.sqrt((tau_sq - sq) ** 2 + (tau_rnw - rnw) ** 2) / _SQRT2
    score = np.where(feasible, 1.0 - d, -np.inf)
    return int(np.argmax(score))


@njit
def _choose_best_fit_nb(m, awake, r, cores, regular_only):
    best = -1
    best_free = 0
    for i in range(m.shape[0]):
        free_after = r[i] + awake[i] - m[i] - cores
        if free_after < 0:
            continue
        if regular_only and m[i] + cores > r[i]:
            continue
        if best < 0 or free_after < best_free:
            best = i
            best_free = free_after
    return best


def _choose_best_fit_np(m, awake, r, cores, regular_only):
    free_after = r + awake - m - cores
    feasible = free_after >= 0
    if regular_only:
        feasible &= (m + cores) <= r
    if not feasible.any():
        return -1
    big = np.iinfo(np.int64).max
    return int(np.argmin(np.where(feasible, free_after, big)))


@njit
def _choose_spread_regular_nb(m, r, cores):
    best = -1
    best_free = 0
    for i in range(m.shape[0]):
        free_after = r[i] - m[i] - cores
        if free_after < 0:
            continue
        if best < 0 or free_after > best_free:
            best = i
            best_free = free_after
    return best


def _choose_spread_regular_np(m, r, cores):
    free_after = r - m - cores
    feasible = free_after >= 0
    if not feasible.any():
        return -1
    return int(np.argmax(np.where(feasible, free_after, -1)))


@njit
def _fleet_harvest_power_nb(m, awake, n, r, p_pin, p_act, p_slp, f_slope, f_offset, p_grid):
    total = 0.0
    for i in range(m.shape[0]):
        slept = (n[i] - r[i]) - awake[i]
        cpu = m[i] * p_pin + slept * p_slp + (n[i] - m[i] - slept) * p_act
        excess = f_slope * cpu + f_offset - p_grid
        if excess > 0.0:
            total += excess
    return total


def _fleet_harvest_power_np(m, awake, n, r, p_pin, p_act, p_slp, f_slope, f_offset, p_grid):
    slept = (n - r) - awake
    cpu = m * p_pin + slept * p_slp + (n - m - slept) * p_act
    excess = f_slope * cpu + f_offset - p_grid
    return float(excess[excess > 0.0].sum())


@njit
def _fleet_green_used_nb(m, r):
    total = 0
    for i in range(m.shape[0]):
        if m[i] > r[i]:
            total += m[i] - r[i]
    return total


def _fleet_green_used_np(m, r):
    return int(np.maximum(m - r, 0).sum())


if HAS_NUMBA:
    choose_ideal_point = _choose_ideal_point_nb
    choose_best_fit = _choose_best_fit_nb
    choose_spread_regular = _choose_spread_regular_nb
    fleet_harvest_power = _fleet_harvest_power_nb
    fleet_green_used = _fleet_green_used_nb
else:
    choose_ideal_point = _choose_ideal_point_np
    choose_best_fit = _choose_best_fit_np
    choose_spread_regular = _choose_spread_regular_np
    fleet_harvest_power = _fleet_harvest_power_np
    fleet_green_used = _fleet_green_used_np

BACKEND = "numba" if HAS_NUMBA else "numpy"
