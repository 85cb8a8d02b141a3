"""Capacity-constrained RSU attachment.

The baseline follows the strongest in-range RSU and drops the CAV if that
RSU is already full.  The xApp solves, per epoch, for the largest number of
served CAVs and, among those, the smallest sum of squared
``assigned + forecast`` loads, as a rectangular assignment problem where
each RSU contributes one column per capacity slot with convex slot costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .scenario import RsuSite, VehicleState, step_mobility

UNSERVED = None
DEFAULT_HORIZON = 5
DEFAULT_FORECAST_WEIGHT = 1.0


@dataclass(frozen=True)
class AttachSnapshot:
    """Per (CAV, RSU) received power and in-range flags for one epoch."""

    cavs: tuple[int, ...]
    rsus: tuple[RsuSite, ...]
    power_dbm: np.ndarray
    in_range: np.ndarray


Assignment = dict  # CAV id -> RSU id or UNSERVED


def _capacity_slots(cap: float, n: int) -> int:
    return n if math.isinf(cap) else int(min(cap, n))


def baseline_assign(cavs: Sequence[int], rsus: Sequence[RsuSite], snap: AttachSnapshot) -> Assignment:
    """Max-received-power attachment with no fallback RSU."""
    row = {c: i for i, c in enumerate(snap.cavs)}
    load = [0] * len(rsus)
    out: Assignment = {}
    for c in sorted(cavs):
        i = row[c]
        if not snap.in_range[i].any():
            out[c] = UNSERVED
            continue
        power = np.where(snap.in_range[i], snap.power_dbm[i], -np.inf)
        r = int(np.argmax(power))
        if load[r] < rsus[r].capacity:
            load[r] += 1
            out[c] = rsus[r].id
        else:
            out[c] = UNSERVED
    return out


def forecast_load(vehicles: Sequence[VehicleState], rsus: Sequence[RsuSite], horizon: int,
                  epoch: float, in_range: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Predicted in-range CAV count per RSU (rows) for epochs 1..horizon (columns).

    Vehicles are advanced kinematically along their planned paths and stop
    at the final waypoint.  ``in_range`` maps an ``(m, 2)`` array of
    positions to an ``(m, len(rsus))`` boolean matrix.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    out = np.zeros((len(rsus), horizon))
    if not vehicles:
        return out
    states = list(vehicles)
    for h in range(horizon):
        states = [step_mobility(v, epoch) for v in states]
        pts = np.array([v.position for v in states], dtype=float)
        out[:, h] = np.asarray(in_range(pts), dtype=bool).sum(axis=0)
    return out


def xapp_assign(cavs: Sequence[int], rsus: Sequence[RsuSite], snap: AttachSnapshot,
                forecast: np.ndarray | None = None,
                weight: float = DEFAULT_FORECAST_WEIGHT) -> Assignment:
    """Max-service assignment with forecast-aware quadratic load balancing.

    Slot ``k`` of RSU ``r`` costs ``2k - 1 + 2 f_r``, the increment of
    ``(load + f_r)^2`` where ``f_r`` is ``weight`` times the mean forecast
    load.  Unserved columns cost more than any set of slot costs combined,
    so the number served is maximised first.  Exact ties go, in order, to the
    lower RSU id, to the stronger received power, and to giving lower CAV ids
    their strongest RSU.
    """
    cavs = sorted(cavs)
    n = len(cavs)
    if n == 0:
        return {}
    row = {c: i for i, c in enumerate(snap.cavs)}
    f = np.zeros(len(rsus)) if forecast is None else weight * np.asarray(forecast, dtype=float).mean(axis=1)
    cols_rsu, cols_cost = [], []
    for r, site in enumerate(rsus):
        for k in range(1, _capacity_slots(site.capacity, n) + 1):
            cols_rsu.append(r)
            cols_cost.append(2 * k - 1 + 2 * f[r] + 1e-7 * r)
    cols_rsu = np.array(cols_rsu, dtype=np.int64)
    cols_cost = np.array(cols_cost, dtype=float)
    rows_ = [row[c] for c in cavs]
    reach = snap.in_range[rows_]
    power = np.where(reach, snap.power_dbm[rows_], -np.inf)
    strongest = power.max(axis=1, initial=-np.inf)
    with np.errstate(invalid="ignore"):
        loss = np.where(reach, np.minimum(strongest[:, None] - power, 100.0), 0.0)
    not_best = (np.arange(len(rsus))[None, :] != np.argmax(power, axis=1)[:, None])
    tie = 1e-9 * loss + 1e-12 * (n - np.arange(n))[:, None] * not_best
    big = 10.0 * (n * (np.abs(cols_cost).max(initial=0.0) + 1.0) + 1.0)
    infeasible = 10.0 * big
    cost = np.full((n, len(cols_rsu) + n), big)
    if len(cols_rsu):
        cost[:, :len(cols_rsu)] = np.where(reach[:, cols_rsu], cols_cost[None, :] + tie[:, cols_rsu], infeasible)
    rows, cols = linear_sum_assignment(cost)
    out: Assignment = {}
    for i, j in zip(rows, cols):
        c = cavs[i]
        if j < len(cols_rsu) and cost[i, j] < big:
            out[c] = rsus[cols_rsu[j]].id
        else:
            out[c] = UNSERVED
    return out


def served(assignment: Assignment) -> int:
    return sum(1 for r in assignment.values() if r is not UNSERVED)


def rsu_loads(assignment: Assignment, rsus: Sequence[RsuSite]) -> np.ndarray:
    ids = {s.id: i for i, s in enumerate(rsus)}
    load = np.zeros(len(rsus), dtype=np.int64)
    for r in assignment.values():
        if r is not UNSERVED:
            load[ids[r]] += 1
    return load


def check_capacity(assignment: Assignment, rsus: Sequence[RsuSite]) -> bool:
    caps = np.array([s.capacity for s in rsus], dtype=float)
    return bool(np.all(rsu_loads(assignment, rsus) <= caps))


def lost_traffic(trace: Sequence[Assignment], rsus: Sequence[RsuSite], demand: float = 1.0) -> tuple[float, float]:
    """(percentage of demand left unserved, mean utilisation assigned/capacity).

    Utilisation averages over epochs and RSUs with finite positive capacity;
    it is 0 when no RSU has one.
    """
    total = demand * sum(len(a) for a in trace)
    if total <= 0:
        raise ValueError("total demand must be positive")
    lost = demand * sum(len(a) - served(a) for a in trace)
    caps = np.array([s.capacity for s in rsus], dtype=float)
    finite = np.isfinite(caps) & (caps > 0)
    util = [rsu_loads(a, rsus)[finite] / caps[finite] for a in trace] if finite.any() else []
    avg_load = float(np.mean(util)) if len(util) else 0.0
    return 100.0 * lost / total, avg_load
