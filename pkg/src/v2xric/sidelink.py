"""Sidelink resource grid: Mode-2 autonomous selection and PF grants.

A resource is one (slot, subchannel) cell of a scheduling period.  Batch
helpers work on ``(n_vehicles, n_resources)`` boolean masks with resource
index ``slot * subchannels + subchannel``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .simcore import DeterministicGenerator

PF_EPSILON = 1e-6
PF_SMOOTHING = 0.1
INTERFERENCE_RANGE_M = 150.0

Resource = tuple[int, int]


@dataclass(frozen=True)
class ResourceGrid:
    period_slots: int = 100
    subchannels: int = 4

    def __post_init__(self):
        if self.period_slots < 1 or self.subchannels < 1:
            raise ValueError("grid dimensions must be >= 1")

    @property
    def size(self) -> int:
        return self.period_slots * self.subchannels

    def resources(self) -> list[Resource]:
        return [(s, c) for s in range(self.period_slots) for c in range(self.subchannels)]

    def index(self, res: Resource) -> int:
        return res[0] * self.subchannels + res[1]

    def resource(self, idx: int) -> Resource:
        return divmod(idx, self.subchannels)


@dataclass(frozen=True)
class TxRequest:
    vehicle: int
    demand: int

    def __post_init__(self):
        if self.demand < 1:
            raise ValueError("demand must be >= 1")


@dataclass
class GrantTable:
    grants: dict[Resource, int] = field(default_factory=dict)
    avg_rate: dict[int, float] = field(default_factory=dict)

    def granted(self, vehicle: int) -> list[Resource]:
        return [r for r, v in self.grants.items() if v == vehicle]

    def counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for v in self.grants.values():
            out[v] = out.get(v, 0) + 1
        return out


def mode2_select(free, demand: int, rng: DeterministicGenerator) -> set:
    """Uniformly pick ``min(demand, |free|)`` distinct resources from ``free``."""
    pool = sorted(free)
    if not pool or demand <= 0:
        return set()
    picks = rng.sample(len(pool), demand)
    return {pool[i] for i in picks}


def mode2_select_batch(free: np.ndarray, demand, rng: DeterministicGenerator) -> np.ndarray:
    """Row-wise ``mode2_select`` on a free-resource mask."""
    n, size = free.shape
    demand = np.broadcast_to(np.asarray(demand, dtype=np.int64), (n,))
    sel = np.zeros_like(free, dtype=bool)
    if n == 0 or size == 0:
        return sel
    keys = rng.random((n, size))
    keys[~free] = 2.0
    dmax = int(min(max(demand.max(), 0), size))
    if dmax == 0:
        return sel
    # the dmax smallest keys per row, in key order
    part = np.argpartition(keys, dmax - 1, axis=1)[:, :dmax] if dmax < size else np.tile(np.arange(size), (n, 1))
    part_keys = np.take_along_axis(keys, part, axis=1)
    order = np.take_along_axis(part, np.argsort(part_keys, axis=1, kind="stable"), axis=1)
    take = np.minimum(demand, free.sum(axis=1))
    rank_ok = np.arange(dmax)[None, :] < take[:, None]
    rows = np.broadcast_to(np.arange(n)[:, None], (n, dmax))
    sel[rows[rank_ok], order[rank_ok]] = True
    return sel


def sense_busy(prev_selection: np.ndarray, interferers: np.ndarray) -> np.ndarray:
    """Resources each vehicle heard in use by in-range others last period."""
    return (interferers.astype(np.float32) @ prev_selection.astype(np.float32)) > 0


def detect_collisions(selections: dict[int, set], interference_pairs) -> set[tuple[int, Resource]]:
    """(vehicle, resource) transmissions that overlap an in-range transmitter."""
    pairs = {frozenset(p) for p in interference_pairs}
    hit: set[tuple[int, Resource]] = set()
    vids = sorted(selections)
    for i, a in enumerate(vids):
        for b in vids[i + 1:]:
            if frozenset((a, b)) not in pairs:
                continue
            for res in selections[a] & selections[b]:
                hit.add((a, res))
                hit.add((b, res))
    return hit


def collision_mask(selection: np.ndarray, interferers: np.ndarray) -> np.ndarray:
    """Batch ``detect_collisions``: ``interferers`` is the symmetric in-range matrix."""
    overlap = (interferers.astype(np.float32) @ selection.astype(np.float32)) > 0
    return selection & overlap


@njit(cache=True)
def _pf_kernel(inst, base, demand, n_resources, period_slots, smoothing):
    n = inst.shape[0]
    owner = np.full(n_resources, -1, dtype=np.int64)
    bits = np.zeros(n)
    remaining = demand.copy()
    for r in range(n_resources):
        best, best_m = -1, -np.inf
        for v in range(n):
            if remaining[v] <= 0:
                continue
            m = inst[v] / (base[v] + smoothing * bits[v] / period_slots)
            if m > best_m:
                best, best_m = v, m
        if best < 0:
            break
        owner[r] = best
        bits[best] += inst[best]
        remaining[best] -= 1
    return owner, bits


def pf_schedule(requests: list[TxRequest], inst_rate: dict[int, float],
                avg_rate: dict[int, float], grid: ResourceGrid,
                smoothing: float = PF_SMOOTHING) -> GrantTable:
    """Proportional-fair grants over one period.

    Resources are visited slot by slot; each goes to the unsatisfied
    requester with the largest ``inst_rate / running_avg`` (ties to the lower
    id), where ``running_avg`` is the EWMA the vehicle would reach if the
    period ended now.  The returned table carries the post-period EWMA.
    """
    for r in requests:
        if avg_rate.get(r.vehicle, PF_EPSILON) <= 0:
            raise ValueError("average rates must be positive")
    demand: dict[int, int] = {}
    for r in requests:
        demand[r.vehicle] = demand.get(r.vehicle, 0) + r.demand
    vids = sorted(demand)
    owner, avg = pf_schedule_batch(
        np.array([inst_rate.get(v, 0.0) for v in vids], dtype=float),
        np.array([avg_rate.get(v, PF_EPSILON) for v in vids], dtype=float),
        np.array([demand[v] for v in vids], dtype=np.int64), grid, smoothing)
    table = GrantTable()
    for idx in np.flatnonzero(owner >= 0):
        table.grants[grid.resource(int(idx))] = vids[owner[idx]]
    table.avg_rate = {v: float(avg[k]) for k, v in enumerate(vids)}
    return table


def pf_schedule_batch(inst: np.ndarray, avg: np.ndarray, demand: np.ndarray, grid: ResourceGrid,
                      smoothing: float = PF_SMOOTHING) -> tuple[np.ndarray, np.ndarray]:
    """Array form of ``pf_schedule`` for vehicles ``0..n-1`` (row order is the id order).

    Returns the owner row of every resource (-1 when unused) and the post-period EWMA.
    """
    if np.any(np.asarray(avg) <= 0):
        raise ValueError("average rates must be positive")
    base = (1.0 - smoothing) * np.asarray(avg, dtype=float)
    owner, bits = _pf_kernel(np.asarray(inst, dtype=float), base, np.asarray(demand, dtype=np.int64),
                             grid.size, grid.period_slots, smoothing)
    return owner, base + smoothing * bits / grid.period_slots


def owner_mask(owner: np.ndarray, n: int) -> np.ndarray:
    """Selection mask ``(n, resources)`` from a resource-owner vector."""
    mask = np.zeros((n, len(owner)), dtype=bool)
    used = owner >= 0
    mask[owner[used], np.flatnonzero(used)] = True
    return mask


def grant_mask(table: GrantTable, vehicles: list[int], grid: ResourceGrid) -> np.ndarray:
    row = {v: i for i, v in enumerate(vehicles)}
    mask = np.zeros((len(vehicles), grid.size), dtype=bool)
    for res, v in table.grants.items():
        mask[row[v], grid.index(res)] = True
    return mask


def resource_bits(se, bandwidth: float, subchannels: int, slot_duration: float):
    """Bits carried by one resource at spectral efficiency ``se``."""
    return np.asarray(se, dtype=float) * (bandwidth / subchannels) * slot_duration


def period_throughput(selection: np.ndarray, collided: np.ndarray, bits_per_resource) -> np.ndarray:
    """Delivered bits per vehicle; collided transmissions carry nothing."""
    ok = selection & ~collided
    return ok.sum(axis=1) * np.asarray(bits_per_resource, dtype=float)


def normalized_throughput(bits, grid: ResourceGrid, cap_bits_per_resource: float):
    """Delivered bits over what one vehicle owning the whole grid at the SE cap would get."""
    return np.asarray(bits, dtype=float) / (grid.size * cap_bits_per_resource)
