"""Manhattan road grid, vehicle mobility, RSU sites and link blockage."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.special import ndtri

from .channel import LOS, NLOS
from .simcore import DeterministicGenerator, counter_uniform

SPEED_MIN = 8.0
SPEED_MAX = 14.0
RSU_ID_BASE = 1_000_000

Point = tuple[float, float]


@dataclass(frozen=True)
class RoadNetwork:
    """Axis-aligned street grid; road centre lines sit on multiples of ``block_size``.

    Each block is filled by one building set back ``road_width / 2`` from the
    surrounding centre lines.
    """

    block_size: float = 250.0
    n_blocks_x: int = 4
    n_blocks_y: int = 4
    road_width: float = 20.0
    buildings: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.block_size <= 0 or self.n_blocks_x < 1 or self.n_blocks_y < 1:
            raise ValueError("grid needs a positive block size and at least one block")
        if not 0 <= self.road_width < self.block_size:
            raise ValueError("road_width must be in [0, block_size)")
        h = self.road_width / 2.0
        rects = [
            (i * self.block_size + h, j * self.block_size + h,
             (i + 1) * self.block_size - h, (j + 1) * self.block_size - h)
            for j in range(self.n_blocks_y)
            for i in range(self.n_blocks_x)
        ]
        object.__setattr__(self, "buildings", np.array(rects, dtype=float))

    @property
    def nodes(self) -> list[tuple[int, int]]:
        return [(i, j) for j in range(self.n_blocks_y + 1) for i in range(self.n_blocks_x + 1)]

    @property
    def segments(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        segs = []
        for j in range(self.n_blocks_y + 1):
            for i in range(self.n_blocks_x):
                segs.append(((i, j), (i + 1, j)))
        for i in range(self.n_blocks_x + 1):
            for j in range(self.n_blocks_y):
                segs.append(((i, j), (i, j + 1)))
        return segs

    @property
    def total_length(self) -> float:
        return len(self.segments) * self.block_size

    def coord(self, node: tuple[int, int]) -> Point:
        return (node[0] * self.block_size, node[1] * self.block_size)

    def on_road(self, p, tol: float = 1e-6) -> bool:
        x, y = p
        bx, by = x / self.block_size, y / self.block_size
        in_x = -tol <= x <= self.n_blocks_x * self.block_size + tol
        in_y = -tol <= y <= self.n_blocks_y * self.block_size + tol
        on_vertical = abs(bx - round(bx)) * self.block_size <= tol and in_y and in_x
        on_horizontal = abs(by - round(by)) * self.block_size <= tol and in_x and in_y
        return on_vertical or on_horizontal

    def random_shortest_path(self, start, dest, rng: DeterministicGenerator) -> list[tuple[int, int]]:
        """Uniformly shuffled monotone staircase from ``start`` to ``dest``."""
        dx, dy = dest[0] - start[0], dest[1] - start[1]
        moves = [(int(math.copysign(1, dx)), 0)] * abs(dx) + [(0, int(math.copysign(1, dy)))] * abs(dy)
        path = [start]
        if moves:
            order = rng.permutation(len(moves))
            for k in order:
                i, j = path[-1]
                path.append((i + moves[k][0], j + moves[k][1]))
        return path

    def random_destination(self, rng: DeterministicGenerator) -> tuple[int, int]:
        nodes = self.nodes
        return nodes[rng.integers(len(nodes))]

    def node_at(self, p, tol: float = 1e-6):
        i, j = round(p[0] / self.block_size), round(p[1] / self.block_size)
        if abs(i * self.block_size - p[0]) <= tol and abs(j * self.block_size - p[1]) <= tol:
            return (int(i), int(j))
        return None


@njit(cache=True)
def _hit_kernel(a, b, rects):
    out = np.zeros(a.shape[0], dtype=np.bool_)
    for m in range(a.shape[0]):
        ax, ay = a[m, 0], a[m, 1]
        dx, dy = b[m, 0] - ax, b[m, 1] - ay
        for k in range(rects.shape[0]):
            x0, y0, x1, y1 = rects[k, 0], rects[k, 1], rects[k, 2], rects[k, 3]
            # clip the parameter range [0, 1] against both slabs
            enter, leave = 0.0, 1.0
            if dx == 0.0:
                if ax <= x0 or ax >= x1:
                    continue
            else:
                t1, t2 = (x0 - ax) / dx, (x1 - ax) / dx
                enter = max(enter, min(t1, t2))
                leave = min(leave, max(t1, t2))
            if dy == 0.0:
                if ay <= y0 or ay >= y1:
                    continue
            else:
                t1, t2 = (y0 - ay) / dy, (y1 - ay) / dy
                enter = max(enter, min(t1, t2))
                leave = min(leave, max(t1, t2))
            if enter < leave:
                out[m] = True
                break
    return out


def segments_hit_rects(a: np.ndarray, b: np.ndarray, rects: np.ndarray) -> np.ndarray:
    """True where the open segment a-b passes through the interior of any rectangle.

    Liang-Barsky clipping against every rectangle; ``a`` and ``b`` are (M, 2).
    Grazing contact along an edge or at a corner does not count as a hit.
    """
    a = np.ascontiguousarray(np.atleast_2d(a), dtype=float)
    b = np.ascontiguousarray(np.atleast_2d(b), dtype=float)
    rects = np.ascontiguousarray(rects, dtype=float).reshape(-1, 4)
    return _hit_kernel(a, b, rects)


def los_geometry(a, b, road: RoadNetwork) -> str:
    if a[0] == b[0] and a[1] == b[1]:
        return LOS
    hit = segments_hit_rects(np.array([a]), np.array([b]), road.buildings)[0]
    return NLOS if hit else LOS


def los_geometry_many(a: np.ndarray, b: np.ndarray, road: RoadNetwork) -> np.ndarray:
    """Vectorised ``los_geometry``; returns a boolean LOS mask."""
    return ~segments_hit_rects(a, b, road.buildings)


@dataclass(frozen=True)
class VehicleState:
    id: int
    position: Point
    speed: float
    planned_path: tuple[Point, ...]
    heading: Point


@dataclass(frozen=True)
class RsuSite:
    id: int
    position: Point
    capacity: float = 10

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError("capacity must be >= 0")


def place_rsus(road: RoadNetwork, capacity: float = 10) -> list[RsuSite]:
    """One RSU per intersection, ids from ``RSU_ID_BASE``."""
    return [RsuSite(RSU_ID_BASE + k, road.coord(node), capacity) for k, node in enumerate(road.nodes)]


def _unit(dx: float, dy: float) -> Point:
    n = math.hypot(dx, dy)
    return (dx / n, dy / n) if n > 0 else (0.0, 0.0)


def spawn_vehicles(road: RoadNetwork, density: float, rng: DeterministicGenerator) -> list[VehicleState]:
    """Poisson number of vehicles (mean ``density`` per km of road), uniform on roads."""
    if density < 0:
        raise ValueError("density must be >= 0")
    n = rng.poisson(density * road.total_length / 1000.0)
    segs = road.segments
    vehicles = []
    for vid in range(n):
        u, v = segs[rng.integers(len(segs))]
        frac = rng.random()
        pu, pv = road.coord(u), road.coord(v)
        pos = (pu[0] + frac * (pv[0] - pu[0]), pu[1] + frac * (pv[1] - pu[1]))
        nxt = v if rng.random() < 0.5 else u
        speed = rng.uniform(SPEED_MIN, SPEED_MAX)
        path = road.random_shortest_path(nxt, road.random_destination(rng), rng)
        waypoints = tuple(road.coord(p) for p in path)
        heading = _unit(waypoints[0][0] - pos[0], waypoints[0][1] - pos[1])
        vehicles.append(VehicleState(vid, pos, speed, waypoints, heading))
    return vehicles


def step_mobility(v: VehicleState, dt: float, road: RoadNetwork | None = None,
                  rng: DeterministicGenerator | None = None) -> VehicleState:
    """Advance ``speed * dt`` metres along the planned path, turning at waypoints.

    When the path runs out a new destination is drawn from ``rng``; without a
    road/rng pair (forecasting) the vehicle halts at its last waypoint.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    remaining = v.speed * dt
    if remaining == 0:
        return v
    x, y = v.position
    path = list(v.planned_path)
    heading = v.heading
    while remaining > 0:
        if not path:
            if road is None or rng is None:
                break
            here = road.node_at((x, y))
            route = road.random_shortest_path(here, road.random_destination(rng), rng)
            path = [road.coord(p) for p in route[1:]]
            if not path:
                continue
        tx, ty = path[0]
        dist = math.hypot(tx - x, ty - y)
        if dist > remaining:
            heading = _unit(tx - x, ty - y)
            x += heading[0] * remaining
            y += heading[1] * remaining
            remaining = 0.0
        else:
            if dist > 0:
                heading = _unit(tx - x, ty - y)
            x, y = tx, ty
            remaining -= dist
            path.pop(0)
    if path and (path[0][0], path[0][1]) != (x, y):
        heading = _unit(path[0][0] - x, path[0][1] - y)
    return replace(v, position=(x, y), planned_path=tuple(path), heading=heading)


def _z90() -> float:
    return float(ndtri(0.9))


@dataclass(frozen=True)
class BlockageProcess:
    """Alternating LOS/NLOS renewal process for dynamic blockers.

    Blocked intervals are lognormal with 80 % of the mass in
    ``[blocked_lo, blocked_hi]`` (median at their geometric mean); clear
    intervals are exponential.
    """

    clear_mean: float = 20.0
    blocked_lo: float = 3.0
    blocked_hi: float = 10.0

    def __post_init__(self):
        if self.clear_mean <= 0 or not 0 < self.blocked_lo < self.blocked_hi:
            raise ValueError("invalid blockage parameters")

    @property
    def blocked_median(self) -> float:
        return math.sqrt(self.blocked_lo * self.blocked_hi)

    @property
    def blocked_sigma(self) -> float:
        return math.log(self.blocked_hi / self.blocked_lo) / (2.0 * _z90())

    @property
    def blocked_mean(self) -> float:
        return self.blocked_median * math.exp(self.blocked_sigma ** 2 / 2.0)

    def blocked_duration(self, u):
        return self.blocked_median * np.exp(self.blocked_sigma * ndtri(u))

    def clear_duration(self, u):
        return -self.clear_mean * np.log(u)

    def duration(self, u, blocked):
        return np.where(blocked, self.blocked_duration(u), self.clear_duration(u))


BLOCKAGE_STREAM = "blockage"


def link_key(a: int, b: int) -> int:
    lo, hi = (a, b) if a <= b else (b, a)
    return (lo << 32) | hi


def link_keys(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    return (np.minimum(a, b) << np.uint64(32)) | np.maximum(a, b)


class BlockageField:
    """Renewal-process state for many links at once.

    Interval ``k`` of link ``key`` has length drawn from the counter-based
    uniform ``(key, k)``, so every link's trajectory is the same no matter
    which other links are tracked.  Even intervals are clear, odd ones
    blocked; every link starts clear at t = 0.  Queries must be
    non-decreasing in time.
    """

    def __init__(self, proc: BlockageProcess, seed: int, keys):
        self.proc = proc
        self.seed = seed
        self.keys = np.asarray(keys, dtype=np.uint64)
        self.counter = np.zeros(len(self.keys), dtype=np.uint64)
        u = counter_uniform(seed, BLOCKAGE_STREAM, self.keys, self.counter)
        self.next_switch = proc.clear_duration(u)
        self.blocked = np.zeros(len(self.keys), dtype=bool)
        self.t = 0.0
        self.blocked_ended = np.zeros(len(self.keys), dtype=bool)
        self._order = None

    def advance(self, t: float) -> np.ndarray:
        """Move to time ``t``; returns the blocked mask (right-continuous)."""
        if t < self.t:
            raise ValueError("blockage queries must be non-decreasing in time")
        self.t = t
        self.blocked_ended[:] = False
        idx = np.flatnonzero(self.next_switch <= t)
        while idx.size:
            self.blocked_ended[idx] |= self.blocked[idx]
            self.counter[idx] += np.uint64(1)
            self.blocked[idx] = ~self.blocked[idx]
            u = counter_uniform(self.seed, BLOCKAGE_STREAM, self.keys[idx], self.counter[idx])
            self.next_switch[idx] += self.proc.duration(u, self.blocked[idx])
            idx = idx[self.next_switch[idx] <= t]
        return self.blocked

    def track(self, keys) -> np.ndarray:
        """Indices of ``keys`` in the field, adding unseen links caught up to the current time."""
        keys = np.asarray(keys, dtype=np.uint64)
        if self._order is None:
            self._order = np.argsort(self.keys, kind="stable")
            self._sorted = self.keys[self._order]
        pos = np.minimum(np.searchsorted(self._sorted, keys), max(len(self._sorted) - 1, 0))
        known = self._sorted[pos] == keys if len(self._sorted) else np.zeros(len(keys), dtype=bool)
        new = np.unique(keys[~known])
        if new.size:
            t = self.t
            fresh = BlockageField(self.proc, self.seed, new)
            fresh.advance(t)
            fresh.blocked_ended[:] = False
            self.keys = np.concatenate([self.keys, fresh.keys])
            self.counter = np.concatenate([self.counter, fresh.counter])
            self.next_switch = np.concatenate([self.next_switch, fresh.next_switch])
            self.blocked = np.concatenate([self.blocked, fresh.blocked])
            self.blocked_ended = np.concatenate([self.blocked_ended, fresh.blocked_ended])
            self._order = None
        if self._order is None:
            self._order = np.argsort(self.keys, kind="stable")
            self._sorted = self.keys[self._order]
        return self._order[np.searchsorted(self._sorted, keys)]


def blocked_intervals(proc: BlockageProcess, seed: int, key: int, horizon: float) -> list[tuple[float, float]]:
    """All blocked ``[start, end)`` intervals of one link that begin before ``horizon``."""
    out = []
    t, k = 0.0, 0
    while t < horizon:
        u = float(counter_uniform(seed, BLOCKAGE_STREAM, key, k))
        d = float(proc.duration(u, k % 2 == 1))
        if k % 2 == 1:
            out.append((t, t + d))
        t += d
        k += 1
    return out


def sample_link_state(link: int, t: float, geometry: str, proc: BlockageProcess, seed: int) -> str:
    """LOS/NLOS of one link at time ``t``; geometric NLOS always wins."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if geometry == NLOS:
        return NLOS
    elapsed, k = 0.0, 0
    while True:
        u = float(counter_uniform(seed, BLOCKAGE_STREAM, link, k))
        elapsed += float(proc.duration(u, k % 2 == 1))
        if t < elapsed:
            return NLOS if k % 2 == 1 else LOS
        k += 1
