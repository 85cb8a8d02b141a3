"""Relay selection on the thresholded V2V link graph.

Paths minimise hop count; among equal-hop paths the largest bottleneck
(minimum per-hop) SNR wins, then the lexicographically smallest node
sequence.  Breadth-first distances come from a compiled CSR kernel; the
bottleneck and tie-break passes run over the layered shortest-path DAG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .channel import LOS, LinkSnapshot
from .ric import COMMAND, DOWNLINK, REPORT, UPLINK, ControlMessage, ControlPlane

DIRECT_ONLY = "direct_only"
RELAYED = "relayed"


class LinkGraph:
    """Undirected SNR-weighted graph over sorted node labels."""

    def __init__(self, nodes: Iterable, u=(), v=(), snr=(), gamma_min: float = -math.inf):
        self.nodes = tuple(sorted(set(nodes)))
        self.index = {n: i for i, n in enumerate(self.nodes)}
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        if np.any(u == v):
            raise ValueError("self-loops are not allowed")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        self.u, self.v = lo, hi
        self.snr = np.asarray(snr, dtype=float)
        self.gamma_min = gamma_min
        self._csr = None
        self._sorted_keys = None

    @classmethod
    def from_edges(cls, nodes: Iterable, edges: dict, gamma_min: float = -math.inf) -> "LinkGraph":
        """Build from ``{(a, b): snr_db}`` with node labels."""
        g = cls(nodes)
        items = sorted(edges.items(), key=lambda kv: tuple(sorted((g.index[kv[0][0]], g.index[kv[0][1]]))))
        u = [g.index[a] for (a, _), _ in items]
        v = [g.index[b] for (_, b), _ in items]
        return cls(g.nodes, u, v, [w for _, w in items], gamma_min)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def csr(self) -> csr_matrix:
        if self._csr is None:
            m = len(self.u)
            rows = np.concatenate([self.u, self.v])
            cols = np.concatenate([self.v, self.u])
            eid = np.concatenate([np.arange(m), np.arange(m)]) + 1
            self._csr = csr_matrix((eid.astype(float), (rows, cols)), shape=(self.n, self.n))
        return self._csr

    def edges(self) -> list[tuple[object, object, float]]:
        return [(self.nodes[a], self.nodes[b], float(w)) for a, b, w in zip(self.u, self.v, self.snr)]

    def has_edge(self, a, b) -> bool:
        i, j = self.index[a], self.index[b]
        lo, hi = min(i, j), max(i, j)
        return bool(np.any((self.u == lo) & (self.v == hi)))

    def edge_keys(self) -> np.ndarray:
        return self.u * self.n + self.v

    def has_edges(self, a, b) -> np.ndarray:
        """Vectorised ``has_edge`` on node indices."""
        if self._sorted_keys is None:
            self._sorted_keys = np.sort(self.edge_keys())
        a, b = np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)
        q = np.minimum(a, b) * self.n + np.maximum(a, b)
        if not len(self._sorted_keys):
            return np.zeros(q.shape, dtype=bool)
        pos = np.minimum(np.searchsorted(self._sorted_keys, q), len(self._sorted_keys) - 1)
        return self._sorted_keys[pos] == q

    def hop_distances(self, sources) -> np.ndarray:
        """BFS hop counts from each source index (inf where unreachable).

        A scalar source gives a 1-D array, a sequence a ``(len, n)`` array.
        """
        csr = self.csr
        src = np.atleast_1d(np.asarray(sources, dtype=np.int64))
        out = _bfs_kernel(csr.indptr.astype(np.int64), csr.indices.astype(np.int64), src, self.n)
        return out[0] if np.ndim(sources) == 0 else out

    def components(self) -> np.ndarray:
        return connected_components(self.csr, directed=False)[1]


@njit(cache=True)
def _bfs_kernel(indptr, indices, sources, n):
    out = np.full((sources.shape[0], n), np.inf)
    queue = np.empty(n, dtype=np.int64)
    for k in range(sources.shape[0]):
        s = sources[k]
        out[k, s] = 0.0
        head, tail = 0, 1
        queue[0] = s
        while head < tail:
            u = queue[head]
            head += 1
            du = out[k, u] + 1.0
            for e in range(indptr[u], indptr[u + 1]):
                w = indices[e]
                if out[k, w] == np.inf:
                    out[k, w] = du
                    queue[tail] = w
                    tail += 1
    return out


@dataclass(frozen=True)
class PathResult:
    nodes: tuple
    bottleneck_snr_db: float

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1


@dataclass(frozen=True)
class ConnectivityStats:
    connectivity_fraction: float
    avg_hops: float


def build_graph(snapshots: Sequence[LinkSnapshot], gamma_min: float, nodes: Iterable = ()) -> LinkGraph:
    """Edge iff the link is LOS now and its SNR reaches ``gamma_min``."""
    labels = set(nodes)
    edges = {}
    for s in snapshots:
        labels.update((s.a, s.b))
        if s.a == s.b:
            continue
        if s.state == LOS and s.snr_db >= gamma_min:
            edges[(s.a, s.b)] = s.snr_db
    return LinkGraph.from_edges(labels, edges, gamma_min)


def min_hop_path_idx(g: LinkGraph, s: int, t: int) -> tuple[list[int], float] | None:
    """``min_hop_path`` on node indices; returns (index path, bottleneck) or None."""
    if s == t:
        return [s], math.inf
    ds = g.hop_distances(s)
    if not np.isfinite(ds[t]):
        return None
    dt = g.hop_distances(t)
    depth = int(ds[t])
    on = np.isclose(ds + dt, depth)
    a, b, w = g.u, g.v, g.snr
    fwd = on[a] & on[b] & (ds[b] == ds[a] + 1)
    rev = on[a] & on[b] & (ds[a] == ds[b] + 1)
    src = np.concatenate([a[fwd], b[rev]])
    dst = np.concatenate([b[fwd], a[rev]])
    wt = np.concatenate([w[fwd], w[rev]])
    layer = ds[src].astype(np.int64)

    back = np.full(g.n, -np.inf)
    back[t] = np.inf
    for lvl in range(depth - 1, -1, -1):
        m = layer == lvl
        np.maximum.at(back, src[m], np.minimum(wt[m], back[dst[m]]))
    best = back[s]

    path = [s]
    cur = s
    while cur != t:
        m = (src == cur) & (np.minimum(wt, back[dst]) >= best)
        cur = int(dst[m].min())
        path.append(cur)
    return path, float(best)


def min_hop_path(g: LinkGraph, src, dst) -> PathResult | None:
    """Fewest-hop path, then largest bottleneck SNR, then smallest node sequence.

    Returns ``None`` when ``dst`` is unreachable.
    """
    found = min_hop_path_idx(g, g.index[src], g.index[dst])
    if found is None:
        return None
    path, bottleneck = found
    return PathResult(tuple(g.nodes[i] for i in path), bottleneck)


def connectivity_stats(trace: Sequence[LinkGraph], pairs: Sequence[tuple], mode: str) -> ConnectivityStats:
    """Share of pairs connected at every step, and mean hops over connected (pair, step)s.

    ``trace`` holds one graph per mobility step, already thresholded at the
    required SNR.  In ``direct_only`` mode only the direct edge counts and the
    mean hop count is 1.
    """
    if not pairs:
        raise ValueError("pairs must be non-empty")
    if mode not in (DIRECT_ONLY, RELAYED):
        raise ValueError(f"unknown mode {mode!r}")
    ok = np.ones(len(pairs), dtype=bool)
    hop_sum, hop_n = 0, 0
    for g in trace:
        if mode == DIRECT_ONLY:
            for k, (a, b) in enumerate(pairs):
                ok[k] &= g.has_edge(a, b)
            continue
        srcs = [g.index[a] for a, _ in pairs]
        dist = g.hop_distances(srcs)
        for k, (_, b) in enumerate(pairs):
            d = dist[k, g.index[b]]
            if np.isfinite(d):
                hop_sum += int(d)
                hop_n += 1
            else:
                ok[k] = False
    if mode == DIRECT_ONLY:
        return ConnectivityStats(float(ok.mean()), 1.0)
    return ConnectivityStats(float(ok.mean()), hop_sum / hop_n if hop_n else 0.0)


# -- event-driven relay xApp -------------------------------------------------


@dataclass(frozen=True)
class LinkFailure:
    pair: int


@dataclass(frozen=True)
class PathRequest:
    pair: int


@dataclass(frozen=True)
class PathCommand:
    pair: int
    path: tuple


class RelayXApp:
    """Recomputes relay paths on request from the latest graph snapshot.

    A CAV whose active path broke (or whose direct link came back while it
    was relaying) sends a link-failure report and a path request.  The xApp
    answers with one command per hop, computed on the graph reported at the
    request's state time.  Requests with no path stay pending and are retried
    against newer snapshots without further uplink traffic.
    """

    subscription = frozenset({"PathRequest"})

    def __init__(self, plane: ControlPlane, pairs: Sequence[tuple[int, int]]):
        self.plane = plane
        self.pairs = list(pairs)
        self.graphs: dict[float, LinkGraph] = {}
        self.pending: dict[int, float] = {}
        self.paths: list[PathResult] = []

    def publish(self, t: float, g: LinkGraph) -> None:
        self.graphs[t] = g
        # keep only snapshots a future decision may still need
        for old in [k for k in self.graphs if k < t - 1.0]:
            del self.graphs[old]

    def on_report(self, msg: ControlMessage, now: float) -> list[ControlMessage]:
        self.plane.ledger.events += 1
        return self._solve(msg.payload.pair, msg.state_time, now)

    def retry(self, state_time: float, now: float, only=None) -> list[ControlMessage]:
        """Re-solve pending requests on the snapshot at ``state_time`` (optionally a subset)."""
        cmds = []
        for pair in sorted(self.pending):
            if only is not None and pair not in only:
                continue
            cmds.extend(self._solve(pair, state_time, now))
        for cmd in cmds:
            self.plane._check_staleness(cmd)
            self.plane.send(cmd)
        return cmds

    def _solve(self, pair: int, state_time: float, now: float) -> list[ControlMessage]:
        g = self.graphs[state_time]
        a, b = self.pairs[pair]
        found = min_hop_path_idx(g, a, b)
        if found is None:
            self.pending[pair] = state_time
            return []
        self.pending.pop(pair, None)
        idx, bottleneck = found
        result = PathResult(tuple(idx), bottleneck)
        self.paths.append(result)
        self.plane.ledger.hops_total += result.hops
        return [
            ControlMessage(COMMAND, DOWNLINK, "ric", node, now,
                           payload=PathCommand(pair, result.nodes), state_time=state_time)
            for node in result.nodes[:-1]
        ]


def request_path(plane: ControlPlane, pair: int, src_node, t: float) -> None:
    """CAV side: link-failure report plus path request (two uplink messages)."""
    plane.send(ControlMessage(REPORT, UPLINK, src_node, "ric", t, payload=LinkFailure(pair), state_time=t))
    plane.send(ControlMessage(REPORT, UPLINK, src_node, "ric", t, payload=PathRequest(pair), state_time=t))

