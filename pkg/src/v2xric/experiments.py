"""Experiment drivers: paired xApp-versus-baseline runs and CSV output.

Every policy gets its own pass over a freshly generated environment.  The
environment hashes what it hands out (positions and the blockage states the
experiment consumes), and the drivers refuse to report a comparison whose
passes saw different traces.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .beam import (EL_SPAN, BeamCodebook, BeamTracker, best_panel, default_candidate_count, departure_angles,
                   relative_azimuth)
from .channel import LinkBudgetParams, link_snr_db, max_range_m, pathloss_db, spectral_efficiency
from .config import ExperimentConfig
from .relay import LinkGraph, RelayXApp, request_path
from .ric import (DOWNLINK, UPLINK, ControlPlane, InvariantViolation, LatencyModel, OverheadLedger,
                  rate_kbps)
from .rsu import (AttachSnapshot, baseline_assign, check_capacity, forecast_load, lost_traffic,
                  rsu_loads, served, xapp_assign)
from .scenario import (BlockageField, BlockageProcess, RoadNetwork, link_keys, los_geometry_many,
                       place_rsus, spawn_vehicles, step_mobility)
from .sidelink import (PF_EPSILON, ResourceGrid, collision_mask, mode2_select_batch, normalized_throughput,
                       owner_mask, period_throughput, pf_schedule_batch, resource_bits, sense_busy)
from .simcore import Clock, SimConfig, advance, rng_stream

CSV_COLUMNS = ("experiment", "sweep", "seed", "metric", "value", "units")
ANTENNA_HEIGHT = (1.5, 3.0)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    sweep: float
    seed: int | str
    metric: str
    value: float
    units: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise InvariantViolation("finite-metric", f"{self.metric} = {self.value}")


class Environment:
    """One seed's road grid, vehicles, blockage field and link budget."""

    def __init__(self, cfg: ExperimentConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.sim = SimConfig(seed, cfg.duration_s, cfg.mobility_step_s)
        self.road = RoadNetwork(cfg.block_size_m, cfg.grid_blocks, cfg.grid_blocks, cfg.road_width_m)
        self.params = LinkBudgetParams(cfg.carrier_ghz, cfg.eirp_dbm, cfg.bandwidth_hz, cfg.noise_figure_db)
        self.proc = BlockageProcess(cfg.blockage_clear_mean_s, cfg.blockage_min_s, cfg.blockage_max_s)
        self.vehicles = spawn_vehicles(self.road, cfg.density_veh_per_km, rng_stream(seed, "mobility"))
        self.blockage = BlockageField(self.proc, seed, [])
        self.clock = Clock(cfg.mobility_step_s)
        self._rngs: dict = {}
        self._hash = hashlib.sha256()
        self._positions = None
        self.note(self.positions)

    @property
    def n(self) -> int:
        return len(self.vehicles)

    @property
    def now(self) -> float:
        return self.clock.now

    @property
    def positions(self) -> np.ndarray:
        if self._positions is None:
            self._positions = np.array([v.position for v in self.vehicles], dtype=float).reshape(-1, 2)
        return self._positions

    @property
    def headings(self) -> np.ndarray:
        return np.array([v.heading for v in self.vehicles], dtype=float).reshape(-1, 2)

    @property
    def speeds(self) -> np.ndarray:
        return np.array([v.speed for v in self.vehicles], dtype=float)

    def advance(self) -> None:
        dt = self.sim.mobility_step
        self.vehicles = [step_mobility(v, dt, self.road, self._rng(v.id)) for v in self.vehicles]
        self._positions = None
        self.clock = advance(self.clock)
        self.blockage.advance(self.now)
        self.note(self.positions)

    def _rng(self, vid: int):
        if vid not in self._rngs:
            self._rngs[vid] = rng_stream(self.seed, f"mobility/{vid}")
        return self._rngs[vid]

    def v2v_links(self, i, j) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(distance, LOS now, SNR dB, blockage just ended) for vehicle index pairs."""
        i, j = np.asarray(i, dtype=np.int64), np.asarray(j, dtype=np.int64)
        pos = self.positions
        dist = np.hypot(*(pos[j] - pos[i]).T) if len(i) else np.zeros(0)
        geom = los_geometry_many(pos[i], pos[j], self.road)
        blocked = np.zeros(len(i), dtype=bool)
        ended = np.zeros(len(i), dtype=bool)
        if geom.any():
            idx = self.blockage.track(link_keys(i[geom], j[geom]))
            blocked[geom] = self.blockage.blocked[idx]
            ended[geom] = self.blockage.blocked_ended[idx]
        los = geom & ~blocked
        snr = link_snr_db(self.params, pathloss_db(dist, self.params.carrier_freq, los))
        return dist, los, np.atleast_1d(snr), ended

    def note(self, arr) -> None:
        self._hash.update(np.ascontiguousarray(arr).tobytes())

    def trace_hash(self) -> str:
        return self._hash.hexdigest()


def nearest_partner(pos: np.ndarray, idx) -> np.ndarray:
    """Nearest other vehicle for each index (lowest index on distance ties)."""
    idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
    diff = pos[None, :, :] - pos[idx][:, None, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    d[np.arange(len(idx)), idx] = np.inf
    return np.argmin(d, axis=1).astype(np.int64)


def _check_paired(name: str, hashes: list[str]) -> None:
    if len(set(hashes)) != 1:
        raise InvariantViolation("paired-trace", f"{name}: policies saw different environments")


# -- beam ---------------------------------------------------------------------


def _beam_pass(cfg: ExperimentConfig, seed: int, policy: str) -> tuple[dict, str]:
    env = Environment(cfg, seed)
    n_links = min(cfg.beam_links, env.n)
    if env.n < 2:
        raise InvariantViolation("beam-population", "fewer than two vehicles")
    tx = np.sort(rng_stream(seed, "beam/links").sample(env.n, n_links))
    rx = nearest_partner(env.positions, tx)
    heights = rng_stream(seed, "beam/antenna").uniform(*ANTENNA_HEIGHT, size=env.n)
    lane = cfg.road_width_m / 4.0
    slots = env.sim.slots_per_step
    lat = cfg.latency_s
    cards = [int(c) for c in cfg.sweep_values]
    trackers = {}
    for c in cards:
        cb = BeamCodebook.from_cardinality(c)
        k = cfg.beam_candidates or default_candidate_count(c)
        trackers[c] = [BeamTracker(cb, policy, k) for _ in tx]
    se_sum = {c: 0.0 for c in cards}
    se_n = {c: 0 for c in cards}
    ledgers = {c: OverheadLedger(window=cfg.duration_s, size_bits=cfg.message_bits) for c in cards}
    for _ in range(env.sim.n_steps):
        _, los, snr, ended = env.v2v_links(tx, rx)
        env.note(los)
        env.note(ended)
        pos, head, speed = env.positions, env.headings, env.speeds
        # antennas ride in the right-hand lane
        ant = pos + lane * np.stack([head[:, 1], -head[:, 0]], axis=1)
        stale = ant - (speed * lat)[:, None] * head
        for l, (a, b) in enumerate(zip(tx, rx)):
            dh = heights[b] - heights[a]
            true = reported = (0.0, 0.0)
            up = bool(los[l])
            if up:
                # the xApp picks the panel from reported positions, the baseline from the true geometry
                src = stale if policy == "xapp" else ant
                panel = best_panel(relative_azimuth(src[a], head[a], src[b]))
                true = departure_angles(ant[a], head[a], ant[b], dh, panel)
                reported = departure_angles(stale[a], head[a], stale[b], dh, panel)
                up = abs(true[1]) <= EL_SPAN[1]
            for c in cards:
                tr = trackers[c][l]
                before = tr.trainings
                g = tr.step(up, true, reported, bool(ended[l]), slots)
                if g is None:
                    continue
                if policy == "xapp" and tr.trainings > before:
                    ledgers[c].record(UPLINK)
                    ledgers[c].record(DOWNLINK)
                loss = tr.cb.peak_gain_db - g
                eff = spectral_efficiency(snr[l] - loss, env.params.se_cap)
                se_sum[c] += eff * (slots - tr.last_training_slots) / slots
                se_n[c] += 1
        env.advance()
    out = {}
    for c in cards:
        train = sum(t.ledger.training_slots for t in trackers[c])
        data = sum(t.ledger.data_slots for t in trackers[c])
        ul, dl = rate_kbps(ledgers[c])
        out[c] = {
            "overhead": train / (train + data) if train + data else 0.0,
            "se": se_sum[c] / se_n[c] if se_n[c] else 0.0,
            "trainings": float(sum(t.trainings for t in trackers[c])),
            "recoveries": float(sum(t.recoveries for t in trackers[c])),
            "ctrl_kbps": ul + dl,
        }
    return out, env.trace_hash()


def run_beam(cfg: ExperimentConfig, seed: int) -> list[ResultRow]:
    x, hx = _beam_pass(cfg, seed, "xapp")
    b, hb = _beam_pass(cfg, seed, "gradient")
    _check_paired("beam", [hx, hb])
    rows = []
    for c in x:
        red = 1.0 - x[c]["overhead"] / b[c]["overhead"] if b[c]["overhead"] > 0 else 0.0
        vals = [
            ("training_overhead_xapp", x[c]["overhead"], "fraction"),
            ("training_overhead_baseline", b[c]["overhead"], "fraction"),
            ("overhead_reduction", red, "fraction"),
            ("spectral_efficiency_xapp", x[c]["se"], "bit/s/Hz"),
            ("spectral_efficiency_baseline", b[c]["se"], "bit/s/Hz"),
            ("trainings_xapp", x[c]["trainings"], "count"),
            ("trainings_baseline", b[c]["trainings"], "count"),
            ("full_sweeps_xapp", x[c]["recoveries"], "count"),
            ("full_sweeps_baseline", b[c]["recoveries"], "count"),
            ("control_traffic_xapp", x[c]["ctrl_kbps"], "kbps"),
        ]
        rows += [ResultRow("beam", float(c), seed, m, float(v), u) for m, v, u in vals]
    return rows


# -- mac ----------------------------------------------------------------------


def _mac_pass(cfg: ExperimentConfig, seed: int, policy: str) -> tuple[dict, str]:
    env = Environment(cfg, seed)
    grid = ResourceGrid(cfg.period_slots, cfg.subchannels)
    if env.sim.slots_per_step % grid.period_slots:
        raise InvariantViolation("mac-periods", "mobility step is not a whole number of periods")
    periods = env.sim.slots_per_step // grid.period_slots
    focal = env.positions[rng_stream(seed, "mac/focal").integers(env.n)]
    order = np.argsort(np.hypot(*(env.positions - focal).T), kind="stable")
    counts = [int(c) for c in cfg.sweep_values]
    if max(counts) > env.n - 1:
        raise InvariantViolation("mac-population", f"need {max(counts) + 1} vehicles, have {env.n}")
    cap_bits = float(resource_bits(env.params.se_cap, env.params.bandwidth, grid.subchannels,
                                   env.sim.slot_duration))
    st = {}
    for c in counts:
        st[c] = {
            "tx": np.sort(order[:c]),
            "prev": np.zeros((c, grid.size), dtype=bool),
            "avg": np.full(c, PF_EPSILON),
            "demand": np.full(c, cfg.mac_demand, dtype=np.int64),
            "bits_prev": None,
            "rng": rng_stream(seed, f"mode2/{c}"),
            "ledger": OverheadLedger(window=cfg.duration_s, size_bits=cfg.message_bits),
            "thr": 0.0, "n": 0, "tx_count": 0, "col_count": 0, "grant_collisions": 0,
        }
    for _ in range(env.sim.n_steps):
        pos = env.positions
        for c in counts:
            s = st[c]
            tx = s["tx"]
            rx = nearest_partner(pos, tx)
            _, los, snr, _ = env.v2v_links(tx, rx)
            env.note(los)
            bits = resource_bits(spectral_efficiency(snr, env.params.se_cap), env.params.bandwidth,
                                 grid.subchannels, env.sim.slot_duration)
            d = np.hypot(*(pos[tx][:, None, :] - pos[tx][None, :, :]).transpose(2, 0, 1))
            interf = (d <= cfg.interference_range_m) & ~np.eye(c, dtype=bool)
            stale = bits if s["bits_prev"] is None else s["bits_prev"]
            for _p in range(periods):
                if policy == "mode2":
                    busy = sense_busy(s["prev"], interf)
                    sel = mode2_select_batch(~busy, cfg.mac_demand, s["rng"])
                    s["prev"] = sel
                else:
                    owner, s["avg"] = pf_schedule_batch(stale, s["avg"], s["demand"], grid)
                    sel = owner_mask(owner, c)
                    s["ledger"].record(UPLINK, count=c)
                    s["ledger"].record(DOWNLINK, count=c)
                col = collision_mask(sel, interf)
                if policy == "xapp" and col.any():
                    raise InvariantViolation("pf-grant-collision", f"{int(col.sum())} collided grants")
                delivered = period_throughput(sel, col, bits)
                s["thr"] += float(normalized_throughput(delivered, grid, cap_bits).mean())
                s["n"] += 1
                s["tx_count"] += int(sel.sum())
                s["col_count"] += int(col.sum())
            s["bits_prev"] = bits
        env.advance()
    out = {}
    for c in counts:
        s = st[c]
        ul, dl = rate_kbps(s["ledger"])
        out[c] = {
            "throughput": s["thr"] / s["n"],
            "collision_ratio": s["col_count"] / s["tx_count"] if s["tx_count"] else 0.0,
            "collisions": float(s["col_count"]),
            "ctrl_kbps": ul + dl,
        }
    return out, env.trace_hash()


def run_mac(cfg: ExperimentConfig, seed: int) -> list[ResultRow]:
    x, hx = _mac_pass(cfg, seed, "xapp")
    b, hb = _mac_pass(cfg, seed, "mode2")
    _check_paired("mac", [hx, hb])
    rows = []
    for c in x:
        vals = [
            ("throughput_xapp", x[c]["throughput"], "normalized"),
            ("throughput_baseline", b[c]["throughput"], "normalized"),
            ("collision_ratio_xapp", x[c]["collision_ratio"], "fraction"),
            ("collision_ratio_baseline", b[c]["collision_ratio"], "fraction"),
            ("collisions_xapp", x[c]["collisions"], "count"),
            ("control_traffic_xapp", x[c]["ctrl_kbps"], "kbps"),
        ]
        rows += [ResultRow("mac", float(c), seed, m, float(v), u) for m, v, u in vals]
    return rows


# -- relay / overhead -----------------------------------------------------------


def _relay_pairs(env: Environment, k: int) -> tuple[np.ndarray, np.ndarray]:
    if env.n < 2:
        raise InvariantViolation("relay-population", "fewer than two vehicles")
    src = np.sort(rng_stream(env.seed, "relay/pairs").sample(env.n, min(k, env.n)))
    return src, nearest_partner(env.positions, src)


def _direct_pass(cfg: ExperimentConfig, seed: int) -> tuple[dict, str]:
    env = Environment(cfg, seed)
    src, dst = _relay_pairs(env, cfg.relay_pairs)
    gammas = list(cfg.sweep_values)
    ok = {g: np.ones(len(src), dtype=bool) for g in gammas}
    for _ in range(env.sim.n_steps):
        _, los, snr, _ = env.v2v_links(src, dst)
        env.note(los)
        snr = snr + cfg.relay_rx_gain_db
        for g in gammas:
            ok[g] &= los & (snr >= g)
        env.advance()
    return {g: {"connectivity": float(ok[g].mean())} for g in gammas}, env.trace_hash()


class _RelayRun:
    """Event-driven relay control for one SNR threshold."""

    def __init__(self, cfg: ExperimentConfig, pairs: list[tuple[int, int]], gamma: float):
        self.gamma = gamma
        self.pairs = pairs
        self.plane = ControlPlane(LatencyModel(cfg.latency_s),
                                  OverheadLedger(window=cfg.duration_s, size_bits=cfg.message_bits))
        self.xapp = RelayXApp(self.plane, pairs)
        self.plane.register_xapp(self.xapp)
        self.active: list[tuple] = [(a, b) for a, b in pairs]
        self.inflight: set[int] = set()
        for a in {a for a, _ in pairs}:
            self.plane.register_endpoint(a, self._on_command)
        self.ok = np.ones(len(pairs), dtype=bool)
        self.hop_sum = 0
        self.hop_n = 0
        self.prev_t = None

    def _on_command(self, msg, now) -> None:
        cmd = msg.payload
        if msg.dst == self.pairs[cmd.pair][0]:
            self.active[cmd.pair] = cmd.path
            self.inflight.discard(cmd.pair)

    def _reachable(self, t: float) -> set[int]:
        comp = self.xapp.graphs[t].components()
        return {p for p, (a, b) in enumerate(self.pairs) if comp[a] == comp[b]}

    def step(self, t: float, g: LinkGraph) -> None:
        self.plane.run_until(t)
        self.xapp.publish(t, g)
        src = np.array([a for a, _ in self.pairs])
        dst = np.array([b for _, b in self.pairs])
        comp = g.components()
        if self.prev_t is not None and self.xapp.pending:
            # the previous snapshot is the freshest one old enough to act on
            self.xapp.retry(self.prev_t, t, only=self._reachable(self.prev_t))
        self.prev_t = t
        self.ok &= comp[src] == comp[dst]
        uniq, inv = np.unique(src, return_inverse=True)
        hops = g.hop_distances(uniq)[inv, dst]
        finite = np.isfinite(hops)
        self.hop_sum += int(hops[finite].sum())
        self.hop_n += int(finite.sum())
        direct = g.has_edges(src, dst)
        for p, path in enumerate(self.active):
            if p in self.inflight or p in self.xapp.pending:
                continue
            broken = not bool(g.has_edges(path[:-1], path[1:]).all())
            revert = len(path) > 2 and direct[p]
            if broken or revert:
                request_path(self.plane, p, path[0], t)
                self.inflight.add(p)

    def metrics(self) -> dict:
        # let requests still in flight at the end of the window complete
        self.plane.run_until(math.inf)
        led = self.plane.ledger
        if led.ul_msgs != 2 * led.events or led.dl_msgs != led.hops_total:
            raise InvariantViolation("ledger-identity", f"gamma={self.gamma}")
        bad = [r for r in self.xapp.paths if r.bottleneck_snr_db < self.gamma]
        if bad:
            raise InvariantViolation("path-bottleneck", f"{len(bad)} paths below {self.gamma} dB")
        ul, dl = rate_kbps(led)
        return {
            "connectivity": float(self.ok.mean()),
            "avg_hops": self.hop_sum / self.hop_n if self.hop_n else 0.0,
            "paths": float(len(self.xapp.paths)),
            "bottleneck_violations": float(len(bad)),
            "min_bottleneck": min((r.bottleneck_snr_db for r in self.xapp.paths if r.hops > 0),
                                  default=self.gamma),
            "events": float(led.events),
            "ul_msgs": float(led.ul_msgs),
            "dl_msgs": float(led.dl_msgs),
            "hops_total": float(led.hops_total),
            "mean_hops": led.mean_hops,
            "ul_kbps": ul,
            "dl_kbps": dl,
        }


def _relay_pass(cfg: ExperimentConfig, seed: int) -> tuple[dict, str]:
    env = Environment(cfg, seed)
    src, dst = _relay_pairs(env, cfg.relay_pairs)
    pairs = [(int(a), int(b)) for a, b in zip(src, dst)]
    rsus = place_rsus(env.road) if cfg.relay_rsus else []
    rsu_pos = np.array([r.position for r in rsus], dtype=float).reshape(-1, 2)
    n_nodes = env.n + len(rsus)
    gammas = list(cfg.sweep_values)
    rx_gain = cfg.relay_rx_gain_db
    r_max = max_range_m(env.params, min(gammas), rx_gain)
    runs = {g: _RelayRun(cfg, pairs, g) for g in gammas}
    nodes = range(n_nodes)
    for _ in range(env.sim.n_steps):
        t = env.now
        _, pair_los, _, _ = env.v2v_links(src, dst)
        env.note(pair_los)
        pts = np.vstack([env.positions, rsu_pos])
        cand = cKDTree(pts).query_pairs(r_max, output_type="ndarray")
        i, j = cand[:, 0].astype(np.int64), cand[:, 1].astype(np.int64)
        geom = los_geometry_many(pts[i], pts[j], env.road)
        vv = geom & (i < env.n) & (j < env.n)
        blocked = np.zeros(len(i), dtype=bool)
        if vv.any():
            idx = env.blockage.track(link_keys(i[vv], j[vv]))
            blocked[vv] = env.blockage.blocked[idx]
        keep = geom & ~blocked
        i, j = i[keep], j[keep]
        dist = np.hypot(*(pts[j] - pts[i]).T)
        snr = np.atleast_1d(link_snr_db(env.params, pathloss_db(dist, env.params.carrier_freq, True), rx_gain))
        for g in gammas:
            m = snr >= g
            runs[g].step(t, LinkGraph(nodes, i[m], j[m], snr[m], g))
        env.advance()
    return {g: runs[g].metrics() for g in gammas}, env.trace_hash()


def run_relay(cfg: ExperimentConfig, seed: int) -> list[ResultRow]:
    x, hx = _relay_pass(cfg, seed)
    b, hb = _direct_pass(cfg, seed)
    _check_paired("relay", [hx, hb])
    rows = []
    for g in x:
        vals = [
            ("connectivity_xapp", x[g]["connectivity"], "fraction"),
            ("connectivity_baseline", b[g]["connectivity"], "fraction"),
            ("avg_hops_xapp", x[g]["avg_hops"], "hops"),
            ("avg_hops_baseline", 1.0, "hops"),
            ("paths_computed", x[g]["paths"], "count"),
            ("bottleneck_violations", x[g]["bottleneck_violations"], "count"),
        ]
        rows += [ResultRow("relay", float(g), seed, m, float(v), u) for m, v, u in vals]
    return rows


def run_overhead(cfg: ExperimentConfig, seed: int) -> list[ResultRow]:
    x, _ = _relay_pass(cfg, seed)
    rows = []
    for g in x:
        vals = [
            ("ul_kbps", x[g]["ul_kbps"], "kbps"),
            ("dl_kbps", x[g]["dl_kbps"], "kbps"),
            ("total_kbps", x[g]["ul_kbps"] + x[g]["dl_kbps"], "kbps"),
            ("events", x[g]["events"], "count"),
            ("ul_msgs", x[g]["ul_msgs"], "count"),
            ("dl_msgs", x[g]["dl_msgs"], "count"),
            ("hops_total", x[g]["hops_total"], "hops"),
            ("mean_hops", x[g]["mean_hops"], "hops"),
        ]
        rows += [ResultRow("overhead", float(g), seed, m, float(v), u) for m, v, u in vals]
    return rows


# -- rsu ----------------------------------------------------------------------


def _rsu_pass(cfg: ExperimentConfig, seed: int, policy: str) -> tuple[dict, str]:
    env = Environment(cfg, seed)
    sites = place_rsus(env.road)
    rsu_pos = np.array([r.position for r in sites], dtype=float)
    n_active = max(1, int(round(cfg.rsu_active_fraction * env.n)))
    active = np.sort(rng_stream(seed, "rsu/active").sample(env.n, n_active))
    per_epoch = int(round(cfg.rsu_epoch_s / cfg.mobility_step_s))
    if per_epoch < 1 or abs(per_epoch * cfg.mobility_step_s - cfg.rsu_epoch_s) > 1e-9:
        raise InvariantViolation("rsu-epoch", "epoch is not a whole number of mobility steps")
    caps = list(cfg.sweep_values)
    traces = {c: [] for c in caps}
    per_epoch_served = {c: [] for c in caps}

    def reach(points: np.ndarray):
        m, r = len(points), len(rsu_pos)
        a = np.repeat(points, r, axis=0)
        b = np.tile(rsu_pos, (m, 1))
        los = los_geometry_many(a, b, env.road)
        dist = np.hypot(*(b - a).T)
        pl = pathloss_db(dist, env.params.carrier_freq, los)
        power = (env.params.eirp - np.atleast_1d(pl)).reshape(m, r)
        snr = np.atleast_1d(link_snr_db(env.params, pl)).reshape(m, r)
        return snr >= cfg.rsu_attach_snr_db, power

    for step in range(env.sim.n_steps):
        if step % per_epoch == 0:
            pts = env.positions[active]
            in_range, power = reach(pts)
            env.note(in_range)
            cavs = tuple(int(v) for v in active)
            forecast = None
            if policy == "xapp":
                forecast = forecast_load([env.vehicles[v] for v in active], sites, cfg.rsu_horizon,
                                         cfg.rsu_epoch_s, lambda p: reach(p)[0])
            for c in caps:
                rsus = [replace(s, capacity=c) for s in sites]
                snap = AttachSnapshot(cavs, tuple(rsus), power, in_range)
                if policy == "xapp":
                    a = xapp_assign(cavs, rsus, snap, forecast, cfg.rsu_forecast_weight)
                else:
                    a = baseline_assign(cavs, rsus, snap)
                if not check_capacity(a, rsus):
                    raise InvariantViolation("rsu-capacity", f"capacity {c} exceeded")
                for cav, r in a.items():
                    if r is not None and not in_range[cavs.index(cav), r - sites[0].id]:
                        raise InvariantViolation("rsu-range", f"CAV {cav} attached out of range")
                traces[c].append(a)
                per_epoch_served[c].append(served(a))
        env.advance()
    out = {}
    for c in caps:
        rsus = [replace(s, capacity=c) for s in sites]
        lost, load = lost_traffic(traces[c], rsus)
        assigned = float(np.mean([rsu_loads(a, rsus).mean() for a in traces[c]]))
        out[c] = {"lost": lost, "load": load, "assigned": assigned, "served": per_epoch_served[c]}
    return out, env.trace_hash()


def run_rsu(cfg: ExperimentConfig, seed: int) -> list[ResultRow]:
    x, hx = _rsu_pass(cfg, seed, "xapp")
    b, hb = _rsu_pass(cfg, seed, "baseline")
    _check_paired("rsu", [hx, hb])
    rows = []
    for c in x:
        worse = sum(sx < sb for sx, sb in zip(x[c]["served"], b[c]["served"]))
        if worse:
            raise InvariantViolation("rsu-served", f"xApp served fewer CAVs in {worse} epochs at capacity {c}")
        vals = [
            ("lost_traffic_xapp", x[c]["lost"], "percent"),
            ("lost_traffic_baseline", b[c]["lost"], "percent"),
            ("avg_assigned_xapp", x[c]["assigned"], "cavs/rsu"),
            ("avg_assigned_baseline", b[c]["assigned"], "cavs/rsu"),
        ]
        if math.isfinite(c):
            vals += [
                ("avg_load_xapp", x[c]["load"], "fraction"),
                ("avg_load_baseline", b[c]["load"], "fraction"),
            ]
        rows += [ResultRow("rsu", float(c), seed, m, float(v), u) for m, v, u in vals]
    return rows


# -- harness ------------------------------------------------------------------

DRIVERS = {
    "beam": run_beam,
    "mac": run_mac,
    "relay": run_relay,
    "overhead": run_overhead,
    "rsu": run_rsu,
}


def run_rows(cfg: ExperimentConfig) -> list[ResultRow]:
    rows = []
    for seed in cfg.seeds:
        rows += DRIVERS[cfg.experiment](cfg, seed)
    keys = [(r.experiment, r.sweep, r.seed, r.metric) for r in rows]
    if len(set(keys)) != len(keys):
        raise InvariantViolation("unique-rows", "duplicate (experiment, sweep, seed, metric)")
    return rows


def summarize(rows: list[ResultRow]) -> list[ResultRow]:
    """Mean over seeds per (sweep, metric), in first-appearance order."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.experiment, r.sweep, r.metric, r.units), []).append(r.value)
    return [ResultRow(e, s, "mean", m, float(np.mean(v)), u) for (e, s, m, u), v in groups.items()]


def _fmt_sweep(v: float) -> str:
    if math.isinf(v):
        return "inf"
    return str(int(v)) if v == int(v) else repr(v)


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.experiment, _fmt_sweep(r.sweep), r.seed, r.metric, repr(r.value), r.units])
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, out_dir) -> list[Path]:
    """Run every (sweep value, seed), write ``<exp>_runs.csv``, ``<exp>_summary.csv`` and the resolved config."""
    out = Path(out_dir)
    rows = run_rows(cfg)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{cfg.experiment}_runs.csv", out / f"{cfg.experiment}_summary.csv",
             out / f"{cfg.experiment}_config.txt"]
    texts = [rows_to_csv(rows), rows_to_csv(summarize(rows)), cfg.echo()]
    for p, text in zip(paths, texts):
        p.write_bytes(text.encode("utf-8"))
    return paths
