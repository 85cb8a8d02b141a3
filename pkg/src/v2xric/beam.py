"""Beam codebooks, hill-climbing beam tracking, position-aided beam sweeps.

Beam ``b`` of an ``nx x ny`` codebook sits at grid column ``b % nx`` and row
``b // nx``; columns span azimuth [-60, 60] deg and rows elevation
[-30, 30] deg.  Each vehicle carries four panels facing its heading, left,
back and right, so departure azimuths seen by the codebook lie in
[-45, 45] deg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .scenario import VehicleState

AZ_SPAN = (-60.0, 60.0)
EL_SPAN = (-30.0, 30.0)
ROLLOFF_DB = 12.0
SIDELOBE_FLOOR_DB = 25.0
RETRAIN_DROP_DB = 6.0


@dataclass(frozen=True)
class BeamCodebook:
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("codebook grid needs at least 2x2 beams")

    @classmethod
    def from_cardinality(cls, n: int) -> "BeamCodebook":
        ny = max(d for d in range(1, math.isqrt(n) + 1) if n % d == 0)
        return cls(n // ny, ny)

    @property
    def cardinality(self) -> int:
        return self.nx * self.ny

    @property
    def peak_gain_db(self) -> float:
        return 10.0 * math.log10(self.nx * self.ny)

    @property
    def az_width(self) -> float:
        return (AZ_SPAN[1] - AZ_SPAN[0]) / (self.nx - 1)

    @property
    def el_width(self) -> float:
        return (EL_SPAN[1] - EL_SPAN[0]) / (self.ny - 1)

    @property
    def azimuths(self) -> np.ndarray:
        cols = np.linspace(*AZ_SPAN, self.nx)
        return np.tile(cols, self.ny)

    @property
    def elevations(self) -> np.ndarray:
        rows = np.linspace(*EL_SPAN, self.ny)
        return np.repeat(rows, self.nx)

    def direction(self, b: int) -> tuple[float, float]:
        self._check(b)
        col, row = b % self.nx, b // self.nx
        az = AZ_SPAN[0] + col * self.az_width
        el = EL_SPAN[0] + row * self.el_width
        return az, el

    def neighborhood(self, b: int) -> list[int]:
        """Beams of the 3x3 grid window around ``b`` (clipped at the edges)."""
        self._check(b)
        col, row = b % self.nx, b // self.nx
        out = []
        for r in range(max(row - 1, 0), min(row + 2, self.ny)):
            for c in range(max(col - 1, 0), min(col + 2, self.nx)):
                out.append(r * self.nx + c)
        return out

    def _check(self, b: int) -> None:
        if not 0 <= b < self.cardinality:
            raise IndexError(f"beam index {b} outside codebook of {self.cardinality}")


def beam_gain_db(cb: BeamCodebook, beam_index: int, az: float, el: float) -> float:
    """Array gain of one beam towards (az, el): flat inside its cell, quadratic roll-off outside."""
    baz, bel = cb.direction(beam_index)
    du = (az - baz) / cb.az_width
    dv = (el - bel) / cb.el_width
    if abs(du) <= 0.5 + 1e-9 and abs(dv) <= 0.5 + 1e-9:
        return cb.peak_gain_db
    return cb.peak_gain_db - min(ROLLOFF_DB * (du * du + dv * dv), SIDELOBE_FLOOR_DB)


def all_gains_db(cb: BeamCodebook, az: float, el: float) -> np.ndarray:
    du = (az - cb.azimuths) / cb.az_width
    dv = (el - cb.elevations) / cb.el_width
    att = np.minimum(ROLLOFF_DB * (du * du + dv * dv), SIDELOBE_FLOOR_DB)
    inside = (np.abs(du) <= 0.5 + 1e-9) & (np.abs(dv) <= 0.5 + 1e-9)
    return cb.peak_gain_db - np.where(inside, 0.0, att)


def departure_angles(tx_pos, tx_heading, rx_pos, height_diff: float = 0.0,
                     panel: int | None = None) -> tuple[float, float]:
    """(azimuth, elevation) in degrees relative to a transmitter panel.

    Panels face the heading rotated by ``90 * panel`` degrees; by default the
    best-facing one is used, so the azimuth lands in [-45, 45].
    """
    dx, dy = rx_pos[0] - tx_pos[0], rx_pos[1] - tx_pos[1]
    dist = math.hypot(dx, dy)
    az = math.degrees(math.atan2(dy, dx) - math.atan2(tx_heading[1], tx_heading[0]))
    if panel is None:
        panel = best_panel(az)
    az -= 90.0 * panel
    az = (az + 180.0) % 360.0 - 180.0
    el = math.degrees(math.atan2(height_diff, dist)) if dist > 0 or height_diff else 0.0
    return az, el


def best_panel(rel_az: float) -> int:
    """Panel (0 front, 1 left, 2 back, 3 right) facing a heading-relative azimuth."""
    return int(round(((rel_az + 180.0) % 360.0 - 180.0) / 90.0)) % 4


def relative_azimuth(tx_pos, tx_heading, rx_pos) -> float:
    dx, dy = rx_pos[0] - tx_pos[0], rx_pos[1] - tx_pos[1]
    return math.degrees(math.atan2(dy, dx) - math.atan2(tx_heading[1], tx_heading[0]))


def gradient_track(cb: BeamCodebook, current_beam: int, measure: Callable[[int], float]) -> tuple[int, int]:
    """Hill-climb on the beam grid from ``current_beam``.

    Each iteration measures the incumbent's 3x3 window (one slot per beam)
    and moves to the best one, ties going to the lowest index; it stops once
    the incumbent is that best beam.  Returns ``(beam, slots_used)``.
    """
    cb._check(current_beam)
    incumbent, slots = current_beam, 0
    for _ in range(cb.cardinality):
        window = cb.neighborhood(incumbent)
        gains = [measure(b) for b in window]
        slots += len(window)
        best = window[int(np.argmax(gains))]
        if best == incumbent:
            break
        incumbent = best
    return incumbent, slots


def xapp_candidates(tx: VehicleState, rx: VehicleState, cb: BeamCodebook, k: int,
                    height_diff: float = 0.0) -> list[int]:
    """The ``k`` beams closest to the geometric departure angle from reported positions."""
    if not 1 <= k <= cb.cardinality:
        raise ValueError("k must be within [1, cardinality]")
    az, el = departure_angles(tx.position, tx.heading, rx.position, height_diff)
    return nearest_beams(cb, az, el, k)


def nearest_beams(cb: BeamCodebook, az: float, el: float, k: int) -> list[int]:
    dist = np.hypot(cb.azimuths - az, cb.elevations - el)
    return [int(b) for b in np.argsort(dist, kind="stable")[:k]]


def sweep(candidates, measure: Callable[[int], float]) -> tuple[int, int]:
    """Measure every candidate once; best wins, ties to the lowest index."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("sweep needs at least one candidate beam")
    gains = [(-measure(b), b) for b in candidates]
    return min(gains)[1], len(candidates)


def default_candidate_count(cardinality: int) -> int:
    return max(1, math.ceil(cardinality / 8))


@dataclass
class TrainingLedger:
    training_slots: int = 0
    data_slots: int = 0

    @property
    def overhead_fraction(self) -> float:
        total = self.training_slots + self.data_slots
        return self.training_slots / total if total else 0.0


class BeamTracker:
    """Beam state of one directional link under either training policy.

    ``policy`` is ``"gradient"`` (hill-climb from the incumbent) or ``"xapp"``
    (sweep of ``k`` position-derived candidates).  Training fires on initial
    access, when a blockage ends, and when the realised gain falls more than
    6 dB under the peak.  A training round that still leaves the link 6 dB
    short is followed by a full sweep (beam-failure recovery).
    """

    def __init__(self, cb: BeamCodebook, policy: str, k: int | None = None):
        if policy not in ("gradient", "xapp"):
            raise ValueError(f"unknown policy {policy!r}")
        self.cb = cb
        self.policy = policy
        self.k = k if k is not None else default_candidate_count(cb.cardinality)
        self.beam = nearest_beams(cb, 0.0, 0.0, 1)[0]
        self.ledger = TrainingLedger()
        self.trainings = 0
        self.recoveries = 0
        self._connected_before = False
        self.last_training_slots = 0

    def step(self, connected: bool, true_angles: tuple[float, float],
             reported_angles: tuple[float, float], blockage_ended: bool,
             slots: int) -> float | None:
        """Advance one mobility step; returns the realised gain in dB when connected."""
        self.last_training_slots = 0
        if not connected:
            self._connected_before = False
            return None
        az, el = true_angles
        gains = all_gains_db(self.cb, az, el)
        measure = gains.__getitem__
        peak = self.cb.peak_gain_db
        trigger = (not self._connected_before) or blockage_ended \
            or gains[self.beam] < peak - RETRAIN_DROP_DB
        self._connected_before = True
        used = 0
        if trigger:
            self.trainings += 1
            if self.policy == "gradient":
                self.beam, used = gradient_track(self.cb, self.beam, measure)
            else:
                cands = nearest_beams(self.cb, reported_angles[0], reported_angles[1], self.k)
                self.beam, used = sweep(cands, measure)
            if gains[self.beam] < peak - RETRAIN_DROP_DB:
                self.recoveries += 1
                best, extra = sweep(range(self.cb.cardinality), measure)
                self.beam = best
                used += extra
        self.last_training_slots = used
        self.ledger.training_slots += used
        self.ledger.data_slots += max(slots - used, 0)
        return float(gains[self.beam])
