"""Near-RT RIC control plane: latent E2-style messaging and overhead accounting.

Control messages ride a reliable FR1 bearer with a fixed one-way latency.
Sizes are in bits and "kb" means 1000 bits throughout.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable, Protocol

REPORT = "Report"
COMMAND = "Command"
UPLINK = "uplink"
DOWNLINK = "downlink"

DEFAULT_MESSAGE_BITS = 1000
DEFAULT_LATENCY_S = 0.030
DEFAULT_WINDOW_S = 300.0


class InvariantViolation(RuntimeError):
    """A simulation invariant failed; ``name`` identifies which one."""

    def __init__(self, name: str, detail: str = ""):
        super().__init__(f"{name}: {detail}" if detail else name)
        self.name = name


@dataclass(frozen=True)
class ControlMessage:
    kind: str
    direction: str
    src: object
    dst: object
    t_send: float
    size_bits: int = DEFAULT_MESSAGE_BITS
    payload: object = None
    state_time: float | None = None

    def __post_init__(self):
        if self.size_bits <= 0:
            raise ValueError("size_bits must be positive")
        if self.kind not in (REPORT, COMMAND):
            raise ValueError(f"unknown message kind {self.kind!r}")
        if self.direction not in (UPLINK, DOWNLINK):
            raise ValueError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True)
class LatencyModel:
    one_way_latency: float = DEFAULT_LATENCY_S

    def __post_init__(self):
        if self.one_way_latency < 0:
            raise ValueError("latency must be >= 0")


def deliver(msg: ControlMessage, lm: LatencyModel) -> float:
    return msg.t_send + lm.one_way_latency


@dataclass
class OverheadLedger:
    window: float = DEFAULT_WINDOW_S
    size_bits: int = DEFAULT_MESSAGE_BITS
    ul_bits: int = 0
    dl_bits: int = 0
    ul_msgs: int = 0
    dl_msgs: int = 0
    events: int = 0
    hops_total: int = 0

    def record(self, direction: str, size_bits: int | None = None, count: int = 1) -> None:
        bits = (self.size_bits if size_bits is None else size_bits) * count
        if direction == UPLINK:
            self.ul_bits += bits
            self.ul_msgs += count
        else:
            self.dl_bits += bits
            self.dl_msgs += count

    @property
    def mean_hops(self) -> float:
        return self.hops_total / self.events if self.events else 0.0


def account_relay_event(ledger: OverheadLedger, hops: int) -> OverheadLedger:
    """A relay (re)selection: link-failure report and path request up, one command per hop down."""
    if hops < 1:
        raise ValueError("a relay event needs hops >= 1")
    account_path_request(ledger)
    account_path_command(ledger, hops)
    return ledger


def account_path_request(ledger: OverheadLedger) -> None:
    ledger.record(UPLINK, count=2)
    ledger.events += 1


def account_path_command(ledger: OverheadLedger, hops: int) -> None:
    ledger.record(DOWNLINK, count=hops)
    ledger.hops_total += hops


def rate_kbps(ledger: OverheadLedger) -> tuple[float, float]:
    if ledger.window <= 0:
        raise ValueError("window must be positive")
    return ledger.ul_bits / ledger.window / 1000.0, ledger.dl_bits / ledger.window / 1000.0


class XAppHook(Protocol):
    subscription: frozenset

    def on_report(self, msg: ControlMessage, now: float) -> list[ControlMessage]:
        ...


@dataclass(order=True)
class _Queued:
    arrival: float
    seq: int
    msg: ControlMessage = field(compare=False)


class ControlPlane:
    """Message queue between E2 endpoints and the near-RT controller.

    Reports reach subscribed xApps after one latency; commands they emit
    reach the endpoint one latency later.  Delivery is reliable and FIFO per
    (src, dst).  Every command is checked against the staleness rule: the
    state it was computed from must be at least one latency old.
    """

    def __init__(self, lm: LatencyModel | None = None, ledger: OverheadLedger | None = None):
        self.lm = lm or LatencyModel()
        self.ledger = ledger if ledger is not None else OverheadLedger()
        self._queue: list[_Queued] = []
        self._seq = itertools.count()
        self._last_arrival: dict[tuple, float] = {}
        self.xapps: list[XAppHook] = []
        self.endpoints: dict[object, Callable[[ControlMessage, float], None]] = {}

    def register_xapp(self, xapp: XAppHook) -> None:
        self.xapps.append(xapp)

    def register_endpoint(self, eid, handler: Callable[[ControlMessage, float], None]) -> None:
        self.endpoints[eid] = handler

    def send(self, msg: ControlMessage) -> float:
        arrival = deliver(msg, self.lm)
        pair = (msg.src, msg.dst)
        # FIFO per pair even if sends arrive out of time order
        arrival = max(arrival, self._last_arrival.get(pair, arrival))
        self._last_arrival[pair] = arrival
        self.ledger.record(msg.direction, msg.size_bits)
        heapq.heappush(self._queue, _Queued(arrival, next(self._seq), msg))
        return arrival

    def run_until(self, t: float) -> int:
        """Deliver everything arriving at or before ``t`` in arrival order."""
        n = 0
        while self._queue and self._queue[0].arrival <= t + 1e-12:
            item = heapq.heappop(self._queue)
            n += 1
            msg, now = item.msg, item.arrival
            if msg.kind == REPORT:
                for xapp in self.xapps:
                    if msg.payload is not None and type(msg.payload).__name__ not in xapp.subscription:
                        continue
                    for cmd in xapp.on_report(msg, now) or []:
                        self._check_staleness(cmd)
                        self.send(cmd)
            else:
                handler = self.endpoints.get(msg.dst)
                if handler is not None:
                    handler(msg, now)
        return n

    def pending(self) -> int:
        return len(self._queue)

    def _check_staleness(self, cmd: ControlMessage) -> None:
        if cmd.state_time is None:
            raise InvariantViolation("xapp-state-timestamp", "command without state timestamp")
        if cmd.state_time > cmd.t_send - self.lm.one_way_latency + 1e-12:
            raise InvariantViolation(
                "xapp-state-staleness",
                f"command at t={cmd.t_send:.6f} used state from t={cmd.state_time:.6f}",
            )
