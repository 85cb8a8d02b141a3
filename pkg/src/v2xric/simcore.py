"""Simulation clock, configuration and reproducible random streams.

Every random draw in a run comes from a named stream whose state is a pure
function of ``(seed, stream_id)``.  Streams are seeded by iterating the
splitmix64 mixer on ``seed ^ stream_id``; the four resulting words set the
128-bit state and increment of a PCG64 (XSL-RR 128/64) core.  Continuous
variates are derived here from the raw 64-bit outputs rather than through
``numpy.random.Generator`` so that draws stay identical across numpy releases
(numpy only guarantees the raw bit-generator stream).

Generator algorithm version: ``GENERATOR_VERSION``.  Bump it whenever any of
the transforms below change.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

GENERATOR_VERSION = "splitmix64-pcg64-v1"

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 2.0 ** -53


def splitmix64(state: int) -> tuple[int, int]:
    """One step of the splitmix64 recurrence. Returns ``(new_state, output)``."""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return state, z ^ (z >> 31)


def _mix_array(x: np.ndarray) -> np.ndarray:
    # splitmix64 applied element-wise to uint64 arrays (wrapping arithmetic)
    z = x + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def stream_id(name: str | int) -> int:
    """Map a stream name to a 64-bit id. Integers pass through unchanged."""
    if isinstance(name, int):
        return name & MASK64
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class DeterministicGenerator:
    """PCG64-backed stream with version-pinned transforms."""

    def __init__(self, seed: int, sid: int):
        state = (seed ^ sid) & MASK64
        words = []
        for _ in range(4):
            state, out = splitmix64(state)
            words.append(out)
        self._bitgen = np.random.PCG64()
        self._bitgen.state = {
            "bit_generator": "PCG64",
            "state": {
                "state": (words[0] << 64) | words[1],
                "inc": ((words[2] << 64) | words[3]) | 1,
            },
            "has_uint32": 0,
            "uinteger": 0,
        }

    def next_u64(self, size=None):
        if size is None:
            return int(self._bitgen.random_raw())
        return self._bitgen.random_raw(size)

    def random(self, size=None):
        """Uniform variates on the open interval (0, 1)."""
        if size is None:
            return ((self.next_u64() >> 11) + 0.5) * _INV53
        raw = self._bitgen.random_raw(size)
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53

    def uniform(self, low: float, high: float, size=None):
        return low + (high - low) * self.random(size)

    def integers(self, n: int, size=None):
        """Integers in ``[0, n)``; bias is below ``n / 2**53``."""
        if n <= 0:
            raise ValueError("n must be positive")
        u = self.random(size)
        if size is None:
            return min(int(u * n), n - 1)
        return np.minimum((u * n).astype(np.int64), n - 1)

    def exponential(self, mean: float, size=None):
        u = self.random(size)
        if size is None:
            return -mean * math.log(u)
        return -mean * np.log(u)

    def normal(self, size=None):
        z = ndtri(self.random(size))
        return float(z) if size is None else z

    def lognormal(self, mu: float, sigma: float, size=None):
        z = self.normal(size)
        return math.exp(mu + sigma * z) if size is None else np.exp(mu + sigma * z)

    def poisson(self, lam: float) -> int:
        """Count of unit-rate exponential arrivals in ``[0, lam)`` (exact)."""
        if lam < 0:
            raise ValueError("lam must be non-negative")
        if lam == 0:
            return 0
        count, t = 0, 0.0
        batch = int(lam + 5.0 * math.sqrt(lam) + 16)
        while True:
            arrivals = t + np.cumsum(-np.log(self.random(batch)))
            below = int(np.searchsorted(arrivals, lam, side="left"))
            count += below
            if below < batch:
                return count
            t = float(arrivals[-1])

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.random(n), kind="stable")

    def sample(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)``, uniformly, in draw order."""
        k = min(k, n)
        return self.permutation(n)[:k]


def rng_stream(seed: int, sid: str | int) -> DeterministicGenerator:
    """Independent deterministic stream for ``(seed, sid)``."""
    return DeterministicGenerator(seed & MASK64, stream_id(sid))


def counter_uniform(seed: int, sid: str | int, key, counter) -> np.ndarray:
    """Counter-based uniforms on (0, 1): a pure function of each (key, counter).

    Used where draws must not depend on query order, e.g. per-link blockage
    durations that any subset of links can reproduce independently.
    """
    base = np.uint64((seed ^ stream_id(sid)) & MASK64)
    key = np.asarray(key, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix_array(np.asarray(base, dtype=np.uint64))
        h = _mix_array(h ^ key)
        h = _mix_array(h ^ counter)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53


@dataclass(frozen=True)
class SimConfig:
    seed: int = 1
    duration: float = 300.0
    mobility_step: float = 0.1
    slot_duration: float = 0.000125

    def __post_init__(self):
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.duration <= 0 or self.mobility_step <= 0 or self.slot_duration <= 0:
            raise ValueError("duration, mobility_step and slot_duration must be > 0")
        ratio = self.mobility_step / self.slot_duration
        if abs(ratio - round(ratio)) > 1e-6 * ratio:
            raise ValueError("mobility_step must be an integer multiple of slot_duration")

    @property
    def slots_per_step(self) -> int:
        return int(round(self.mobility_step / self.slot_duration))

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.mobility_step))


@dataclass(frozen=True)
class Clock:
    mobility_step: float
    step_index: int = 0

    @property
    def now(self) -> float:
        return self.step_index * self.mobility_step


def advance(clock: Clock) -> Clock:
    return Clock(clock.mobility_step, clock.step_index + 1)
