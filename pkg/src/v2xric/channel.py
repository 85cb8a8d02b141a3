"""FR2 link budget: pathloss, thermal noise, SNR and spectral efficiency.

Pathloss uses the 3GPP TR 37.885 urban V2V coefficient sets (distance in
metres, carrier in GHz).  The transmit EIRP already contains the transmit
array gain, so beam misalignment is passed in as a negative ``rx_gain`` or
subtracted from the EIRP by the caller.  All functions accept scalars or
numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOS = "LOS"
NLOS = "NLOS"

D_MIN = 1.0


@dataclass(frozen=True)
class LinkBudgetParams:
    carrier_freq: float = 28.0      # GHz
    eirp: float = 23.0              # dBm, includes transmit array gain
    bandwidth: float = 100e6        # Hz
    noise_figure: float = 9.0       # dB
    se_cap: float = 7.4             # bit/s/Hz

    def __post_init__(self):
        if self.carrier_freq <= 0 or self.bandwidth <= 0 or self.se_cap <= 0:
            raise ValueError("carrier_freq, bandwidth and se_cap must be positive")


@dataclass(frozen=True)
class LinkSnapshot:
    a: object
    b: object
    distance: float
    state: str
    snr_db: float
    spectral_efficiency: float


def pathloss_db(d, fc: float, state):
    """Urban V2V pathloss in dB. ``state`` is LOS/NLOS or a boolean LOS mask."""
    d = np.maximum(np.asarray(d, dtype=float), D_MIN)
    los = _los_mask(state)
    pl_los = 38.77 + 16.7 * np.log10(d) + 18.2 * np.log10(fc)
    pl_nlos = 36.85 + 30.0 * np.log10(d) + 18.9 * np.log10(fc)
    out = np.where(los, pl_los, pl_nlos)
    return float(out) if out.ndim == 0 else out


def _los_mask(state):
    if isinstance(state, str):
        if state not in (LOS, NLOS):
            raise ValueError(f"unknown link state {state!r}")
        return state == LOS
    return np.asarray(state, dtype=bool)


def noise_power_dbm(bandwidth: float, nf: float) -> float:
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return -174.0 + 10.0 * np.log10(bandwidth) + nf


def link_snr_db(params: LinkBudgetParams, pl, rx_gain=0.0):
    snr = params.eirp + np.asarray(rx_gain, dtype=float) - np.asarray(pl, dtype=float) \
        - noise_power_dbm(params.bandwidth, params.noise_figure)
    return float(snr) if snr.ndim == 0 else snr


def spectral_efficiency(snr_db, se_cap: float = 7.4):
    """Shannon efficiency capped at ``se_cap``; -inf SNR maps to 0."""
    snr = np.asarray(snr_db, dtype=float)
    with np.errstate(over="ignore"):
        se = np.log2(1.0 + np.power(10.0, snr / 10.0))
    se = np.clip(se, 0.0, se_cap)
    return float(se) if se.ndim == 0 else se


def max_range_m(params: LinkBudgetParams, snr_min_db: float, rx_gain: float = 0.0) -> float:
    """Largest LOS distance whose SNR still reaches ``snr_min_db``."""
    budget = params.eirp + rx_gain - noise_power_dbm(params.bandwidth, params.noise_figure) - snr_min_db
    exponent = (budget - 38.77 - 18.2 * np.log10(params.carrier_freq)) / 16.7
    return float(max(10.0 ** exponent, D_MIN))


def snapshot(params: LinkBudgetParams, a, b, distance: float, state: str,
             rx_gain: float = 0.0) -> LinkSnapshot:
    snr = link_snr_db(params, pathloss_db(distance, params.carrier_freq, state), rx_gain)
    return LinkSnapshot(a, b, float(distance), state, snr, spectral_efficiency(snr, params.se_cap))
