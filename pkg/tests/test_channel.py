import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from v2xric.channel import LOS, NLOS, LinkBudgetParams, link_snr_db, max_range_m, noise_power_dbm, pathloss_db, \
    snapshot, spectral_efficiency

dist = st.floats(1.0001, 5000.0)
freq = st.floats(0.5, 100.0)


def test_pathloss_examples():
    assert pathloss_db(1.0, 28.0, LOS) == pytest.approx(38.77 + 18.2 * math.log10(28), abs=1e-9)
    assert pathloss_db(1.0, 28.0, LOS) == pytest.approx(65.11, abs=0.01)
    assert pathloss_db(100.0, 28.0, LOS) == pytest.approx(98.51, abs=0.01)
    assert pathloss_db(100.0, 28.0, NLOS) == pytest.approx(124.20, abs=0.01)


@given(dist, dist, freq, st.sampled_from([LOS, NLOS]))
def test_pathloss_increasing(d1, d2, fc, state):
    if d1 < d2:
        assert pathloss_db(d1, fc, state) < pathloss_db(d2, fc, state)


@given(st.floats(1.5, 5000.0), freq)
def test_nlos_above_los(d, fc):
    assert pathloss_db(d, fc, NLOS) > pathloss_db(d, fc, LOS)


def test_nlos_los_crossover_below_two_metres():
    # the two coefficient sets cross just above 1 m; below that NLOS is the smaller one
    d = 10 ** ((1.92 - 0.7 * math.log10(28.0)) / 13.3)
    assert 1.1 < d < 1.2
    assert pathloss_db(d, 28.0, NLOS) == pytest.approx(pathloss_db(d, 28.0, LOS), abs=1e-2)


def test_noise_examples():
    assert noise_power_dbm(1.0, 0.0) == pytest.approx(-174.0)
    assert noise_power_dbm(100e6, 9.0) == pytest.approx(-85.0, abs=0.01)
    assert noise_power_dbm(400e6, 7.0) == pytest.approx(-81.0, abs=0.05)
    with pytest.raises(ValueError):
        noise_power_dbm(0.0, 9.0)


def test_snr_examples():
    p = LinkBudgetParams()
    assert link_snr_db(p, 23.0, 0.0) == pytest.approx(85.0, abs=1e-9)
    assert link_snr_db(p, 98.51, 18.06) == pytest.approx(27.55, abs=0.01)
    assert link_snr_db(p, np.inf) == -np.inf
    assert spectral_efficiency(-np.inf) == 0.0


def test_spectral_efficiency_examples():
    assert abs(spectral_efficiency(0.0) - 1.0) <= 1e-12
    assert spectral_efficiency(10.0) == pytest.approx(math.log2(11.0), abs=1e-4)
    assert spectral_efficiency(40.0) == 7.4


@given(st.floats(-200, 200), st.floats(-200, 200))
def test_spectral_efficiency_monotone_bounded(a, b):
    lo, hi = sorted((a, b))
    assert 0.0 <= spectral_efficiency(lo) <= spectral_efficiency(hi) <= 7.4


@given(st.floats(-10.0, 40.0), st.floats(0.0, 20.0))
def test_max_range_inverts_snr(snr_min, gain):
    p = LinkBudgetParams()
    r = max_range_m(p, snr_min, gain)
    if r > 1.0:
        assert link_snr_db(p, pathloss_db(r, p.carrier_freq, LOS), gain) == pytest.approx(snr_min, abs=1e-6)


def test_snapshot_fields():
    s = snapshot(LinkBudgetParams(), 1, 2, 100.0, LOS, 18.06)
    assert s.snr_db == pytest.approx(27.55, abs=0.01)
    assert 0.0 <= s.spectral_efficiency <= 7.4
