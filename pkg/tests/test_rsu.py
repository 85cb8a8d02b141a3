import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from v2xric.rsu import UNSERVED, AttachSnapshot, baseline_assign, check_capacity, forecast_load, lost_traffic, \
    rsu_loads, served, xapp_assign
from v2xric.scenario import RsuSite, VehicleState

A, B = 101, 102


def _snap(n, rsus, power, reach=None):
    power = np.asarray(power, dtype=float)
    reach = np.ones_like(power, dtype=bool) if reach is None else np.asarray(reach, dtype=bool)
    return AttachSnapshot(tuple(range(1, n + 1)), tuple(rsus), power, reach)


def three_cav():
    rsus = (RsuSite(A, (0.0, 0.0), 2), RsuSite(B, (100.0, 0.0), 2))
    return rsus, _snap(3, rsus, [[-50, -60]] * 3)


def test_baseline_examples():
    one = (RsuSite(A, (0.0, 0.0), 1),)
    assert baseline_assign([1], one, _snap(1, one, [[-50]])) == {1: A}
    rsus, snap = three_cav()
    assert baseline_assign([1, 2, 3], rsus, snap) == {1: A, 2: A, 3: UNSERVED}
    assert baseline_assign([1], one, _snap(1, one, [[-50]], [[False]])) == {1: UNSERVED}


def test_xapp_examples():
    rsus, snap = three_cav()
    a = xapp_assign([1, 2, 3], rsus, snap)
    assert a == {1: A, 2: A, 3: B}
    assert lost_traffic([a], rsus)[0] == 0.0
    wide = tuple(RsuSite(r.id, r.position, 10) for r in rsus)
    assert served(xapp_assign([1, 2, 3], wide, snap)) == 3
    sym = _snap(4, rsus, [[-50, -50]] * 4)
    a = xapp_assign([1, 2, 3, 4], rsus, sym)
    assert a == {1: A, 2: A, 3: B, 4: B}
    assert xapp_assign([], rsus, sym) == {}


def _objective(assign, rsus, f):
    loads = rsu_loads(assign, rsus)
    return served(assign), float(np.sum((loads + f) ** 2))


def _enumerate(cavs, rsus, snap, f):
    # exhaustive search over every capacity- and range-feasible assignment
    best = None
    options = [[UNSERVED] + [r.id for k, r in enumerate(rsus) if snap.in_range[i, k]] for i in range(len(cavs))]
    for choice in itertools.product(*options):
        a = dict(zip(cavs, choice))
        if not check_capacity(a, rsus):
            continue
        s, q = _objective(a, rsus, f)
        if best is None or (s, -q) > (best[0], -best[1]):
            best = (s, q)
    return best


@given(st.integers(1, 5), st.integers(1, 3), st.integers(0, 2**32), st.booleans())
@settings(max_examples=200, deadline=None)
def test_xapp_matches_enumeration(n, r, seed, with_forecast):
    rng = np.random.default_rng(seed)
    rsus = tuple(RsuSite(A + k, (0.0, 0.0), int(rng.integers(0, 4))) for k in range(r))
    power = rng.uniform(-90, -40, (n, r))
    reach = rng.random((n, r)) < 0.7
    snap = _snap(n, rsus, power, reach)
    cavs = list(range(1, n + 1))
    forecast = rng.integers(0, 4, (r, 3)).astype(float) if with_forecast else None
    f = np.zeros(r) if forecast is None else forecast.mean(axis=1)
    a = xapp_assign(cavs, rsus, snap, forecast)
    assert check_capacity(a, rsus)
    for c, rid in a.items():
        if rid is not UNSERVED:
            assert reach[c - 1, [x.id for x in rsus].index(rid)]
    s, q = _objective(a, rsus, f)
    bs, bq = _enumerate(cavs, rsus, snap, f)
    assert s == bs and q == pytest.approx(bq, abs=1e-6)
    assert s >= served(baseline_assign(cavs, rsus, snap))


@given(st.integers(1, 12), st.integers(1, 4), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_lost_traffic_monotone_in_capacity(n, r, seed):
    rng = np.random.default_rng(seed)
    power = rng.uniform(-90, -40, (n, r))
    reach = rng.random((n, r)) < 0.6
    cavs = list(range(1, n + 1))
    prev = {"base": math.inf, "xapp": math.inf}
    for cap in (0, 1, 2, 3, 5, 8, math.inf):
        rsus = tuple(RsuSite(A + k, (0.0, 0.0), cap) for k in range(r))
        snap = _snap(n, rsus, power, reach)
        for name, fn in (("base", baseline_assign), ("xapp", xapp_assign)):
            a = fn(cavs, rsus, snap)
            assert check_capacity(a, rsus)
            lost = lost_traffic([a], rsus)[0]
            assert lost <= prev[name] + 1e-12
            prev[name] = lost
    # unlimited capacity: only out-of-range CAVs are lost, and with full coverage nothing is
    rsus = tuple(RsuSite(A + k, (0.0, 0.0), math.inf) for k in range(r))
    full = _snap(n, rsus, power)
    assert lost_traffic([baseline_assign(cavs, rsus, full)], rsus)[0] == 0.0
    assert lost_traffic([xapp_assign(cavs, rsus, full)], rsus)[0] == 0.0


def _ranger(rsu_pos, radius):
    pos = np.asarray(rsu_pos, dtype=float)
    return lambda pts: np.linalg.norm(pts[:, None, :] - pos[None, :, :], axis=2) <= radius


def test_forecast_examples():
    rsus = (RsuSite(A, (0.0, 0.0), 2),)
    still = [VehicleState(1, (50.0, 0.0), 0.0, (), (1.0, 0.0)), VehicleState(2, (500.0, 0.0), 0.0, (), (1.0, 0.0))]
    f = forecast_load(still, rsus, 5, 1.0, _ranger([(0.0, 0.0)], 100.0))
    assert f.tolist() == [[1.0] * 5]
    mover = [VehicleState(1, (150.0, 0.0), 10.0, ((0.0, 0.0),), (-1.0, 0.0))]
    f = forecast_load(mover, rsus, 6, 1.0, _ranger([(0.0, 0.0)], 100.0))
    assert f.tolist() == [[0, 0, 0, 0, 1, 1]]
    one = forecast_load(mover, rsus, 1, 5.0, _ranger([(0.0, 0.0)], 100.0))
    assert one.tolist() == [[1.0]]
    with pytest.raises(ValueError):
        forecast_load(mover, rsus, 0, 1.0, _ranger([(0.0, 0.0)], 100.0))


def test_forecast_steers_assignment():
    rsus = (RsuSite(A, (0.0, 0.0), 2), RsuSite(B, (100.0, 0.0), 2))
    snap = _snap(1, rsus, [[-50, -60]])
    assert xapp_assign([1], rsus, snap) == {1: A}
    busy_a = np.array([[2.0] * 5, [0.0] * 5])
    assert xapp_assign([1], rsus, snap, busy_a) == {1: B}


def test_lost_traffic_examples():
    rsus, snap = three_cav()
    ok = {1: A, 2: A, 3: B}
    assert lost_traffic([ok], rsus) == (0.0, pytest.approx(0.75))
    ten = tuple(RsuSite(A + k, (0.0, 0.0), 10) for k in range(1))
    epoch = {c: (A if c < 9 else UNSERVED) for c in range(10)}
    assert lost_traffic([epoch] * 4, ten)[0] == pytest.approx(10.0)
    base = baseline_assign([1, 2, 3], rsus, snap)
    trace = [base, base, ok, base, ok]
    # three epochs lose one of three units, two lose none: 3 / 15
    assert lost_traffic(trace, rsus)[0] == pytest.approx(20.0)
    with pytest.raises(ValueError):
        lost_traffic([{}], rsus)
    inf = (RsuSite(A, (0.0, 0.0), math.inf),)
    assert lost_traffic([{1: A}], inf) == (0.0, 0.0)
