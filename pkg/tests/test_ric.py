import pytest
from hypothesis import given, strategies as st

from v2xric.ric import COMMAND, DOWNLINK, REPORT, UPLINK, ControlMessage, ControlPlane, InvariantViolation, \
    LatencyModel, OverheadLedger, account_relay_event, deliver, rate_kbps


def _report(t, src="cav1", state_time=None, payload=None):
    return ControlMessage(REPORT, UPLINK, src, "ric", t, payload=payload, state_time=state_time)


def test_deliver_examples():
    assert deliver(_report(1.0), LatencyModel()) == pytest.approx(1.030)
    assert deliver(_report(1.0), LatencyModel(0.0)) == 1.0
    with pytest.raises(ValueError):
        LatencyModel(-0.1)
    with pytest.raises(ValueError):
        ControlMessage(REPORT, UPLINK, "a", "b", 0.0, size_bits=0)


def test_fifo_per_pair():
    plane = ControlPlane()
    a = plane.send(_report(1.000))
    b = plane.send(_report(1.001))
    assert (a, b) == pytest.approx((1.030, 1.031))
    # an out-of-order send on the same pair never overtakes
    c = plane.send(_report(0.990))
    assert c >= b


def test_account_relay_event_examples():
    led = account_relay_event(OverheadLedger(), 1)
    assert (led.ul_bits, led.dl_bits) == (2000, 1000)
    led = OverheadLedger()
    for _ in range(10):
        account_relay_event(led, 3)
    assert led.ul_bits + led.dl_bits == 50_000
    assert sum(rate_kbps(led)) == pytest.approx(0.1667, abs=1e-4)
    assert rate_kbps(OverheadLedger()) == (0.0, 0.0)
    with pytest.raises(ValueError):
        account_relay_event(OverheadLedger(), 0)


def test_rate_examples():
    assert rate_kbps(OverheadLedger(dl_bits=48_000_000))[1] == pytest.approx(160.0)
    assert rate_kbps(OverheadLedger(ul_bits=20_000))[0] == pytest.approx(0.0667, abs=1e-4)
    with pytest.raises(ValueError):
        rate_kbps(OverheadLedger(window=0.0))


@given(st.lists(st.integers(1, 12), max_size=200), st.floats(1.0, 1000.0))
def test_ledger_identities(hops, window):
    led = OverheadLedger(window=window)
    for h in hops:
        account_relay_event(led, h)
    assert led.ul_msgs == 2 * led.events == 2 * len(hops)
    assert led.dl_msgs == led.hops_total == sum(hops)
    ul, dl = rate_kbps(led)
    closed = len(hops) * (2 + (led.mean_hops if hops else 0)) / window
    assert ul + dl == pytest.approx(closed, rel=1e-9, abs=1e-12)
    if hops:
        assert (led.dl_bits > led.ul_bits) == (sum(hops) / len(hops) > 2)


class _Echo:
    subscription = frozenset({"str"})

    def __init__(self, stale=False):
        self.seen = []
        self.stale = stale

    def on_report(self, msg, now):
        self.seen.append(now)
        st = now if self.stale else msg.state_time
        return [ControlMessage(COMMAND, DOWNLINK, "ric", msg.src, now, payload="go", state_time=st)]


def test_xapp_round_trip_latency():
    plane = ControlPlane()
    xapp = _Echo()
    got = []
    plane.register_xapp(xapp)
    plane.register_endpoint("cav1", lambda m, now: got.append(now))
    plane.send(_report(1.0, state_time=1.0, payload="x"))
    plane.run_until(1.03)
    assert xapp.seen == [pytest.approx(1.03)] and got == []
    plane.run_until(2.0)
    assert got == [pytest.approx(1.06)]
    assert (plane.ledger.ul_msgs, plane.ledger.dl_msgs) == (1, 1)


def test_stale_state_rejected():
    plane = ControlPlane()
    plane.register_xapp(_Echo(stale=True))
    plane.send(_report(1.0, state_time=1.0, payload="x"))
    with pytest.raises(InvariantViolation) as err:
        plane.run_until(2.0)
    assert err.value.name == "xapp-state-staleness"


def test_missing_state_time_rejected():
    plane = ControlPlane()
    plane.register_xapp(_Echo())
    plane.send(_report(1.0, payload="x"))
    with pytest.raises(InvariantViolation):
        plane.run_until(2.0)
