"""Control-plane traffic of the relay xApp.

Every blockage event costs two uplink messages (link failure, path request)
and one downlink command per hop of the new path, 1000 bits each, averaged
over the observation window.  A short simulated run is followed by the
closed-form stress case.
"""

import tempfile
from pathlib import Path

from v2xric.config import parse_config
from v2xric.experiments import run_experiment
from v2xric.ric import OverheadLedger, account_relay_event, rate_kbps

cfg = parse_config("duration_s = 20\nsweep = 0, 15, 25\n", "overhead")
with tempfile.TemporaryDirectory() as out:
    _, summary, _ = run_experiment(cfg, out)
    print(Path(summary).read_text())

led = OverheadLedger(window=300.0)
for _ in range(40 * 300):
    account_relay_event(led, 2)
ul, dl = rate_kbps(led)
print(f"40 events/s with 2-hop paths: UL {ul:.0f} kbps + DL {dl:.0f} kbps = {ul + dl:.0f} kbps")
