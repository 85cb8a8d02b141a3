"""Beam training: hill-climbing from the incumbent vs a position-aided sweep.

A receiver drifts across the field of view of a 16x16 codebook and is
blocked every few seconds; when it reappears it can be anywhere.  Both
trackers retrain after each blockage and whenever the realised gain falls
6 dB under the peak.  The gradient tracker pays nine slots per hill-climb
step, the xApp pays for its candidate list only.
"""

import numpy as np

from v2xric.beam import BeamCodebook, BeamTracker, all_gains_db

cb = BeamCodebook(16, 16)
gradient, xapp = BeamTracker(cb, "gradient"), BeamTracker(cb, "xapp")
print(f"codebook {cb.cardinality} beams, peak gain {cb.peak_gain_db:.2f} dB, xApp sweeps {xapp.k} candidates")

rng = np.random.default_rng(0)
az, el = -40.0, 0.0
for step in range(600):
    blockage_ended = step % 50 == 0
    if blockage_ended:
        az, el = rng.uniform(-45, 45), rng.uniform(-25, 25)
    az = min(az + 0.15, 45.0)
    # the xApp sees a slightly stale position report
    stale = (az - 0.15 + rng.normal(0, 0.3), el)
    gradient.step(True, (az, el), (az, el), blockage_ended, 800)
    xapp.step(True, (az, el), stale, blockage_ended, 800)

for name, t in (("gradient", gradient), ("xapp", xapp)):
    print(f"{name:9s} trainings {t.trainings:3d}  training slots {t.ledger.training_slots:5d}  "
          f"overhead {100 * t.ledger.overhead_fraction:.3f} %  full sweeps {t.recoveries}")
best = all_gains_db(cb, az, el).max()
print(f"final gains: gradient {all_gains_db(cb, az, el)[gradient.beam]:.2f} dB, "
      f"xapp {all_gains_db(cb, az, el)[xapp.beam]:.2f} dB, best {best:.2f} dB")
