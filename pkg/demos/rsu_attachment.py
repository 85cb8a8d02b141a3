"""RSU attachment under capacity limits.

Three CAVs all hear RSU A best, RSU B a little weaker, and each RSU serves
two.  The power-greedy baseline drops the third CAV; the xApp serves all
three.  A forecast of RSU A filling up pushes a lone CAV towards B.
"""

import numpy as np

from v2xric.rsu import AttachSnapshot, baseline_assign, forecast_load, lost_traffic, xapp_assign
from v2xric.scenario import RsuSite, VehicleState

rsus = (RsuSite(1, (0.0, 0.0), 2), RsuSite(2, (120.0, 0.0), 2))
snap = AttachSnapshot((10, 11, 12), rsus, np.array([[-55.0, -62.0]] * 3), np.ones((3, 2), dtype=bool))
base = baseline_assign([10, 11, 12], rsus, snap)
xapp = xapp_assign([10, 11, 12], rsus, snap)
print("baseline", base, f"lost {lost_traffic([base], rsus)[0]:.1f} %")
print("xapp    ", xapp, f"lost {lost_traffic([xapp], rsus)[0]:.1f} %")

# two CAVs approaching RSU A from the far side, forecast over five 1 s epochs
incoming = [VehicleState(k, (-110.0 - 5 * k, 0.0), 12.0, ((0.0, 0.0),), (1.0, 0.0)) for k in range(2)]
reach = lambda pts: np.linalg.norm(pts[:, None, :] - np.array([[0.0, 0.0], [120.0, 0.0]])[None], axis=2) <= 100.0
forecast = forecast_load(incoming, rsus, 5, 1.0, reach)
print("forecast in-range counts per epoch:\n", forecast)
lone = AttachSnapshot((20,), rsus, np.array([[-55.0, -62.0]]), np.ones((1, 2), dtype=bool))
print("lone CAV without forecast:", xapp_assign([20], rsus, lone),
      " with forecast:", xapp_assign([20], rsus, lone, forecast))
