"""Relay selection on a thresholded link graph.

Five vehicles and one RSU; raising the required SNR prunes weak links, so
paths grow longer and finally break.  Among equal-hop paths the one with the
strongest weakest hop wins.
"""

from v2xric.relay import RELAYED, LinkGraph, connectivity_stats, min_hop_path

links = {
    ("car1", "car2"): 12.0, ("car2", "car5"): 24.0, ("car1", "car3"): 22.0,
    ("car3", "car4"): 19.0, ("car4", "car5"): 21.0, ("car1", "rsu"): 17.0, ("rsu", "car5"): 16.0,
}
nodes = {n for pair in links for n in pair}
for gamma in (0.0, 10.0, 15.0, 18.0, 20.0, 23.0):
    g = LinkGraph.from_edges(nodes, {k: w for k, w in links.items() if w >= gamma}, gamma)
    path = min_hop_path(g, "car1", "car5")
    conn = connectivity_stats([g], [("car1", "car5")], RELAYED)
    if path is None:
        print(f"gamma {gamma:4.1f} dB: no path")
    else:
        print(f"gamma {gamma:4.1f} dB: {' -> '.join(path.nodes)} ({path.hops} hops, "
              f"bottleneck {path.bottleneck_snr_db:.1f} dB), connectivity {conn.connectivity_fraction:.0f}")
