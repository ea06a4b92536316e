"""CoI weights from the frequency divider.

Run: python3 notebooks/03_coi_weights.py
"""
import numpy as np

from freqflux import build_divider, coi_weights, ieee14
from freqflux.coi import bus_from_machine_speeds, coi_from_machines

net = ieee14()
div = build_divider(net)
w = coi_weights(div, net.machines)
print("c per bus:")
for bid, c in zip(net.bus_ids, w.c):
    print(f"  bus {bid:2d}: {c:+.4f}")
print(f"alpha = {w.alpha:.4f}; c^T 1 + alpha = {w.c.sum() + w.alpha:.15f}")

# bus frequencies produced by arbitrary machine speeds give back the CoI
speeds = 1 + 1e-3 * np.array([1.0, -0.5, 0.2, 0.0, -1.0])
bus = bus_from_machine_speeds(div, speeds)
print(f"CoI from machines {coi_from_machines(net.machines, speeds):.8f}, from bus frequencies {w(bus):.8f}")
