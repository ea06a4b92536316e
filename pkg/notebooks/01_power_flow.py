"""Solve the bundled IEEE 14-bus case and look at the operating point.

Run: python3 notebooks/01_power_flow.py
"""
import numpy as np

from freqflux import ieee14, solve_power_flow
from freqflux.powerflow import total_load

net = ieee14()
op = solve_power_flow(net)
print(f"{net.name}: {net.n} buses, {len(net.branches)} branches, {len(net.machines)} machines")
print(f"Newton-Raphson converged in {op.meta['iterations']} iterations (mismatch {op.meta['mismatch']:.1e} pu)")
print(f"total load {total_load(net):.3f} pu on a {net.base_mva:.0f} MVA base")
print("\nbus    v [pu]   theta [deg]   p [pu]    q [pu]")
for bid, v, th, p, q in zip(net.bus_ids, op.v, np.degrees(op.theta), op.p, op.q):
    print(f"{bid:3d}  {v:8.4f}  {th:11.3f}  {p:8.4f}  {q:8.4f}")
