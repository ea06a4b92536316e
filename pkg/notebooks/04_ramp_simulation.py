"""Time-domain load ramp and the two static CoI estimates.

The estimates are algebraic maps of injection rates, while the machine CoI
dip comes from integrating the power imbalance over the inertia, so the
estimates barely move. This script prints both for inspection.

Run: python3 notebooks/04_ramp_simulation.py
"""
import numpy as np

from freqflux import compare_estimators, ieee14, parse_event, simulate, solve_power_flow

net = ieee14()
op = solve_power_flow(net)
traj = simulate(net, [parse_event("ramp:bus=4,rate=0.1,t0=10,dur=10", net)], dt=0.005, t_end=40.0, op=op)
for t in (0, 10, 12, 15, 20, 25, 40):
    k = int(round(t / traj.dt))
    print(
        f"t={t:5.1f}s  CoI - 1: {traj.omega_coi_true[k] - 1:+.2e}  full est. - 1: {traj.omega_coi_est_full[k] - 1:+.2e}"
        f"  simplified est. - 1: {traj.omega_coi_est_simplified[k] - 1:+.2e}"
    )
rep = compare_estimators(traj, net, op)
print(f"RMS error full {rep.rms_full:.6e}, simplified {rep.rms_simplified:.6e} pu")
print(f"divider reading vs machine CoI, max gap {rep.divider_max_error:.2e} pu")
