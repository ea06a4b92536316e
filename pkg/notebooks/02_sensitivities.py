"""Bus frequencies from injection rates: full sensitivities against the
short-circuit (no-load) approximation.

Run: python3 notebooks/02_sensitivities.py
"""
import numpy as np

from freqflux import bus_frequencies, ieee14, sensitivities_at, simplified_at, solve_power_flow
from freqflux.netmodel import scale_resistances
from freqflux.sensitivity import forward_rates, no_load_sensitivities

net = ieee14()
op = solve_power_flow(net)
sens = sensitivities_at(net, op)
print("conditioning at the solved point:", {k: f"{v:.3g}" for k, v in sens.meta.items() if k != "augmented"})

# forward map a random complex-frequency state to injection rates and back
rng = np.random.default_rng(0)
rho, omega = rng.normal(size=(2, net.n))
p_dot, q_dot = forward_rates(sens, rho, omega)
back = bus_frequencies(sens, p_dot, q_dot)
print(f"round-trip error: {max(np.abs(back.omega - omega).max(), np.abs(back.rho - rho).max()):.2e}")

# a 0.1 pu/s load ramp at bus 4 seen through H
p_dot = np.zeros(net.n)
p_dot[net.index(4)] = -0.1
w = bus_frequencies(sens, p_dot, np.zeros(net.n)).omega_pu(net.omega_base)
print("bus angle rates for a 0.1 pu/s ramp at bus 4 [pu]:", np.array2string(w, precision=2))

# as resistances vanish the no-load H approaches -B^-1 and K vanishes
for f in (1.0, 1e-2, 1e-6):
    lossy = scale_resistances(net, f)
    full = no_load_sensitivities(lossy)
    simp = simplified_at(lossy)
    print(f"r x {f:g}: ||K|| = {np.abs(full.K).sum(1).max():.2e}, ||H + B^-1|| = {np.abs(full.H + simp.B_inv).sum(1).max():.2e}")
