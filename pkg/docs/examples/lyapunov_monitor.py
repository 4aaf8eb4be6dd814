"""Perturb the closed loop away from its operating point and watch it settle.

The monitor evaluates the composite Lyapunov function along the stored
trajectory and flags samples where it rises. Run with
``python3 docs/examples/lyapunov_monitor.py``.
"""
import numpy as np

from acdc_microgrid import DEFAULT_PARAMS, Disturbances
from acdc_microgrid.equilibrium import feasible_reference_hint, solve_equilibrium
from acdc_microgrid.lyapunov import lasalle_distance, monitor
from acdc_microgrid.simulator import constant_scenario, run

d = Disturbances(V_PV=600.0, V_B=700.0, V_S=1200.0, R_L=50.0)
r = feasible_reference_hint(d, DEFAULT_PARAMS, p_ac=390.0, x1_star=598.0)
e = solve_equilibrium(r, d, DEFAULT_PARAMS)

x0 = e.x_star + np.array([1, 2, 3, -1, 2, -2, 1, 1, 2, 1, 0.05, 0.05], dtype=float)
tr = run(constant_scenario(r, d, 0.3, initial_state=x0, decimate=100))
rep = monitor(tr)

V = rep.certificates.V_total
print(f"{len(tr)} samples over {tr.t[-1]:g} s")
print(f"V_total: {V[0]:.3e} -> {V[-1]:.3e}")
print(f"decrease violations among checked samples: {100 * rep.violation_fraction:.3f} %")
print(f"largest V78 derivative error vs closed form: {rep.eq28_max_error:.1e}")
dist = lasalle_distance(tr)
print(f"distance of (x2, x5, x10, x9) to the operating point: {dist[0]:.3f} -> {dist[-1]:.2e}")
