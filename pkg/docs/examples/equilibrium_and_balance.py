"""Steady states, the bus power balance, and what happens when it does not close.

Run with ``python3 docs/examples/equilibrium_and_balance.py``.
"""
from acdc_microgrid import DEFAULT_PARAMS, Disturbances, ReferenceSet
from acdc_microgrid.equilibrium import (check_power_balance, feasible_reference_hint,
                                        solve_equilibrium)

d = Disturbances(V_PV=600.0, V_B=700.0, V_S=1200.0, R_L=50.0)

# references that close the bus balance while exporting 390 W on the d axis
r = feasible_reference_hint(d, DEFAULT_PARAMS, p_ac=1.5 * 325.0 * 0.8, x1_star=598.0)
e = solve_equilibrium(r, d, DEFAULT_PARAMS)
print("consistent references:", r)
print("  bus voltage x9* =", e.x_star[8], "V; battery current x6* =", round(e.x_star[5], 4), "A")
print("  steady inputs u* =", e.u_star.round(5))
print(f"  relative residual {e.relative_residual:.1e}, "
      f"balance residual {check_power_balance(e, DEFAULT_PARAMS, d):.1e} A")

# raise the battery voltage target by 2 V: the battery delivers less, and the
# supercapacitor has to make up the difference
short = ReferenceSet(r.x1_star, r.x4_star + 2.0, r.x9_star, r.x11_star, r.x12_star)
e2 = solve_equilibrium(short, d, DEFAULT_PARAMS)
print(f"\nx4* + 2 V leaves {check_power_balance(e2, DEFAULT_PARAMS, d):.2f} A for the supercapacitor")
