"""Build a scenario in code, save it as YAML, and run it.

A 1 s run with a load step at 0.2 s and a reference change at 0.25 s.
Run with ``python3 docs/examples/custom_scenario.py [out.yaml]``; the saved
file can be fed to ``acdc-microgrid run``.
"""
import sys

import numpy as np

from acdc_microgrid import DEFAULT_PARAMS, Disturbances
from acdc_microgrid.equilibrium import feasible_reference_hint, solve_equilibrium
from acdc_microgrid.scenario_file import parse_scenario, write_scenario
from acdc_microgrid.schedules import Segment, constant_schedule
from acdc_microgrid.simulator import Scenario, run

d = Disturbances(V_PV=600.0, V_B=700.0, V_S=1200.0, R_L=50.0)
r0 = feasible_reference_hint(d, DEFAULT_PARAMS, p_ac=390.0, x1_star=598.0)
r1 = feasible_reference_hint(Disturbances(600.0, 700.0, 1200.0, 40.0), DEFAULT_PARAMS, p_ac=390.0,
                             x1_star=598.0)

refs, dist = constant_schedule(r0, d)
dist["R_L"] = [Segment(0.0, "step", value=50.0, t_step=0.2, after=40.0)]
sc = Scenario(1.0, refs + [(0.25, r1)], dist, interval=0.05, decimate=1000,
              initial_state=solve_equilibrium(r0, d, DEFAULT_PARAMS).x_star)

path = sys.argv[1] if len(sys.argv) > 1 else "custom_scenario.yaml"
write_scenario(sc, path)
assert parse_scenario(path) == sc

tr = run(sc)
x9 = tr.column("x9")
print(f"saved {path}; {len(tr)} samples")
print(f"bus voltage range {x9.min():.3f} .. {x9.max():.3f} V")
# between the load step and the reference change the supercapacitor carries the extra load
print(f"supercapacitor current x8 at 0.24 s: {tr.x[np.searchsorted(tr.t, 0.24), 7]:+.3f} A")
print(f"x8 at the end: {tr.x[-1, 7]:+.2e} A")
