"""Regenerate the bundled 20 s replica scenario.

References for each 1 s interval are chosen by the same rule a supervisory
controller would use: the PV port sits a fixed margin below the PV source
voltage, the inverter exports the requested active power, and the battery
reference closes the bus balance for the load seen over that interval.
Two intervals are deliberately mis-referenced (the battery is asked for
15 A less than needed) so that the supercapacitor has to carry the mismatch.

Usage: python tools/build_replica.py [output.yaml]
"""
import sys
from pathlib import Path

import numpy as np

from acdc_microgrid.equilibrium import feasible_reference_hint
from acdc_microgrid.plant import DEFAULT_PARAMS, Disturbances
from acdc_microgrid.scenario_file import write_scenario
from acdc_microgrid.schedules import Segment, evaluate
from acdc_microgrid.simulator import Scenario

T_END = 20.0
X9_STAR = 1000.0
V_LD = 325.0
I_D = 0.8                       # A, d-axis export current on [3, 14) s
EXPORT = (3.0, 14.0)
PV_MARGIN = [2.0, 2.0, 2.2, 2.2, 1.8, 1.8, 2.0, 2.0, 2.1, 2.1,
             1.9, 1.9, 2.0, 2.0, 2.2, 2.2, 1.8, 1.8, 2.0, 2.0]   # V below V_PV
MISREFERENCED = {9: 15.0, 10: 15.0}                            # interval -> A short


def disturbances():
    return {
        "V_PV": [Segment(0.0, "step", value=600.0, t_step=6.5, after=599.0)],
        "V_B": [Segment(0.0, "constant", value=700.0)],
        "V_S": [Segment(0.0, "ramp", value=1250.0, slope=-2.0)],
        "R_L": [Segment(0.0, "constant", value=50.0),
                Segment(4.0, "constant", value=40.0),
                Segment(8.0, "constant", value=55.0),
                Segment(10.5, "constant", value=45.0),
                Segment(12.0, "sine", value=50.0, slope=0.25, amplitude=2.5, frequency=0.5)],
        "v_ld": [Segment(0.0, "constant", value=V_LD)],
        "v_lq": [Segment(0.0, "constant", value=0.0)],
        "omega": [Segment(0.0, "constant", value=DEFAULT_PARAMS.omega)],
    }


def references(dist):
    refs = []
    for k in range(int(T_END)):
        t0 = float(k)
        # the supervisory layer sees the interval-average load and the PV voltage at t0
        ts = np.linspace(t0, t0 + 1.0, 1001)[:-1]
        g_load = np.mean([1.0 / evaluate(dist["R_L"], t) for t in ts])
        i_short = MISREFERENCED.get(k, 0.0)
        r_seen = 1.0 / (g_load - i_short / X9_STAR)
        d = Disturbances(V_PV=evaluate(dist["V_PV"], t0), V_B=700.0,
                         V_S=evaluate(dist["V_S"], t0), R_L=r_seen, v_ld=V_LD)
        i_d = I_D if EXPORT[0] <= t0 < EXPORT[1] else 0.0
        r = feasible_reference_hint(d, DEFAULT_PARAMS, p_ac=1.5 * V_LD * i_d, x9_star=X9_STAR,
                                    x1_star=d.V_PV - PV_MARGIN[k])
        refs.append((t0, r))
    return refs


def build():
    dist = disturbances()
    return Scenario(
        t_end=T_END, references=references(dist), disturbances=dist, decimate=500,
        name="replica",
        description=("20 s replica run: bus held at 1000 V, references every 1 s, "
                     "d-axis export on [3, 14) s, zero q-axis current, a 1 V PV step at "
                     "6.5 s, stepped load to 12 s then a sinusoid-on-ramp load, a slowly "
                     "falling supercapacitor voltage, and intervals [9, 11) s "
                     "mis-referenced by 15 A. Magnitudes are replica choices."))


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parents[1] / "src" / "acdc_microgrid" / "data" / "replica.yaml")
    write_scenario(build(), out)
    print(f"wrote {out}")
