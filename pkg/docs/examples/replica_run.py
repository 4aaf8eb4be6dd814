"""Run the bundled 20 s replica scenario and print its summary.

Takes about half a minute on one core. Equivalent to
``acdc-microgrid run <bundled replica.yaml> --out replica_out`` without
writing files. Run with ``python3 docs/examples/replica_run.py``.
"""
import time

from acdc_microgrid.cli import summarize_trajectory
from acdc_microgrid.scenario_file import bundled_path, load_bundled
from acdc_microgrid.simulator import run

sc = load_bundled("replica")
print(f"scenario file: {bundled_path()}")
t0 = time.perf_counter()
tr = run(sc)
print(f"simulated {sc.t_end:g} s at dt = {sc.dt:g} s in {time.perf_counter() - t0:.1f} s\n")
print(summarize_trajectory(tr, sc.params, sc.gains).to_text())
