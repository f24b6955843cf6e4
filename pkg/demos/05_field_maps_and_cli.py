"""Field maps at the exit face, and the same through the run pipeline.

Run: python demos/05_field_maps_and_cli.py [out_dir]
The equivalent command line is ``bohmbloch fields --out-dir out``.
"""
import sys

import numpy as np

from bohmbloch import runio, scenarios as sc
from bohmbloch.crystal import get_preset

cu = get_preset("Cu-fcc")
_, sol = sc.zone_axis_setup(cu, energy_kev=200.0)

for q in sc.QUANTITIES:
    grid = sc.field_map(sol, q, 500.0, 16)
    v = grid.values if grid.values.ndim == 2 else np.linalg.norm(grid.values, axis=-1)
    iy, ix = np.unravel_index(np.nanargmax(v), v.shape)
    print(f"{q:9s} [{grid.unit:15s}] range {np.nanmin(v):11.4g} .. {np.nanmax(v):11.4g}, "
          f"max at ({grid.x[ix]:.2f}, {grid.y[iy]:.2f}) A")

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
cfg = runio.parse_config("""
[scenario]
kind = two_beam
energy_kev = 200
g_hkl = 2 0 0
thickness_aa = 200
[seeding]
n = 10
[output]
quantities = intensity, Q
grid_n = 16
""")
man = runio.run(cfg, out)
print(f"\nrun {man.run_id} wrote {sorted(man.files)} to {out}/")
print("xi from manifest:", f"{man.derived['extinction_distance_angstrom']:.2f} A")
