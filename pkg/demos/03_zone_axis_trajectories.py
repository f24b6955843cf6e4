"""Zone-axis Cu at 200 keV: Bethe beam selection and channelling.

Run: python demos/03_zone_axis_trajectories.py
"""
import numpy as np

from bohmbloch import blochwave as bw
from bohmbloch import hydro, scenarios as sc
from bohmbloch.crystal import electron_kinematics, get_preset

cu = get_preset("Cu-fcc")

# the strong/weak split depends on how the potential is scaled with energy
for rel in (True, False):
    kin = electron_kinematics(200.0, rel)
    rows = bw.scan_beam_counts(cu, kin, 80, 90, [1.0, 1.5, 1.8, 2.5])
    print("relativistic" if rel else "rest mass   ", [(r.g_max, r.n_strong, r.n_weak) for r in rows])

beams, sol = sc.zone_axis_setup(cu, energy_kev=200.0)
print("solve uses", beams.counts)

seeds = hydro.seed_line(cu, 50)
trajs = hydro.propagate_trajectories(sol, seeds, 500.0, 0.1, record=("Q",))
a = cu.lattice_constant
ends = np.array([t.points[-1, 0] for t in trajs])
print(f"{sum(t.completed for t in trajs)} of {len(trajs)} trajectories completed")

# the y = a/2 line crosses atom columns at x = 0, a/2 and a
def column_distance(x):
    return np.minimum.reduce([np.abs(x - c) for c in (0.0, a / 2, a)])


print(f"mean distance from nearest column: entrance {column_distance(seeds[:, 0]).mean():.3f} A, "
      f"exit {column_distance(ends).mean():.3f} A")
print(f"transverse displacement: max |dx| = {np.max(np.abs(ends - seeds[:, 0])):.3f} A")

Qs = np.concatenate([t.diagnostics["Q"] for t in trajs])
print(f"quantum potential along paths: {np.nanmin(Qs):.1f} .. {np.nanmax(Qs):.1f} eV")

# quantum force close to the central column pushes outward
c = a / 2
for rad in (0.05, 0.2, 0.5):
    f = hydro.quantum_force(sol, [c + rad, c, 300.0])
    print(f"r = {rad:4.2f} A from column: radial f_q = {f[0]:+9.1f} eV/A")
