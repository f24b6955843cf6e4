"""Two-beam Pendelloesung for Cu(200) and what the trajectories do.

Run: python demos/02_two_beam_pendelloesung.py
"""
import numpy as np

from bohmbloch import blochwave as bw
from bohmbloch import hydro, scenarios as sc
from bohmbloch.crystal import get_preset

cu = get_preset("Cu-fcc")

for E in (200.0, 30.0):
    rep = sc.extinction_report(cu, (2, 0, 0), E)
    for conv, r in rep.items():
        print(f"{E:5.0f} keV {conv:12s} xi_200 = {r['xi_angstrom']:7.1f} A "
              f"(reference {r['reference_angstrom']}, {r['relative_discrepancy']:+.1%})")

beams, sol = sc.two_beam_setup(cu, (2, 0, 0), 200.0, at_bragg=True)
g = beams.beams[1]
xi = bw.extinction_distance(g.U, beams.incident_k, g.g)
z = np.linspace(0, 2 * xi, 9)
print("\nz/xi   I_000    I_200")
for zi, (i0, ig) in zip(z, bw.beam_intensities(sol, z)):
    print(f"{zi / xi:4.2f}  {i0:.5f}  {ig:.5f}")

# at the Bragg angle the flow sweeps sideways and back with period xi
trajs = hydro.propagate_trajectories(sol, hydro.seed_line(cu, 10), 500.0, 0.1)
print("\nseed x (A)  x at 500 A")
for t in trajs:
    print(f"{t.points[0, 0]:9.4f}  {t.points[-1, 0]:9.4f}  {t.status}")

# normal incidence: g far from Bragg, weak oscillation, nearly straight paths
_, sol_n = sc.two_beam_setup(cu, (2, 0, 0), 200.0, at_bragg=False)
print("\nnormal incidence max I_200 over 0-500 A:",
      f"{bw.beam_intensities(sol_n, np.linspace(0, 500, 501))[:, 1].max():.4f}")
