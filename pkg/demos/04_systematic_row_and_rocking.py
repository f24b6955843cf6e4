"""Systematic row g = (100) and a rocking curve.

(100) itself is forbidden in FCC, so only the even members couple.
Run: python demos/04_systematic_row_and_rocking.py
"""
import numpy as np

from bohmbloch import hydro, scenarios as sc
from bohmbloch.crystal import get_preset

cu = get_preset("Cu-fcc")
beams, sol = sc.systematic_row_setup(cu, (1, 0, 0), 3, 200.0)
for b in beams.beams:
    print(b.hkl, b.tag, f"s = {b.s:+.5f} 1/A, U = {b.U.real:.5f}")

trajs = hydro.propagate_trajectories(sol, hydro.seed_line(cu, 50), 500.0, 0.1)
x = np.stack([t.points[:, 0] for t in trajs], axis=1)
print("ordering preserved at every depth:", bool(np.all(np.diff(x, axis=1) > 0)))

curve = sc.rocking_curve(cu, (2, 0, 0), 2, 200.0, 300.0, (-1.0, 1.0), 21)
print("\nk_t/g  " + "  ".join(f"{str(h):>11s}" for h in curve.hkls))
for t, row in zip(curve.kt_over_g, curve.intensities):
    print(f"{t:+5.2f}  " + "  ".join(f"{v:11.5f}" for v in row))
