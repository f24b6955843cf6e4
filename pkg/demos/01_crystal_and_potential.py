"""Copper cell, scattering factors and the projected potential.

Run: python demos/01_crystal_and_potential.py
"""
import numpy as np

from bohmbloch.crystal import (electron_kinematics, get_preset, potential_coefficients,
                               real_space_potential, scattering_factor, structure_factor)

cu = get_preset("Cu-fcc")
print(f"a = {cu.lattice_constant} A, cell volume {cu.cell_volume:.4f} A^3, {len(cu.basis)} atoms")

# f falls off smoothly with |g|^2
for q in (0.0, 0.3061, 1.0, 4.0):
    print(f"f_Cu(|g|^2 = {q:6.4f}) = {scattering_factor(cu.params, q):.5f} A")

# mixed-parity reflections vanish for FCC
for hkl in [(1, 0, 0), (1, 1, 0), (1, 1, 1), (2, 0, 0), (2, 2, 0)]:
    print(hkl, f"F = {structure_factor(cu, hkl).real:+.5f} A")

for E in (30.0, 200.0):
    kin = electron_kinematics(E)
    print(f"{E:5.0f} keV: lambda = {kin.wavelength:.6f} A, k0 = {kin.k0:.3f} 1/A, gamma = {kin.gamma_rel:.5f}")

# potential in a (001) plane through the corner atoms, from a 3D coefficient set
kin = electron_kinematics(200.0)
rng = range(-4, 5)
coeffs = potential_coefficients(cu, [(h, k, l) for h in rng for k in rng for l in rng], kin)
u = np.linspace(0, cu.lattice_constant, 9)
X, Y = np.meshgrid(u, u)
V = real_space_potential(coeffs, np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])).reshape(X.shape)
np.set_printoptions(precision=1, suppress=True, linewidth=120)
print("V(x, y, z=0) in volts, corners and face centre are atoms:")
print(V)
