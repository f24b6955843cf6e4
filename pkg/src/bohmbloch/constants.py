"""Physical constants in the unit system used throughout the package.

Lengths are in Angstrom, reciprocal lengths in 1/Angstrom, energies in eV
unless a name says otherwise.
"""

from scipy import constants as _sc

H = _sc.h
HBAR = _sc.hbar
M0 = _sc.m_e
E_CHARGE = _sc.e
C_LIGHT = _sc.c

#: electron rest energy in keV
M0C2_KEV = M0 * C_LIGHT**2 / E_CHARGE / 1e3

#: hbar^2 / (2 m0) in eV * Angstrom^2 (about 3.80998)
HBAR2_OVER_2M0 = HBAR**2 / (2.0 * M0) / E_CHARGE * 1e20

#: h^2 / (2 pi m0 e) in V * Angstrom^2 (about 47.878); V_g = this * F_g / volume
VOLT_PER_F_OVER_VOLUME = H**2 / (2.0 * _sc.pi * M0 * E_CHARGE) * 1e20

#: h / m0 in m^2/s; multiply by a wave vector in 1/m to get a velocity
H_OVER_M0 = H / M0

ANGSTROM = 1e-10
