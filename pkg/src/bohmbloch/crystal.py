"""Crystal description, electron scattering factors and potential coefficients.

All reciprocal vectors here live in the crystal Cartesian frame (x, y, z
along the cube axes) in 1/Angstrom, with phases written as exp(2 pi i g.r).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import constants as const

__all__ = [
    "ScatteringParametrization",
    "CrystalCell",
    "ElectronKinematics",
    "PotentialCoefficient",
    "KIRKLAND_CU",
    "build_cell",
    "fcc_cell",
    "get_preset",
    "PRESETS",
    "parse_crystal_text",
    "load_crystal_file",
    "cell_hash",
    "reciprocal_vector",
    "scattering_factor",
    "structure_factor",
    "electron_kinematics",
    "potential_coefficient",
    "potential_coefficient_U",
    "potential_coefficients",
    "real_space_potential",
    "electrostatic_force",
]

_WRAP_TOL = 1e-9


@dataclass(frozen=True)
class ScatteringParametrization:
    """Three Lorentzian plus three Gaussian terms for one element.

    ``A`` in 1/Angstrom, ``B`` in 1/Angstrom^2, ``C`` in Angstrom and ``D``
    in Angstrom^2. The resulting scattering factor is in Angstrom.
    """

    element: str
    A: tuple[float, float, float]
    B: tuple[float, float, float]
    C: tuple[float, float, float]
    D: tuple[float, float, float]

    def __post_init__(self):
        for name in ("A", "B", "C", "D"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != 3:
                raise ValueError(f"{name} needs exactly three values, got {len(vals)}")
            object.__setattr__(self, name, vals)
        if min(self.B) <= 0 or min(self.D) <= 0:
            raise ValueError("B_k and D_k must be strictly positive")

    def __call__(self, g_sq):
        return scattering_factor(self, g_sq)


KIRKLAND_CU = ScatteringParametrization(
    element="Cu",
    A=(0.358774531, 1.76181348, 0.636905053),
    B=(0.106153463, 1.01640995, 15.3659093),
    C=(0.00744930667, 0.189002347, 0.229619589),
    D=(0.0385345989, 0.398427790, 0.901419843),
)


@dataclass(frozen=True)
class CrystalCell:
    """Cubic cell with a single-species basis.

    Attributes
    ----------
    lattice_constant : float
        Cube edge ``a`` in Angstrom.
    element : str
        Element symbol shared by every basis atom.
    basis : tuple of (x, y, z)
        Fractional coordinates in [0, 1).
    params : ScatteringParametrization
        Electron scattering parametrization of ``element``.
    """

    lattice_constant: float
    element: str
    basis: tuple[tuple[float, float, float], ...]
    params: ScatteringParametrization = field(repr=False)

    @property
    def cell_volume(self) -> float:
        return self.lattice_constant**3

    @property
    def positions(self) -> np.ndarray:
        """Fractional basis coordinates as an (N, 3) array."""
        return np.array(self.basis, dtype=float)

    @property
    def basis_atoms(self) -> list[tuple[str, tuple[float, float, float]]]:
        return [(self.element, p) for p in self.basis]


def _wrap_fraction(v: float) -> float:
    if not math.isfinite(v):
        raise ValueError(f"non-finite fractional coordinate {v!r}")
    if -_WRAP_TOL < v < 0.0 or 1.0 - _WRAP_TOL < v <= 1.0:
        v = 0.0
    if not 0.0 <= v < 1.0:
        raise ValueError(f"fractional coordinate {v!r} outside [0, 1)")
    return float(v)


def build_cell(lattice_constant: float, basis: Iterable[Sequence[float]],
               element: str = "Cu",
               params: ScatteringParametrization | None = None) -> CrystalCell:
    """Validate inputs and return a :class:`CrystalCell`.

    Coordinates within 1e-9 of a cell boundary are wrapped onto 0; anything
    else outside [0, 1) is rejected.
    """
    a = float(lattice_constant)
    if not a > 0 or not math.isfinite(a):
        raise ValueError(f"lattice constant must be positive, got {lattice_constant!r}")
    rows = []
    for row in basis:
        row = tuple(row)
        if len(row) != 3:
            raise ValueError(f"basis position needs three fractions, got {row!r}")
        rows.append(tuple(_wrap_fraction(float(v)) for v in row))
    if not rows:
        raise ValueError("basis must contain at least one atom")
    if params is None:
        if element != "Cu":
            raise ValueError(f"no built-in scattering parametrization for {element!r}")
        params = KIRKLAND_CU
    if params.element != element:
        raise ValueError(f"parametrization is for {params.element!r}, cell element is {element!r}")
    return CrystalCell(a, element, tuple(rows), params)


FCC_BASIS = ((0.0, 0.0, 0.0), (0.5, 0.5, 0.0), (0.5, 0.0, 0.5), (0.0, 0.5, 0.5))


def fcc_cell(lattice_constant: float = 3.615, element: str = "Cu",
             params: ScatteringParametrization | None = None) -> CrystalCell:
    return build_cell(lattice_constant, FCC_BASIS, element, params)


PRESETS = {
    "Cu-fcc": lambda: fcc_cell(3.615, "Cu", KIRKLAND_CU),
}


def get_preset(name: str) -> CrystalCell:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown crystal preset {name!r}; known: {sorted(PRESETS)}") from None


def parse_crystal_text(text: str) -> CrystalCell:
    """Build a cell from the line-oriented crystal description.

    Recognised keys are ``lattice_a_angstrom``, ``element``, ``basis`` and
    ``parametrization``. Multi-row values (basis, parametrization) continue
    on indented lines, one row of numbers per line::

        lattice_a_angstrom = 3.615
        element = Cu
        basis =
            0 0 0
            0.5 0.5 0
        parametrization =
            0.358774531 0.106153463 0.00744930667 0.0385345989
            ...

    Each parametrization row is one (A, B, C, D) triple member, three rows
    in total.
    """
    from .textconf import parse_sections

    doc = parse_sections(text, allow_rows=True)
    entries = doc.get("", {})
    known = {"lattice_a_angstrom", "element", "basis", "parametrization"}
    for key, ent in entries.items():
        if key not in known:
            raise ValueError(f"line {ent.line}: unknown crystal key {key!r}")
    for key in ("lattice_a_angstrom", "basis"):
        if key not in entries:
            raise ValueError(f"missing required crystal key {key!r}")
    a = float(entries["lattice_a_angstrom"].value)
    element = entries["element"].value if "element" in entries else "Cu"
    basis = [[float(t) for t in row.split()] for row in entries["basis"].rows]
    params = None
    if "parametrization" in entries:
        ent = entries["parametrization"]
        rows = [[float(t) for t in row.split()] for row in ent.rows]
        if len(rows) != 3 or any(len(r) != 4 for r in rows):
            raise ValueError(f"line {ent.line}: parametrization needs 3 rows of A B C D")
        cols = list(zip(*rows))
        params = ScatteringParametrization(element, *cols)
    return build_cell(a, basis, element, params)


def load_crystal_file(path) -> CrystalCell:
    with open(path, encoding="utf-8") as fh:
        return parse_crystal_text(fh.read())


def cell_hash(cell: CrystalCell) -> str:
    """Stable sha256 of the cell geometry and parametrization."""
    p = cell.params
    parts = [repr(cell.lattice_constant), cell.element, repr(cell.basis),
             repr((p.A, p.B, p.C, p.D))]
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


def reciprocal_vector(cell: CrystalCell, hkl) -> np.ndarray:
    """Cartesian reciprocal vector (h, k, l)/a in 1/Angstrom."""
    return np.asarray(hkl, dtype=float) / cell.lattice_constant


def scattering_factor(params: ScatteringParametrization, g_sq):
    """Electron scattering factor f(|g|^2) in Angstrom.

    Accepts scalars or arrays; raises on negative ``g_sq``.
    """
    g_sq = np.asarray(g_sq, dtype=float)
    if np.any(g_sq < 0):
        raise ValueError("g_sq must be non-negative")
    f = np.zeros_like(g_sq)
    for a, b, c, d in zip(params.A, params.B, params.C, params.D):
        f = f + a / (g_sq + b) + c * np.exp(-d * g_sq)
    return f if f.ndim else float(f)


def structure_factor(cell: CrystalCell, hkl, params: ScatteringParametrization | None = None) -> complex:
    """F_g = sum over basis of f(|g|^2) exp(-2 pi i g.n), in Angstrom."""
    params = cell.params if params is None else params
    hkl = np.asarray(hkl, dtype=float)
    g = hkl / cell.lattice_constant
    f = scattering_factor(params, float(g @ g))
    phases = np.exp(-2j * np.pi * (cell.positions @ hkl))
    return complex(f * phases.sum())


@dataclass(frozen=True)
class ElectronKinematics:
    """Beam energy and derived wavelength quantities.

    ``k0`` is 1/wavelength (no 2 pi). ``gamma_rel`` is 1 + E/(m0 c^2).
    When ``relativistic_potential_scaling`` is set, potential coefficients
    and the particle mass carry the factor ``gamma_rel``.
    """

    energy_kev: float
    wavelength: float
    k0: float
    gamma_rel: float
    relativistic_potential_scaling: bool = True

    @property
    def mass_factor(self) -> float:
        return self.gamma_rel if self.relativistic_potential_scaling else 1.0

    @property
    def hbar2_over_2m(self) -> float:
        """hbar^2/(2m) in eV Angstrom^2 for the selected mass."""
        return const.HBAR2_OVER_2M0 / self.mass_factor

    @property
    def h_over_m(self) -> float:
        """h/m in m^2/s for the selected mass."""
        return const.H_OVER_M0 / self.mass_factor


def electron_kinematics(energy_kev: float, relativistic_potential_scaling: bool = True) -> ElectronKinematics:
    """Relativistic de Broglie wavelength and wavenumber for ``energy_kev``."""
    energy_kev = float(energy_kev)
    if not energy_kev > 0:
        raise ValueError(f"energy must be positive, got {energy_kev!r}")
    ev = energy_kev * 1e3 * const.E_CHARGE
    p = math.sqrt(2.0 * const.M0 * ev * (1.0 + ev / (2.0 * const.M0 * const.C_LIGHT**2)))
    lam = const.H / p / const.ANGSTROM
    gamma = 1.0 + energy_kev / const.M0C2_KEV
    return ElectronKinematics(energy_kev, lam, 1.0 / lam, gamma, bool(relativistic_potential_scaling))


@dataclass(frozen=True)
class PotentialCoefficient:
    """One Fourier component of the crystal potential.

    ``F`` is the structure factor (Angstrom), ``U`` the scaled coefficient
    entering the dynamical matrix (1/Angstrom^2) and ``V`` the potential
    coefficient in volts.
    """

    hkl: tuple[int, int, int]
    g: np.ndarray = field(repr=False, compare=False)
    F: complex
    U: complex
    V: complex


def potential_coefficient(cell: CrystalCell, hkl, kin: ElectronKinematics) -> PotentialCoefficient:
    hkl = tuple(int(v) for v in hkl)
    F = structure_factor(cell, hkl)
    if abs(F) < 1e-12 * len(cell.basis) * cell.params(0.0):
        F = 0j
    elif abs(F.imag) <= 1e-12 * abs(F):
        # centrosymmetric round-off; keeps the dynamical matrix real
        F = complex(F.real, 0.0)
    omega = cell.cell_volume
    U = kin.mass_factor * F / (math.pi * omega)
    V = const.VOLT_PER_F_OVER_VOLUME * F / omega
    g = reciprocal_vector(cell, hkl)
    g.setflags(write=False)
    return PotentialCoefficient(hkl, g, F, U, V)


def potential_coefficient_U(cell: CrystalCell, hkl, kin: ElectronKinematics) -> complex:
    """U_g = s F_g / (pi Omega), s = gamma_rel if scaling is on else 1."""
    return potential_coefficient(cell, hkl, kin).U


def potential_coefficients(cell: CrystalCell, hkls, kin: ElectronKinematics) -> tuple[PotentialCoefficient, ...]:
    return tuple(potential_coefficient(cell, hkl, kin) for hkl in hkls)


def _check_closed(coeffs: Sequence[PotentialCoefficient]) -> None:
    if not coeffs:
        raise ValueError("empty coefficient set")
    keys = {c.hkl for c in coeffs}
    for c in coeffs:
        if tuple(-v for v in c.hkl) not in keys:
            raise ValueError(f"coefficient set is not closed under g -> -g (missing {c.hkl} partner)")


def _fourier_terms(coeffs, r):
    r = np.atleast_2d(np.asarray(r, dtype=float))
    gs = np.array([c.g for c in coeffs])
    vg = np.array([c.V for c in coeffs], dtype=complex)
    phase = np.exp(2j * np.pi * (r @ gs.T))
    return gs, vg, phase


def real_space_potential(coeffs: Sequence[PotentialCoefficient], r, return_complex: bool = False):
    """Crystal potential in volts at Cartesian positions ``r`` (Angstrom).

    ``r`` may be a single (3,) point or an (N, 3) array. The coefficient set
    must contain -g for every g, so the sum is real up to rounding.
    """
    coeffs = tuple(coeffs)
    _check_closed(coeffs)
    single = np.ndim(r) == 1
    gs, vg, phase = _fourier_terms(coeffs, r)
    v = phase @ vg
    if not return_complex:
        v = v.real
    return v[0] if single else v


def electrostatic_force(coeffs: Sequence[PotentialCoefficient], r):
    """Force on an electron, e grad V, in eV/Angstrom.

    Points up the potential, i.e. toward the atom cores.
    """
    coeffs = tuple(coeffs)
    _check_closed(coeffs)
    single = np.ndim(r) == 1
    gs, vg, phase = _fourier_terms(coeffs, r)
    grad = ((phase * vg) @ (2j * np.pi * gs)).real
    return grad[0] if single else grad
