"""Ready-made diffraction conditions: zone axis, two-beam, systematic row.

Each ``*_setup`` returns ``(BeamSet, BlochSolution)``. Tilts are applied to
the incident wave vector, never to the crystal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import blochwave as bw
from . import hydro
from .crystal import (CrystalCell, ElectronKinematics, ScatteringParametrization,
                      build_cell, electron_kinematics, electrostatic_force,
                      potential_coefficients)

__all__ = [
    "KINDS", "QUANTITIES", "ScenarioConfig", "FieldGrid", "RockingCurve",
    "zone_axis_setup", "two_beam_setup", "systematic_row_setup", "rocking_curve",
    "field_map", "vacuum_cell", "split_statistic", "extinction_report",
    "REFERENCE_EXTINCTION", "search_beam_counts", "BeamCountSearch",
]

KINDS = ("zone_axis", "two_beam", "two_beam_normal", "systematic_row", "rocking")
QUANTITIES = ("intensity", "speed", "Q", "fq", "fe")
UNITS = {"intensity": "rel", "speed": "m_per_s", "Q": "eV",
         "fq": "eV_per_angstrom", "fe": "eV_per_angstrom"}

#: published two-beam extinction distances in Angstrom, keyed by (keV, hkl)
REFERENCE_EXTINCTION = {(200.0, (2, 0, 0)): 431.1, (30.0, (2, 0, 0)): 166.9}


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved run description; see :mod:`bohmbloch.runio` for the text form."""

    kind: str = "zone_axis"
    energy_kev: float = 200.0
    g_hkl: tuple[int, int, int] = (2, 0, 0)
    zone_uvw: tuple[int, int, int] = (0, 0, 1)
    n_max: int = 3
    at_bragg: bool = True
    kt_per_aa: tuple[float, float] = (0.0, 0.0)
    thickness_aa: float = 500.0
    relativistic: bool = True
    crystal: str = "Cu-fcc"
    g_max_aa_inv: float = 1.8
    c_s: float = 80.0
    c_w: float = 90.0
    dz_aa: float = 0.1
    rk2_variant: str = "midpoint"
    seeding_mode: str = "line"
    seeding_n: int = 50
    y_frac: float = 0.5
    quantities: tuple[str, ...] = ()
    grid_n: int = 32
    raster: bool = False
    n_z: int = 500
    kt_over_g_range: tuple[float, float] = (-1.0, 1.0)
    rocking_steps: int = 41

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if not self.energy_kev > 0:
            raise ValueError("energy_kev must be positive")
        if not self.thickness_aa > 0:
            raise ValueError("thickness_aa must be positive")
        if not self.dz_aa > 0:
            raise ValueError("dz_aa must be positive")
        if not self.c_s < self.c_w:
            raise ValueError(f"c_s ({self.c_s}) must be below c_w ({self.c_w})")
        if not self.g_max_aa_inv > 0:
            raise ValueError("g_max_aa_inv must be positive")
        if self.rk2_variant not in ("midpoint", "heun"):
            raise ValueError(f"unknown rk2_variant {self.rk2_variant!r}")
        if self.seeding_mode not in ("grid", "line"):
            raise ValueError(f"unknown seeding mode {self.seeding_mode!r}")
        if self.seeding_n < (2 if self.seeding_mode == "line" else 1):
            raise ValueError("too few seeds")
        for q in self.quantities:
            if q not in QUANTITIES:
                raise ValueError(f"unknown output quantity {q!r}; expected one of {QUANTITIES}")
        if self.n_max < 0 or self.grid_n < 1 or self.n_z < 2 or self.rocking_steps < 2:
            raise ValueError("n_max >= 0, grid_n >= 1, n_z >= 2 and rocking_steps >= 2 required")


def vacuum_cell(lattice_constant: float = 3.615) -> CrystalCell:
    """FCC geometry with a zero scattering factor: every U_g vanishes."""
    zero = ScatteringParametrization("X", (0, 0, 0), (1, 1, 1), (0, 0, 0), (1, 1, 1))
    return build_cell(lattice_constant, [(0, 0, 0)], "X", zero)


def _perp_axis(zone) -> tuple[int, int, int]:
    z = np.asarray(zone, int)
    for cand in ((1, 0, 0), (0, 1, 0), (1, -1, 0), (0, 1, -1), (1, 0, -1)):
        if np.asarray(cand) @ z == 0:
            return cand
    x = np.cross(z, (1, 0, 0)) if z[1] or z[2] else np.cross(z, (0, 1, 0))
    return tuple(int(v) for v in x)


def _orientation(zone, x_axis=None) -> bw.Orientation:
    zone = tuple(int(v) for v in zone)
    return bw.Orientation(zone, x_axis or _perp_axis(zone))


def _solve(beamset: bw.BeamSet):
    return beamset, bw.solve_bloch(bw.assemble_dynamical_matrix(beamset), beamset)


def _kin(energy_kev, relativistic, kin):
    return kin if kin is not None else electron_kinematics(energy_kev, relativistic)


def zone_axis_setup(cell: CrystalCell, zone=(0, 0, 1), energy_kev: float = 200.0,
                    c_s: float = 80.0, c_w: float = 90.0, g_max: float = 1.8,
                    relativistic: bool = True, k_t=(0.0, 0.0),
                    kin: ElectronKinematics | None = None):
    """Generate, Bethe-partition and solve a zone-axis beam set.

    The zone axis is mapped onto the beam direction (+z); ``k_t`` optionally
    tilts the incident beam.
    """
    kin = _kin(energy_kev, relativistic, kin)
    orient = _orientation(zone)
    k = bw.tilted_incident(kin, k_t)
    cand = bw.generate_beams(cell, kin, orient, g_max, incident_k=k)
    return _solve(bw.partition_bethe(cand, c_s, c_w))


def two_beam_setup(cell: CrystalCell, g_hkl=(2, 0, 0), energy_kev: float = 200.0,
                   at_bragg: bool = True, relativistic: bool = True, zone=(0, 0, 1),
                   kin: ElectronKinematics | None = None):
    """Beams {000, g} only; at Bragg the incident beam gets k_t = -g/2."""
    kin = _kin(energy_kev, relativistic, kin)
    orient = _orientation(zone, None)
    g_hkl = tuple(int(v) for v in g_hkl)
    if np.asarray(g_hkl) @ np.asarray(orient.zone) != 0:
        raise ValueError(f"g = {g_hkl} is not perpendicular to the beam direction {orient.zone}")
    g = orient.to_lab(np.asarray(g_hkl, float) / cell.lattice_constant)
    k_t = -0.5 * g[:2] if at_bragg else np.zeros(2)
    k = bw.tilted_incident(kin, k_t)
    origin = bw._make_beam(cell, kin, orient, k, (0, 0, 0), bw.STRONG)
    beam_g = bw._make_beam(cell, kin, orient, k, g_hkl)
    if beam_g.U == 0:
        raise ValueError(f"reflection {g_hkl} is forbidden (zero structure factor)")
    beams = (origin, replace(beam_g, tag=bw.STRONG))
    k.setflags(write=False)
    return _solve(bw.BeamSet(beams, k, cell, kin, orient))


def systematic_row_setup(cell: CrystalCell, g_hkl=(1, 0, 0), n_max: int = 3,
                         energy_kev: float = 200.0, k_t=(0.0, 0.0), relativistic: bool = True,
                         zone=(0, 0, 1), kin: ElectronKinematics | None = None):
    """Beams n*g for |n| <= n_max; zero structure factor members stay eliminated."""
    kin = _kin(energy_kev, relativistic, kin)
    orient = _orientation(zone)
    if np.asarray(g_hkl) @ np.asarray(orient.zone) != 0:
        raise ValueError(f"g = {tuple(g_hkl)} is not perpendicular to the beam direction")
    k = bw.tilted_incident(kin, k_t)
    cand = bw.generate_beams(cell, kin, orient, row=g_hkl, n_max=n_max, incident_k=k)
    beamset = bw.mark_all_strong(cand)
    beamset = replace(beamset, c_s=None, c_w=None)
    if len(beamset.strong) == 1 and n_max > 0:
        warnings.warn(f"systematic row {tuple(g_hkl)} has no allowed members up to n = {n_max}; "
                      "proceeding with the single transmitted beam", RuntimeWarning, stacklevel=2)
    return _solve(beamset)


class RockingCurve(NamedTuple):
    kt_over_g: np.ndarray
    hkls: list
    intensities: np.ndarray


def rocking_curve(cell: CrystalCell, g_hkl=(2, 0, 0), n_max: int = 1, energy_kev: float = 200.0,
                  thickness: float = 500.0, kt_over_g=(-1.0, 1.0), steps: int = 41,
                  relativistic: bool = True, zone=(0, 0, 1)) -> RockingCurve:
    """Exit intensities of a systematic row against tilt k_t = (k_t/g) * g.

    At k_t/g = +1/2 the -g reflection is exactly in the Bragg condition.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    kin = electron_kinematics(energy_kev, relativistic)
    orient = _orientation(zone)
    g = orient.to_lab(np.asarray(g_hkl, float) / cell.lattice_constant)
    ratios = np.linspace(float(kt_over_g[0]), float(kt_over_g[1]), steps)
    rows, hkls = [], None
    for t in ratios:
        _, sol = systematic_row_setup(cell, g_hkl, n_max, energy_kev, t * g[:2], zone=zone, kin=kin)
        hkls = sol.hkls
        rows.append(bw.beam_intensities(sol, thickness))
    return RockingCurve(ratios, hkls, np.array(rows))


@dataclass(frozen=True)
class FieldGrid:
    """Scalar or vector field on an n x n grid of cell-face centres at depth z.

    ``values`` is (n, n) or (n, n, 3), indexed ``[iy, ix]``. Node points
    carry NaN.
    """

    quantity: str
    unit: str
    z: float
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray = field(repr=False)

    @property
    def extent(self) -> float:
        return float(self.x[-1] + self.x[0])


def _coefficients_for(sol: bw.BlochSolution):
    cell = sol.beamset.cell
    kin = sol.kin
    hkls = set()
    for h in sol.hkls:
        hkls.add(h)
        hkls.add(tuple(-v for v in h))
    return potential_coefficients(cell, sorted(hkls), kin)


def field_map(sol: bw.BlochSolution, quantity: str, z: float, n: int = 32,
              h_fd: float = 1e-3) -> FieldGrid:
    """Evaluate one of ``intensity``, ``speed``, ``Q``, ``fq``, ``fe`` over the cell face."""
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}")
    cell = sol.beamset.cell
    a = cell.lattice_constant
    u = (np.arange(n) + 0.5) * a / n
    X, Y = np.meshgrid(u, u, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel(), np.full(n * n, float(z))])
    if quantity == "intensity":
        phi, _, _ = sol.envelope(pts, 0)
        vals = np.abs(phi) ** 2
    elif quantity == "speed":
        vals = np.linalg.norm(hydro.velocity_field(sol, pts, nodes="nan"), axis=1)
    elif quantity == "Q":
        vals = hydro.quantum_potential(sol, pts, nodes="nan")
    elif quantity == "fq":
        vals = hydro.quantum_force(sol, pts, h_fd, nodes="nan")
    else:
        orient = sol.beamset.orientation
        f = electrostatic_force(_coefficients_for(sol), orient.to_crystal(pts))
        vals = orient.to_lab(f)
    shape = (n, n, 3) if np.ndim(vals) == 2 else (n, n)
    vals = np.asarray(vals, float).reshape(shape)
    vals.setflags(write=False)
    return FieldGrid(quantity, UNITS[quantity], float(z), u, u.copy(), vals)


def split_statistic(values) -> tuple[float, np.ndarray]:
    """Two-group k-means in 1D: returns (gap / within-group spread, labels).

    The optimal 1D split is contiguous in sorted order, so every cut is
    tried. Spread is the larger of the two group standard deviations.
    """
    v = np.asarray(values, float)
    order = np.argsort(v, kind="stable")
    s = v[order]
    best = None
    for i in range(1, len(s)):
        a, b = s[:i], s[i:]
        cost = a.var() * len(a) + b.var() * len(b)
        if best is None or cost < best[0]:
            best = (cost, i)
    i = best[1]
    a, b = s[:i], s[i:]
    spread = max(a.std(), b.std())
    gap = b[0] - a[-1]
    ratio = math.inf if spread == 0 else gap / spread
    labels = np.zeros(len(v), int)
    labels[order[i:]] = 1
    return float(ratio), labels


def extinction_report(cell: CrystalCell, g_hkl=(2, 0, 0), energy_kev: float = 200.0) -> dict:
    """Two-beam extinction distance at exact Bragg under both potential scalings.

    Where a published reference value exists for (energy, g), the relative
    discrepancy of each convention is included.
    """
    out = {}
    ref = REFERENCE_EXTINCTION.get((float(energy_kev), tuple(g_hkl)))
    for label, rel in (("relativistic", True), ("rest_mass", False)):
        beams, sol = two_beam_setup(cell, g_hkl, energy_kev, True, rel)
        g = beams.beams[1]
        xi = bw.extinction_distance(g.U, beams.incident_k, g.g)
        entry = {"xi_angstrom": xi, "U_inv_aa2": g.U.real}
        if ref is not None:
            entry["reference_angstrom"] = ref
            entry["relative_discrepancy"] = (xi - ref) / ref
        out[label] = entry
    return out


class BeamCountSearch(NamedTuple):
    target: tuple[int, int]
    exact: list
    nearest: dict


def search_beam_counts(cell: CrystalCell, energy_kev: float, target: tuple[int, int],
                       thresholds: Sequence[tuple[float, float]] = ((80.0, 90.0),),
                       g_max_values: Sequence[float] | None = None, zone=(0, 0, 1)) -> BeamCountSearch:
    """Scan cutoff, Bethe thresholds and potential scaling for given beam counts.

    Returns every (convention, c_s, c_w, g_max) hitting ``target`` exactly
    and the nearest configuration by |d strong| + |d weak|.
    """
    if g_max_values is None:
        g_max_values = np.round(np.arange(0.05, 3.0 + 1e-9, 0.05), 10)
    orient = _orientation(zone)
    exact, nearest, best = [], None, None
    for label, rel in (("relativistic", True), ("rest_mass", False)):
        kin = electron_kinematics(energy_kev, rel)
        for c_s, c_w in thresholds:
            rows = bw.scan_beam_counts(cell, kin, c_s, c_w, g_max_values, orient)
            hits, near = bw.match_beam_counts(rows, *target)
            for r in hits:
                exact.append({"convention": label, "c_s": c_s, "c_w": c_w, "g_max": r.g_max})
            d = abs(near.n_strong - target[0]) + abs(near.n_weak - target[1])
            if best is None or d < best:
                best = d
                nearest = {"convention": label, "c_s": c_s, "c_w": c_w, "g_max": near.g_max,
                           "n_strong": near.n_strong, "n_weak": near.n_weak, "distance": d}
    return BeamCountSearch(tuple(target), exact, nearest)
