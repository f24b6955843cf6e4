"""Beam selection, dynamical matrix, eigen-solution and wave evaluation.

Geometry lives in a laboratory frame whose z axis is the beam direction
(depth into the foil, entrance face at z = 0). For the default orientation
the laboratory frame coincides with the crystal cube axes.

The transmitted wave is written as a plane-wave carrier times a periodic
envelope,

    Psi(r) = exp(2 pi i k.r) * Phi(r),
    Phi(r) = sum_g phi_g(z) exp(2 pi i g.r),
    phi_g(z) = sum_j alpha_j C_gj exp(2 pi i gamma_j z),

so that quantities insensitive to the carrier (amplitude, quantum
potential, transverse velocity) are evaluated without cancelling the large
k0 terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .crystal import CrystalCell, ElectronKinematics, potential_coefficient

__all__ = [
    "STRONG", "WEAK", "ELIMINATED", "CANDIDATE",
    "Orientation", "Beam", "BeamSet", "BlochSolution", "WaveSample",
    "BetheError", "tilted_incident", "generate_beams", "excitation_error",
    "partition_bethe", "mark_all_strong", "assemble_dynamical_matrix",
    "solve_bloch", "wave_at", "beam_intensities", "delta_I",
    "extinction_distance", "scan_beam_counts", "match_beam_counts",
    "BeamCountRow",
]

STRONG = "strong"
WEAK = "weak"
ELIMINATED = "eliminated"
CANDIDATE = "candidate"

#: smallest |2 k0 s_w| treated as a perturbation, 1/Angstrom^2
BETHE_FLOOR = 1e-6


class BetheError(ValueError):
    """A weak beam is too close to the Ewald sphere to be folded in."""

    def __init__(self, hkl, denom):
        self.hkl = hkl
        super().__init__(f"weak beam {hkl} has |2 k0 s| = {abs(denom):.3g} below "
                         f"{BETHE_FLOOR:g}; retag it strong")


@dataclass(frozen=True)
class Orientation:
    """Crystal orientation: ``zone`` maps onto lab z, ``x_axis`` onto lab x."""

    zone: tuple[int, int, int] = (0, 0, 1)
    x_axis: tuple[int, int, int] = (1, 0, 0)

    def __post_init__(self):
        z = np.asarray(self.zone, float)
        x = np.asarray(self.x_axis, float)
        if not np.any(z) or not np.any(x):
            raise ValueError("zone and x_axis must be non-zero")
        if abs(z @ x) > 1e-12:
            raise ValueError(f"x_axis {self.x_axis} is not perpendicular to zone {self.zone}")

    @property
    def rotation(self) -> np.ndarray:
        """Rows are the lab x, y, z unit vectors in crystal coordinates."""
        z = np.asarray(self.zone, float)
        z = z / np.linalg.norm(z)
        x = np.asarray(self.x_axis, float)
        x = x / np.linalg.norm(x)
        return np.array([x, np.cross(z, x), z])

    def to_lab(self, v):
        return np.asarray(v, float) @ self.rotation.T

    def to_crystal(self, v):
        return np.asarray(v, float) @ self.rotation


@dataclass(frozen=True)
class Beam:
    hkl: tuple[int, int, int]
    g: np.ndarray = field(compare=False)
    s: float
    U: complex
    tag: str = CANDIDATE

    @property
    def is_origin(self) -> bool:
        return not any(self.hkl)


@dataclass(frozen=True)
class BeamSet:
    """Ordered beams with tags; index 0 is always (000).

    ``generate_beams`` returns a set whose tags are still ``candidate`` or
    ``eliminated``; :func:`partition_bethe` assigns ``strong``/``weak``.
    """

    beams: tuple[Beam, ...]
    incident_k: np.ndarray = field(compare=False)
    cell: CrystalCell = field(repr=False)
    kin: ElectronKinematics = field(repr=False)
    orientation: Orientation = Orientation()
    c_s: float | None = None
    c_w: float | None = None

    def tagged(self, tag: str) -> tuple[Beam, ...]:
        return tuple(b for b in self.beams if b.tag == tag)

    @property
    def strong(self) -> tuple[Beam, ...]:
        return self.tagged(STRONG)

    @property
    def weak(self) -> tuple[Beam, ...]:
        return self.tagged(WEAK)

    @property
    def counts(self) -> dict[str, int]:
        out = {STRONG: 0, WEAK: 0, ELIMINATED: 0, CANDIDATE: 0}
        for b in self.beams:
            out[b.tag] += 1
        return out

    def U(self, hkl) -> complex:
        """Coupling coefficient for an arbitrary (difference) reflection."""
        return potential_coefficient(self.cell, hkl, self.kin).U


def tilted_incident(kin: ElectronKinematics, k_t=(0.0, 0.0)) -> np.ndarray:
    """Incident wave vector with transverse part ``k_t``, renormalised to k0."""
    kt = np.asarray(k_t, float).reshape(2)
    kz2 = kin.k0**2 - kt @ kt
    if kz2 <= 0:
        raise ValueError(f"transverse component {kt} exceeds k0 = {kin.k0}")
    return np.array([kt[0], kt[1], math.sqrt(kz2)])


def excitation_error(incident_k, g) -> float:
    """s_g = -(2 k.g + |g|^2) / (2 |k|); positive inside the Ewald sphere."""
    k = np.asarray(incident_k, float)
    g = np.asarray(g, float)
    kn = float(np.linalg.norm(k))
    if kn == 0:
        raise ValueError("incident wave vector is zero")
    return float(-(2.0 * k @ g + g @ g) / (2.0 * kn))


def _make_beam(cell, kin, orientation, k, hkl, tag=None) -> Beam:
    hkl = tuple(int(v) for v in hkl)
    g = orientation.to_lab(np.asarray(hkl, float) / cell.lattice_constant)
    g.setflags(write=False)
    if not any(hkl):
        return Beam(hkl, g, 0.0, 0j, tag or CANDIDATE)
    U = potential_coefficient(cell, hkl, kin).U
    if tag is None:
        tag = ELIMINATED if U == 0 else CANDIDATE
    return Beam(hkl, g, excitation_error(k, g), U, tag)


def _sort_key(hkl):
    return (sum(v * v for v in hkl), tuple(-v for v in hkl))


def generate_beams(cell: CrystalCell, kin: ElectronKinematics,
                   orientation: Orientation | None = None, g_max: float | None = None, *,
                   row=None, n_max: int | None = None, incident_k=None) -> BeamSet:
    """Enumerate candidate beams.

    Zone-axis mode (default) takes every zero-order Laue zone reflection with
    |g| <= ``g_max``. Row mode (``row`` and ``n_max`` given) takes n*row for
    -n_max <= n <= n_max. Reflections with zero structure factor are tagged
    eliminated but kept in the list.
    """
    orientation = orientation or Orientation()
    k = tilted_incident(kin) if incident_k is None else np.asarray(incident_k, float)
    if row is not None:
        if n_max is None or n_max < 0:
            raise ValueError("row mode needs n_max >= 0")
        row = np.asarray(row, int)
        hkls = [tuple(int(v) for v in n * row) for n in range(-n_max, n_max + 1)]
    else:
        if g_max is None or not g_max > 0:
            raise ValueError(f"g_max must be positive, got {g_max!r}")
        zone = np.asarray(orientation.zone, int)
        a = cell.lattice_constant
        n = int(math.ceil(g_max * a)) + 1
        rng = np.arange(-n, n + 1)
        H, K, L = np.meshgrid(rng, rng, rng, indexing="ij")
        hkl_all = np.stack([H.ravel(), K.ravel(), L.ravel()], axis=1)
        keep = (hkl_all @ zone == 0) & (np.einsum("ij,ij->i", hkl_all, hkl_all) <= (g_max * a) ** 2 * (1 + 1e-12))
        hkls = [tuple(int(v) for v in r) for r in hkl_all[keep]]
    hkls = sorted(set(hkls) | {(0, 0, 0)}, key=_sort_key)
    beams = tuple(_make_beam(cell, kin, orientation, k, h) for h in hkls)
    k = k.copy()
    k.setflags(write=False)
    return BeamSet(beams, k, cell, kin, orientation)


def _bethe_ratio(beam: Beam, kin: ElectronKinematics) -> float:
    if beam.U == 0:
        return math.inf
    return abs(beam.s) / (kin.wavelength * abs(beam.U))


def partition_bethe(candidates: BeamSet, c_s: float, c_w: float) -> BeamSet:
    """Tag beams strong (ratio <= c_s), weak (c_s < ratio <= c_w) or eliminated.

    The ratio is |s_g| / (lambda |U_g|). Beams beyond ``c_w`` are eliminated
    together with the zero structure factor ones; (000) is always strong.
    """
    if not c_s < c_w:
        raise ValueError(f"need c_s < c_w, got c_s={c_s}, c_w={c_w}")
    if not candidates.beams or not candidates.beams[0].is_origin:
        raise ValueError("candidate list must start with (000)")
    kin = candidates.kin
    out = []
    for b in candidates.beams:
        if b.is_origin:
            tag = STRONG
        elif b.U == 0:
            tag = ELIMINATED
        else:
            ratio = _bethe_ratio(b, kin)
            tag = STRONG if ratio <= c_s else WEAK if ratio <= c_w else ELIMINATED
        out.append(replace(b, tag=tag))
    return replace(candidates, beams=tuple(out), c_s=float(c_s), c_w=float(c_w))


def mark_all_strong(candidates: BeamSet) -> BeamSet:
    """Every non-eliminated candidate strong, no perturbation (full solve)."""
    out = tuple(replace(b, tag=STRONG if (b.is_origin or b.U != 0) else ELIMINATED)
                for b in candidates.beams)
    return replace(candidates, beams=out, c_s=math.inf, c_w=math.inf)


def assemble_dynamical_matrix(beamset: BeamSet) -> np.ndarray:
    """Hermitian strong x strong matrix with Bethe corrections from weak beams.

    Diagonal 2 k0 s_g, off-diagonal U_{g-h}; each weak beam w subtracts
    U_{g-w} U_{w-h} / (2 k0 s_w) from every entry (g, h).
    """
    strong = beamset.strong
    if not strong:
        raise ValueError("no strong beams")
    weak = beamset.weak
    k0 = beamset.kin.k0
    hs = np.array([b.hkl for b in strong])
    cache: dict[tuple, complex] = {}

    def U(d) -> complex:
        d = tuple(int(v) for v in d)
        if not any(d):
            return 0j
        if d not in cache:
            cache[d] = beamset.U(d)
        return cache[d]

    n = len(strong)
    A = np.zeros((n, n), dtype=complex)
    for i in range(n):
        A[i, i] = 2.0 * k0 * strong[i].s
        for j in range(i + 1, n):
            A[i, j] = U(hs[i] - hs[j])
            A[j, i] = np.conj(A[i, j])
    for w in weak:
        denom = 2.0 * k0 * w.s
        if abs(denom) < BETHE_FLOOR:
            raise BetheError(w.hkl, denom)
        hw = np.asarray(w.hkl)
        u_gw = np.array([U(h - hw) for h in hs])
        # U_{w-h} = conj(U_{h-w}) for a real potential
        A -= np.outer(u_gw, np.conj(u_gw)) / denom
    if np.all(A.imag == 0):
        A = A.real
    return A


class WaveSample(NamedTuple):
    """Wave value and derivatives at one or many points.

    ``grad`` has shape (..., 3); ``hess`` (..., 3, 3) or None when the
    requested order is below 2.
    """

    psi: np.ndarray
    grad: np.ndarray | None
    hess: np.ndarray | None


@dataclass(frozen=True)
class BlochSolution:
    """Immutable result of a dynamical solve.

    ``C`` has rows for strong beams and columns for Bloch states, ordered by
    descending ``gammas``. ``alphas`` match a unit plane wave at z = 0.
    """

    gammas: np.ndarray
    C: np.ndarray
    alphas: np.ndarray
    beams: tuple[Beam, ...]
    incident_k: np.ndarray
    kin: ElectronKinematics = field(repr=False)
    beamset: BeamSet | None = field(default=None, repr=False, compare=False)

    @property
    def hkls(self) -> list[tuple[int, int, int]]:
        return [b.hkl for b in self.beams]

    @property
    def g_lab(self) -> np.ndarray:
        return np.array([b.g for b in self.beams])

    @property
    def kinematics(self) -> ElectronKinematics:
        return self.kin

    def amplitudes(self, z, order: int = 0):
        """phi_g(z) and optionally its first two z-derivatives.

        Returns a list ``[phi, dphi, d2phi][:order + 1]``, each (..., G).
        """
        z = np.asarray(z, float)
        tp = 2j * np.pi * self.gammas
        E = np.exp(np.multiply.outer(z, tp))
        W = (self.C * self.alphas[None, :]).T
        out = [E @ W]
        if order >= 1:
            out.append((E * tp) @ W)
        if order >= 2:
            out.append((E * tp**2) @ W)
        return out

    def mean_density(self, z):
        """Cell-averaged |Psi|^2 at depth z.

        Equals the summed beam intensities, which is 1 for a unitary C and a
        plane-wave entrance condition.
        """
        return np.ones_like(np.asarray(z, float))

    def envelope(self, r, order: int = 0):
        """Periodic envelope Phi and its derivatives at points ``r`` (N, 3).

        Returns ``(phi, grad, hess)`` with shapes (N,), (N, 3), (N, 3, 3);
        entries above ``order`` are None.
        """
        r = np.atleast_2d(np.asarray(r, float))
        g = self.g_lab
        z = r[:, 2]
        if len(z) > 1 and np.all(z == z[0]):
            # common depth (trajectory stepping, field maps): one z evaluation
            amps = [a[None, :] for a in self.amplitudes(z[0], min(order, 2))]
        else:
            amps = self.amplitudes(z, min(order, 2))
        P = np.exp(2j * np.pi * (r @ g.T))
        a0 = amps[0] * P
        phi = a0.sum(axis=1)
        if order < 1:
            return phi, None, None
        tg = 2j * np.pi * g
        a1 = amps[1] * P
        grad = a0 @ tg
        grad[:, 2] += a1.sum(axis=1)
        if order < 2:
            return phi, grad, None
        a2 = amps[2] * P
        hess = np.einsum("ng,ga,gb->nab", a0, tg, tg)
        cross = a1 @ tg
        hess[:, :, 2] += cross
        hess[:, 2, :] += cross
        hess[:, 2, 2] += a2.sum(axis=1)
        return phi, grad, hess


def solve_bloch(A: np.ndarray, beamset: BeamSet) -> BlochSolution:
    """Diagonalise ``A`` and match a unit plane wave at the entrance face."""
    A = np.asarray(A)
    if not np.allclose(A, A.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("dynamical matrix is not Hermitian")
    try:
        vals, vecs = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = np.ascontiguousarray(vecs[:, order]).astype(complex)
    k0 = beamset.kin.k0
    gammas = vals / (2.0 * k0)
    alphas = np.conj(vecs[0, :])
    for arr in (gammas, vecs, alphas):
        arr.setflags(write=False)
    return BlochSolution(gammas, vecs, alphas, beamset.strong, beamset.incident_k,
                         beamset.kin, beamset)


def wave_at(sol: BlochSolution, r, order: int = 1) -> WaveSample:
    """Psi and (for ``order`` >= 1, 2) its analytic derivatives at ``r``.

    ``r`` is a (3,) point or (N, 3) array in Angstrom.
    """
    single = np.ndim(r) == 1
    r = np.atleast_2d(np.asarray(r, float))
    phi, dphi, hphi = sol.envelope(r, order)
    k = np.asarray(sol.incident_k, float)
    tk = 2j * np.pi * k
    carrier = np.exp(r @ tk)
    psi = carrier * phi
    grad = hess = None
    if order >= 1:
        grad = carrier[:, None] * (np.multiply.outer(phi, tk) + dphi)
    if order >= 2:
        kk = np.outer(tk, tk)
        mixed = np.einsum("na,b->nab", dphi, tk)
        hess = carrier[:, None, None] * (phi[:, None, None] * kk + mixed
                                         + mixed.transpose(0, 2, 1) + hphi)
    if single:
        psi = psi[0]
        grad = None if grad is None else grad[0]
        hess = None if hess is None else hess[0]
    return WaveSample(psi, grad, hess)


def beam_intensities(sol: BlochSolution, z) -> np.ndarray:
    """|phi_g(z)|^2 per strong beam, columns ordered as ``sol.hkls``."""
    z = np.asarray(z, float)
    if np.any(z < 0):
        raise ValueError("depth must be non-negative")
    return np.abs(sol.amplitudes(z)[0]) ** 2


def delta_I(sol_full: BlochSolution, sol_reduced: BlochSolution, T: float, n_z: int = 500) -> float:
    """RMS intensity difference over the reduced strong beams and depth.

    Depths are n_z uniform samples in (0, T]; the depth sum divided by T is
    taken as the mean over these samples.
    """
    if not T > 0 or n_z < 2:
        raise ValueError("need T > 0 and n_z >= 2")
    index = {h: i for i, h in enumerate(sol_full.hkls)}
    try:
        cols = [index[h] for h in sol_reduced.hkls]
    except KeyError as exc:
        raise ValueError(f"beam {exc.args[0]} of the reduced solve is missing from the full solve") from None
    z = T * np.arange(1, n_z + 1) / n_z
    diff = beam_intensities(sol_full, z)[:, cols] - beam_intensities(sol_reduced, z)
    return float(np.sqrt(np.mean(diff**2)))


def extinction_distance(U_g: complex, k_vec, g, surface_normal=(0.0, 0.0, 1.0)) -> float:
    """xi_g = |k + g| cos(alpha) / |U_g|, alpha measured from the surface normal.

    Returns ``math.inf`` when ``U_g`` is zero (no coupling).
    """
    if U_g == 0:
        return math.inf
    kg = np.asarray(k_vec, float) + np.asarray(g, float)
    n = np.asarray(surface_normal, float)
    cos_a = abs(kg @ n) / (np.linalg.norm(kg) * np.linalg.norm(n))
    return float(np.linalg.norm(kg) * cos_a / abs(U_g))


class BeamCountRow(NamedTuple):
    g_max: float
    n_strong: int
    n_weak: int


def scan_beam_counts(cell: CrystalCell, kin: ElectronKinematics, c_s: float, c_w: float,
                     g_max_values: Sequence[float], orientation: Orientation | None = None,
                     incident_k=None) -> list[BeamCountRow]:
    """Strong/weak counts of the Bethe partition for each cutoff in ``g_max_values``."""
    g_max_values = [float(v) for v in g_max_values]
    cand = generate_beams(cell, kin, orientation, max(g_max_values), incident_k=incident_k)
    part = partition_bethe(cand, c_s, c_w)
    norms = np.array([np.linalg.norm(b.g) for b in part.beams])
    tags = np.array([b.tag for b in part.beams])
    rows = []
    for gm in g_max_values:
        inside = norms <= gm * (1 + 1e-12)
        rows.append(BeamCountRow(gm, int(np.sum(inside & (tags == STRONG))),
                                 int(np.sum(inside & (tags == WEAK)))))
    return rows


def match_beam_counts(rows: Sequence[BeamCountRow], n_strong: int, n_weak: int):
    """Rows hitting the target counts exactly, plus the nearest row.

    Distance is |d strong| + |d weak|; ties resolve to the smaller cutoff.
    """
    exact = [r for r in rows if r.n_strong == n_strong and r.n_weak == n_weak]
    nearest = min(rows, key=lambda r: (abs(r.n_strong - n_strong) + abs(r.n_weak - n_weak), r.g_max))
    return exact, nearest
