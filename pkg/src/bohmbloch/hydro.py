"""Bohmian quantities of a stationary wave: velocity, quantum potential, force.

Everything here works on a *wave provider*: any object exposing
``envelope(r, order)`` (periodic envelope and derivatives, see
:meth:`bohmbloch.blochwave.BlochSolution.envelope`), ``incident_k`` and
``kin``. :class:`~bohmbloch.blochwave.BlochSolution` is the usual provider.

Trajectories are parameterised by depth: dx/dz = v_x/v_z, dy/dz = v_y/v_z,
so the h/m prefactor of the velocity cancels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "NODE_FLOOR", "NodeError", "COMPLETED", "ABORTED_NODE", "ABORTED_BACKFLOW",
    "Trajectory", "HydroSample", "local_wavevector", "velocity_field", "flux",
    "quantum_potential", "quantum_force", "hydro_sample", "propagate_trajectory",
    "propagate_trajectories", "seed_grid", "seed_line",
]

#: node floor relative to the cell-averaged density
NODE_FLOOR = 1e-12

COMPLETED = "completed"
ABORTED_NODE = "aborted_node"
ABORTED_BACKFLOW = "aborted_backflow"

RECORDABLE = ("psi2", "speed", "Q")


class NodeError(ArithmeticError):
    """Density below the node floor: the Bohmian velocity is undefined."""


def _points(r):
    single = np.ndim(r) == 1
    return single, np.atleast_2d(np.asarray(r, float))


def _floor(wave, z):
    mean = getattr(wave, "mean_density", None)
    base = mean(z) if mean is not None else np.ones_like(z)
    return NODE_FLOOR * base


def _check_nodes(wave, r, rho, nodes):
    bad = rho < _floor(wave, r[:, 2])
    if np.any(bad):
        if nodes == "raise":
            where = r[np.argmax(bad)]
            raise NodeError(f"wave function node at r = {where.tolist()}")
    return bad


def _finish(single, arr, bad):
    if bad is not None and np.any(bad):
        arr = np.array(arr, dtype=float, copy=True)
        arr[bad] = np.nan
    return arr[0] if single else arr


def local_wavevector(wave, r, nodes: str = "raise"):
    """k + Im(grad Phi / Phi) / (2 pi): the phase gradient of Psi over 2 pi.

    In 1/Angstrom. ``nodes`` is ``"raise"`` (NodeError) or ``"nan"``.
    """
    single, r = _points(r)
    phi, grad, _ = wave.envelope(r, 1)
    rho = np.abs(phi) ** 2
    bad = _check_nodes(wave, r, rho, nodes)
    with np.errstate(divide="ignore", invalid="ignore"):
        kl = np.asarray(wave.incident_k, float) + (grad / phi[:, None]).imag / (2 * np.pi)
    return _finish(single, kl, bad)


def velocity_field(wave, r, nodes: str = "raise"):
    """Bohmian velocity (h/m) k_local in m/s, mass per the kinematics flag."""
    return wave.kin.h_over_m * 1e10 * local_wavevector(wave, r, nodes)


def flux(wave, r):
    """Probability flux |Psi|^2 k_local in 1/Angstrom (no node restriction).

    Im(Psi* grad Psi)/(2 pi), finite everywhere including nodes.
    """
    single, r = _points(r)
    phi, grad, _ = wave.envelope(r, 1)
    j = np.abs(phi)[:, None] ** 2 * np.asarray(wave.incident_k, float) \
        + (np.conj(phi)[:, None] * grad).imag / (2 * np.pi)
    return j[0] if single else j


def quantum_potential(wave, r, nodes: str = "raise"):
    """Q = -(hbar^2/2m) lap(R)/R in eV, from analytic envelope derivatives.

    Uses rho = |Phi|^2 so that lap(R)/R = lap(rho)/(2 rho) - |grad rho|^2/(4 rho^2).
    """
    single, r = _points(r)
    phi, grad, hess = wave.envelope(r, 2)
    rho = np.abs(phi) ** 2
    bad = _check_nodes(wave, r, rho, nodes)
    lap = np.trace(hess, axis1=1, axis2=2)
    grad_rho = 2.0 * (np.conj(phi)[:, None] * grad).real
    lap_rho = 2.0 * (np.conj(phi) * lap).real + 2.0 * np.sum(np.abs(grad) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = lap_rho / (2.0 * rho) - np.sum(grad_rho**2, axis=1) / (4.0 * rho**2)
    Q = -wave.kin.hbar2_over_2m * ratio
    return _finish(single, Q, bad)


_STENCIL = np.eye(3)


def quantum_force(wave, r, h_fd: float = 1e-3, nodes: str = "raise"):
    """-grad Q in eV/Angstrom by central differences with step ``h_fd``."""
    if not h_fd > 0:
        raise ValueError("h_fd must be positive")
    single, r = _points(r)
    n = len(r)
    offs = np.concatenate([_STENCIL, -_STENCIL]) * h_fd
    pts = (r[:, None, :] + offs[None, :, :]).reshape(-1, 3)
    q = np.asarray(quantum_potential(wave, pts, nodes)).reshape(n, 6)
    f = -(q[:, :3] - q[:, 3:]) / (2.0 * h_fd)
    return f[0] if single else f


@dataclass(frozen=True)
class HydroSample:
    """Velocity (m/s), quantum potential (eV) and quantum force (eV/Angstrom)."""

    velocity: np.ndarray
    Q: float
    force: np.ndarray

    @property
    def slope(self) -> np.ndarray:
        """Transverse velocity per unit depth (dx/dz, dy/dz)."""
        return self.velocity[:2] / self.velocity[2]


def hydro_sample(wave, r, h_fd: float = 1e-3) -> HydroSample:
    r = np.asarray(r, float).reshape(3)
    return HydroSample(velocity_field(wave, r), float(quantum_potential(wave, r)),
                       quantum_force(wave, r, h_fd))


@dataclass(frozen=True)
class Trajectory:
    """Depth-parameterised polyline; ``points`` is (n, 3) with uniform z step."""

    seed: np.ndarray
    points: np.ndarray
    dz: float
    status: str = COMPLETED
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def z(self) -> np.ndarray:
        return self.points[:, 2]

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED


def _slope(wave, z, xy):
    """dx/dz, dy/dz plus node and backflow masks for many positions at depth z."""
    r = np.column_stack([xy, np.full(len(xy), z)])
    phi, grad, _ = wave.envelope(r, 1)
    rho = np.abs(phi) ** 2
    node = rho < _floor(wave, r[:, 2])
    with np.errstate(divide="ignore", invalid="ignore"):
        kl = np.asarray(wave.incident_k, float) + (grad / phi[:, None]).imag / (2 * np.pi)
    back = ~node & ~(kl[:, 2] > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = kl[:, :2] / kl[:, 2:3]
    return s, node, back


def _diagnostics(wave, pts):
    phi, _, _ = wave.envelope(pts, 0)
    psi2 = np.abs(phi) ** 2
    speed = np.linalg.norm(velocity_field(wave, pts, nodes="nan"), axis=1)
    Q = quantum_potential(wave, pts, nodes="nan")
    return {"psi2": psi2, "speed": speed, "Q": Q}


def propagate_trajectories(wave, seeds, z_max: float, dz: float = 0.1,
                           record: Sequence[str] = (), variant: str = "midpoint") -> list[Trajectory]:
    """Integrate many seeds through depth with a fixed-step second-order scheme.

    ``variant`` is ``"midpoint"`` or ``"heun"``. Seeds must sit at z = 0. A
    seed that reaches a node or a non-positive longitudinal velocity stops
    there with status ``aborted_node`` / ``aborted_backflow``; its polyline
    ends at the last valid point. ``record`` selects per-point diagnostics
    among ``psi2``, ``speed`` (m/s) and ``Q`` (eV).
    """
    if not dz > 0 or not np.isfinite(dz):
        raise ValueError(f"dz must be positive, got {dz!r}")
    if not z_max > 0:
        raise ValueError(f"z_max must be positive, got {z_max!r}")
    if variant not in ("midpoint", "heun"):
        raise ValueError(f"unknown RK2 variant {variant!r}")
    for name in record:
        if name not in RECORDABLE:
            raise ValueError(f"cannot record {name!r}; choose from {RECORDABLE}")
    seeds = np.atleast_2d(np.asarray(seeds, float))
    if seeds.shape[1] != 3 or np.any(seeds[:, 2] != 0):
        raise ValueError("seeds must be (x, y, 0) triples")
    n_steps = max(1, int(round(z_max / dz)))
    n = len(seeds)
    xy = np.full((n_steps + 1, n, 2), np.nan)
    xy[0] = seeds[:, :2]
    last = np.full(n, n_steps)
    status = np.array([COMPLETED] * n, dtype=object)
    active = np.ones(n, bool)

    for i in range(n_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        z = i * dz
        cur = xy[i, idx]
        s1, node, back = _slope(wave, z, cur)
        if variant == "midpoint":
            s2, node2, back2 = _slope(wave, z + 0.5 * dz, cur + 0.5 * dz * s1)
            nxt = cur + dz * s2
        else:
            s2, node2, back2 = _slope(wave, z + dz, cur + dz * s1)
            nxt = cur + 0.5 * dz * (s1 + s2)
        stop_node = node | node2
        stop_back = ~stop_node & (back | back2 | ~np.all(np.isfinite(nxt), axis=1))
        stop = stop_node | stop_back
        if np.any(stop):
            status[idx[stop_node]] = ABORTED_NODE
            status[idx[stop_back]] = ABORTED_BACKFLOW
            last[idx[stop]] = i
            active[idx[stop]] = False
        ok = ~stop
        xy[i + 1, idx[ok]] = nxt[ok]

    zs = np.arange(n_steps + 1) * dz
    out = []
    for k in range(n):
        m = last[k] + 1
        pts = np.column_stack([xy[:m, k], zs[:m]])
        diag = _diagnostics(wave, pts) if record else {}
        diag = {name: diag[name] for name in record}
        for arr in (pts, *diag.values()):
            arr.setflags(write=False)
        out.append(Trajectory(seeds[k].copy(), pts, float(dz), str(status[k]), diag))
    return out


def propagate_trajectory(wave, seed, z_max: float, dz: float = 0.1,
                         record: Sequence[str] = (), variant: str = "midpoint") -> Trajectory:
    """Single-seed form of :func:`propagate_trajectories`."""
    return propagate_trajectories(wave, [seed], z_max, dz, record, variant)[0]


def seed_grid(cell, n: int) -> np.ndarray:
    """n x n seeds over [0, a)^2 at z = 0, offset by half a spacing."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a = cell.lattice_constant
    u = (np.arange(n) + 0.5) * a / n
    X, Y = np.meshgrid(u, u, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel(), np.zeros(n * n)])


def seed_line(cell, n: int, y_frac: float = 0.5) -> np.ndarray:
    """n seeds along x over [0, a) at y = y_frac * a, offset by half a spacing."""
    if n < 2:
        raise ValueError("n must be >= 2")
    a = cell.lattice_constant
    x = (np.arange(n) + 0.5) * a / n
    return np.column_stack([x, np.full(n, y_frac * a), np.zeros(n)])
