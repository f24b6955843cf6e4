"""Configuration text, run orchestration and CSV/JSON serialization.

Config text is line oriented, ``key = value`` under section headers::

    [scenario]
    kind = two_beam
    energy_kev = 200
    g_hkl = 2 0 0

Every output file starts with a ``# run_id = ...`` line; the run id is a
hash of the serialized config, so equal configs give byte-identical data
files. Numbers are written with ``repr`` (shortest round-trip form).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import blochwave as bw
from . import hydro
from . import scenarios as sc
from .crystal import cell_hash, electron_kinematics, get_preset, load_crystal_file
from .textconf import ConfigError, parse_sections

__all__ = [
    "ConfigError", "RunError", "RunManifest", "SCHEMA", "parse_config", "serialize_config",
    "load_config", "run", "write_trajectories", "write_field", "write_curve",
    "lint_header", "format_number", "run_id_for",
]


class RunError(RuntimeError):
    """Numeric failure inside a pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


# section -> key -> (config field, parser kind)
SCHEMA = {
    "scenario": {
        "kind": ("kind", "word"),
        "energy_kev": ("energy_kev", "pos_float"),
        "g_hkl": ("g_hkl", "int3"),
        "zone_uvw": ("zone_uvw", "int3"),
        "n_max": ("n_max", "nonneg_int"),
        "at_bragg": ("at_bragg", "bool"),
        "kt_per_aa": ("kt_per_aa", "float2"),
        "thickness_aa": ("thickness_aa", "pos_float"),
        "relativistic": ("relativistic", "bool"),
        "crystal": ("crystal", "word"),
    },
    "beams": {
        "g_max_aa_inv": ("g_max_aa_inv", "pos_float"),
        "c_s": ("c_s", "pos_float"),
        "c_w": ("c_w", "pos_float"),
    },
    "integration": {
        "dz_aa": ("dz_aa", "pos_float"),
        "rk2_variant": ("rk2_variant", "word"),
    },
    "seeding": {
        "mode": ("seeding_mode", "word"),
        "n": ("seeding_n", "pos_int"),
        "y_frac": ("y_frac", "frac"),
    },
    "output": {
        "quantities": ("quantities", "words"),
        "grid_n": ("grid_n", "pos_int"),
        "raster": ("raster", "bool"),
        "n_z": ("n_z", "pos_int"),
    },
    "rocking": {
        "kt_over_g_range": ("kt_over_g_range", "float2"),
        "steps": ("rocking_steps", "pos_int"),
    },
}
REQUIRED = (("scenario", "kind"), ("scenario", "energy_kev"))
NEEDS_G = ("two_beam", "two_beam_normal", "systematic_row", "rocking")

_ENUMS = {
    "kind": sc.KINDS,
    "rk2_variant": ("midpoint", "heun"),
    "seeding_mode": ("grid", "line"),
    "quantities": sc.QUANTITIES,
}

_TRUE = {"true", "on", "yes", "1"}
_FALSE = {"false", "off", "no", "0"}


def _convert(kind: str, text: str, line: int):
    toks = text.replace(",", " ").split()
    try:
        if kind == "word":
            if len(toks) != 1:
                raise ValueError("expected a single word")
            return toks[0]
        if kind == "words":
            return tuple(toks)
        if kind == "bool":
            low = text.strip().lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError("expected true/false")
        if kind == "int3":
            vals = tuple(int(t) for t in toks)
            if len(vals) != 3:
                raise ValueError("expected three integers")
            return vals
        if kind == "float2":
            vals = tuple(float(t) for t in toks)
            if len(vals) != 2:
                raise ValueError("expected two numbers")
            return vals
        if len(toks) != 1:
            raise ValueError("expected a single number")
        if kind in ("pos_int", "nonneg_int"):
            v = int(toks[0])
            if v < (1 if kind == "pos_int" else 0):
                raise ValueError("out of range")
            return v
        v = float(toks[0])
        if not math.isfinite(v):
            raise ValueError("not finite")
        if kind == "pos_float" and not v > 0:
            raise ValueError("must be positive")
        if kind == "frac" and not 0.0 <= v < 1.0:
            raise ValueError("must lie in [0, 1)")
        return v
    except ValueError as exc:
        raise ConfigError(f"invalid value {text!r}: {exc}", line) from None


def parse_config(text: str, base: sc.ScenarioConfig | None = None,
                 require: bool = True) -> sc.ScenarioConfig:
    """Parse config text into a :class:`ScenarioConfig`.

    Values absent from the text come from ``base`` (default: the built-in
    defaults). Raises :class:`ConfigError` naming the line for unknown keys,
    malformed or out-of-range values and c_s >= c_w.
    """
    doc = parse_sections(text)
    values: dict = {}
    lines: dict = {}
    for key, ent in doc.pop("", {}).items():
        raise ConfigError(f"key {key!r} outside any section", ent.line)
    for section, entries in doc.items():
        if section not in SCHEMA:
            first = min((e.line for e in entries.values()), default=None)
            raise ConfigError(f"unknown section [{section}]", first)
        for key, ent in entries.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", ent.line)
            name, kind = SCHEMA[section][key]
            values[name] = _convert(kind, ent.value, ent.line)
            lines[name] = ent.line
    if require:
        end = max(1, len(text.splitlines()))
        for section, key in REQUIRED:
            if key not in doc.get(section, {}):
                raise ConfigError(f"missing required key {key!r} in [{section}]", end)
        if values["kind"] in NEEDS_G and "g_hkl" not in values:
            raise ConfigError(f"scenario kind {values['kind']!r} requires g_hkl", lines["kind"])
    for name, allowed in _ENUMS.items():
        if name in values:
            given = values[name] if name == "quantities" else (values[name],)
            for v in given:
                if v not in allowed:
                    raise ConfigError(f"{name} {v!r} not one of {allowed}", lines[name])
    base = base or sc.ScenarioConfig()
    c_s, c_w = values.get("c_s", base.c_s), values.get("c_w", base.c_w)
    if not c_s < c_w:
        raise ConfigError(f"c_s ({c_s}) must be below c_w ({c_w})",
                          lines.get("c_w", lines.get("c_s")))
    try:
        return dataclasses.replace(base, **values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> sc.ScenarioConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _fmt_value(kind: str, v) -> str:
    if kind == "bool":
        return "true" if v else "false"
    if kind in ("int3", "float2"):
        return " ".join(repr(x) for x in v)
    if kind == "words":
        return ", ".join(v)
    if kind in ("pos_float", "frac"):
        return repr(float(v))
    return str(v)


def serialize_config(cfg: sc.ScenarioConfig) -> str:
    """Complete config text; ``parse_config`` of the result equals ``cfg``."""
    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for key, (name, kind) in keys.items():
            out.append(f"{key} = {_fmt_value(kind, getattr(cfg, name))}")
        out.append("")
    return "\n".join(out)


def run_id_for(cfg: sc.ScenarioConfig) -> str:
    text = serialize_config(cfg) + f"\nversion = {__version__}\n"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def format_number(v) -> str:
    """Shortest round-trip text for a float (at most 17 significant digits)."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


_UNIT_SUFFIX = re.compile(r"_(angstrom|aa_inv|eV|eV_per_angstrom|m_per_s|rel|index|over_g)$")
_TEXT_COLUMNS = {"run_id", "status"}


def lint_header(columns) -> None:
    """Reject numeric CSV columns whose name lacks a unit suffix."""
    for col in columns:
        if col in _TEXT_COLUMNS:
            continue
        if not _UNIT_SUFFIX.search(col):
            raise ValueError(f"column {col!r} carries no unit suffix")


def _write_rows(path, preamble, header, rows) -> None:
    lint_header(header)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in preamble:
            fh.write(f"# {line}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


_DIAG_COLUMNS = {"psi2": "psi2_rel", "speed": "speed_m_per_s", "Q": "Q_eV"}


def write_trajectories(trajectories, path, run_id: str, record=()) -> None:
    """One row per trajectory point; an empty list gives a header-only file."""
    record = tuple(record)
    header = ["run_id", "seed_index", "status", "z_angstrom", "x_angstrom", "y_angstrom"]
    header += [_DIAG_COLUMNS[r] for r in record]
    fmt = format_number

    def rows():
        for i, tr in enumerate(trajectories):
            diag = [tr.diagnostics[r] for r in record]
            for k, (x, y, z) in enumerate(tr.points):
                yield [run_id, str(i), tr.status, fmt(z), fmt(x), fmt(y)] + [fmt(d[k]) for d in diag]

    _write_rows(path, [f"run_id = {run_id}"], header, rows())


def write_field(grid: sc.FieldGrid, path, run_id: str, component: int | None = None) -> None:
    """Row-major grid values (rows = y) after a ``#`` metadata preamble."""
    vals = grid.values if component is None else grid.values[..., component]
    if vals.ndim != 2:
        raise ValueError("vector fields need a component index")
    name = grid.quantity if component is None else f"{grid.quantity}_{'xyz'[component]}"
    n_y, n_x = vals.shape
    pre = [f"run_id = {run_id}", f"quantity = {name}", f"unit = {grid.unit}",
           f"nx = {n_x}", f"ny = {n_y}",
           f"extent_angstrom = {format_number(grid.extent)}",
           f"x0_angstrom = {format_number(grid.x[0])}",
           f"dx_angstrom = {format_number(grid.x[1] - grid.x[0]) if n_x > 1 else format_number(grid.extent)}",
           f"z_angstrom = {format_number(grid.z)}",
           "layout = row-major, rows ascending y, columns ascending x; nan marks nodes"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in pre:
            fh.write(f"# {line}\n")
        for row in vals:
            fh.write(",".join(format_number(v) for v in row) + "\n")


def _beam_label(hkl) -> str:
    return "I_" + "_".join(str(v) for v in hkl) + "_rel"


def write_curve(axis_values, hkls, intensities, path, run_id: str, axis: str = "z_angstrom") -> None:
    """Intensity per beam against depth (``z_angstrom``) or tilt (``kt_over_g``)."""
    header = [axis] + [_beam_label(h) for h in hkls]
    rows = ([format_number(a)] + [format_number(v) for v in row]
            for a, row in zip(axis_values, np.atleast_2d(intensities)))
    _write_rows(path, [f"run_id = {run_id}"], header, rows)


def _write_png(grid: sc.FieldGrid, path, component=None) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    vals = grid.values if component is None else grid.values[..., component]
    fig, ax = plt.subplots(figsize=(4, 4))
    ext = [0, grid.extent, 0, grid.extent]
    im = ax.imshow(vals, origin="lower", extent=ext, cmap="viridis")
    fig.colorbar(im, ax=ax, label=grid.unit)
    ax.set_xlabel("x (Angstrom)")
    ax.set_ylabel("y (Angstrom)")
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    run_id: str
    version: str
    config: dict
    config_text: str
    crystal: dict
    derived: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    timing_s: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    raise TypeError(f"cannot serialise {type(o)}")


def _cell_for(cfg):
    if Path(cfg.crystal).suffix and Path(cfg.crystal).exists():
        return load_crystal_file(cfg.crystal)
    return get_preset(cfg.crystal)


def _setup(cfg, cell):
    k = cfg.kind
    if k == "zone_axis":
        return sc.zone_axis_setup(cell, cfg.zone_uvw, cfg.energy_kev, cfg.c_s, cfg.c_w,
                                  cfg.g_max_aa_inv, cfg.relativistic, cfg.kt_per_aa)
    if k in ("two_beam", "two_beam_normal"):
        return sc.two_beam_setup(cell, cfg.g_hkl, cfg.energy_kev,
                                 cfg.at_bragg and k == "two_beam", cfg.relativistic, cfg.zone_uvw)
    return sc.systematic_row_setup(cell, cfg.g_hkl, cfg.n_max, cfg.energy_kev, cfg.kt_per_aa,
                                   cfg.relativistic, cfg.zone_uvw)


def _seeds(cfg, cell):
    if cfg.seeding_mode == "grid":
        return hydro.seed_grid(cell, cfg.seeding_n)
    return hydro.seed_line(cell, cfg.seeding_n, cfg.y_frac)


def run(cfg: sc.ScenarioConfig, out_dir, trajectories: bool = True,
        record=("psi2", "speed", "Q")) -> RunManifest:
    """Execute the pipeline for ``cfg`` and write all outputs into ``out_dir``.

    Files: ``trajectories.csv``, ``curve.csv`` (or ``rocking.csv``),
    ``field_<quantity>[_<component>].csv`` per requested quantity,
    optional PNG rasters and ``manifest.json``. Numeric failures are
    recorded in the manifest and re-raised as :class:`RunError`.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = serialize_config(cfg)
    rid = run_id_for(cfg)
    cell = _cell_for(cfg)
    kin = electron_kinematics(cfg.energy_kev, cfg.relativistic)
    man = RunManifest(rid, __version__, dataclasses.asdict(cfg), text,
                      {"name": cfg.crystal, "sha256": cell_hash(cell),
                       "lattice_constant_angstrom": cell.lattice_constant})
    man.derived.update(wavelength_angstrom=kin.wavelength, k0_aa_inv=kin.k0,
                       gamma_rel=kin.gamma_rel)
    stage = "setup"
    t0 = time.perf_counter()

    def tick(name):
        nonlocal t0
        now = time.perf_counter()
        man.timing_s[name] = now - t0
        t0 = now

    def add_file(path):
        man.files[Path(path).name] = _sha256(path)

    try:
        if cfg.kind == "rocking":
            stage = "rocking"
            curve = sc.rocking_curve(cell, cfg.g_hkl, cfg.n_max, cfg.energy_kev, cfg.thickness_aa,
                                     cfg.kt_over_g_range, cfg.rocking_steps, cfg.relativistic,
                                     cfg.zone_uvw)
            p = out / "rocking.csv"
            write_curve(curve.kt_over_g, curve.hkls, curve.intensities, p, rid, axis="kt_over_g")
            add_file(p)
            man.derived["beams"] = [list(h) for h in curve.hkls]
            tick("rocking")
            return man

        beams, sol = _setup(cfg, cell)
        counts = beams.counts
        man.derived["beam_counts"] = {t: counts[t] for t in (bw.STRONG, bw.WEAK, bw.ELIMINATED)}
        man.derived["beams"] = [{"hkl": list(b.hkl), "tag": b.tag, "s_aa_inv": b.s,
                                 "U_inv_aa2": b.U.real} for b in beams.beams]
        man.derived["incident_k_aa_inv"] = list(beams.incident_k)
        if cfg.kind in ("two_beam", "two_beam_normal"):
            g = beams.beams[1]
            man.derived["extinction_distance_angstrom"] = bw.extinction_distance(
                g.U, beams.incident_k, g.g)
            man.derived["extinction_conventions"] = sc.extinction_report(
                cell, cfg.g_hkl, cfg.energy_kev)
        tick("setup")

        stage = "intensities"
        z = np.linspace(0.0, cfg.thickness_aa, cfg.n_z)
        p = out / "curve.csv"
        write_curve(z, sol.hkls, bw.beam_intensities(sol, z), p, rid)
        add_file(p)
        tick("intensities")

        if trajectories:
            stage = "trajectories"
            trajs = hydro.propagate_trajectories(sol, _seeds(cfg, cell), cfg.thickness_aa,
                                                 cfg.dz_aa, record, cfg.rk2_variant)
            p = out / "trajectories.csv"
            write_trajectories(trajs, p, rid, record)
            add_file(p)
            status = {}
            for t in trajs:
                status[t.status] = status.get(t.status, 0) + 1
            man.derived["trajectory_status"] = status
            tick("trajectories")

        stage = "fields"
        for q in cfg.quantities:
            grid = sc.field_map(sol, q, cfg.thickness_aa, cfg.grid_n)
            comps = [None] if grid.values.ndim == 2 else [0, 1, 2]
            for c in comps:
                suffix = "" if c is None else f"_{'xyz'[c]}"
                p = out / f"field_{q}{suffix}.csv"
                write_field(grid, p, rid, c)
                add_file(p)
                if cfg.raster:
                    png = out / f"field_{q}{suffix}.png"
                    _write_png(grid, png, c)
                    add_file(png)
        tick("fields")
        return man
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        man.errors.append({"stage": stage, "error": f"{type(exc).__name__}: {exc}"})
        if stage == "setup" and type(exc) is ValueError:
            # inconsistent physical request, e.g. a forbidden reflection
            raise ConfigError(str(exc)) from exc
        raise RunError(stage, exc) from exc
    finally:
        (out / "manifest.json").write_text(man.to_json() + "\n", encoding="utf-8")
