"""Command line front end: one subcommand per diffraction experiment.

Precedence of settings: subcommand defaults, then the ``--config`` file,
then explicit flags. Exit codes: 0 success, 2 config error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import __version__
from .runio import ConfigError, RunError, parse_config, run
from .scenarios import QUANTITIES, ScenarioConfig

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# subcommand -> (base config, kinds a --config file may select, write trajectories)
SUBCOMMANDS = {
    "zone-axis": (ScenarioConfig(kind="zone_axis", quantities=("intensity",)), ("zone_axis",), True),
    "two-beam": (ScenarioConfig(kind="two_beam", g_hkl=(2, 0, 0)), ("two_beam", "two_beam_normal"), True),
    "systematic-row": (ScenarioConfig(kind="systematic_row", g_hkl=(1, 0, 0), n_max=3),
                       ("systematic_row",), True),
    "rocking": (ScenarioConfig(kind="rocking", g_hkl=(1, 0, 0), n_max=3), ("rocking",), False),
    "fields": (ScenarioConfig(kind="zone_axis", quantities=QUANTITIES),
               ("zone_axis", "two_beam", "two_beam_normal", "systematic_row"), False),
}

HELP = {
    "zone-axis": "zone-axis orientation with Bethe beam selection",
    "two-beam": "two-beam Pendelloesung at the Bragg angle or normal incidence",
    "systematic-row": "systematic row of reflections n*g, -n_max <= n <= n_max",
    "rocking": "exit intensities of a systematic row against incident tilt",
    "fields": "field maps (intensity, speed, Q, quantum and electrostatic force) without trajectories",
}


def _hkl(text):
    vals = text.replace(",", " ").split()
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("expected three integers, e.g. '2 0 0'")
    return tuple(int(v) for v in vals)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bohmbloch", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=HELP[name], description=HELP[name])
        sp.add_argument("--config", type=Path, help="config file; overrides subcommand defaults")
        sp.add_argument("--out-dir", type=Path, default=Path("out"), help="output directory (default ./out)")
        sp.add_argument("--no-raster", action="store_true", help="skip PNG heatmaps")
        sp.add_argument("--dz", type=float, help="RK2 depth step in Angstrom")
        sp.add_argument("--thickness", type=float, help="foil thickness in Angstrom")
        sp.add_argument("--energy", type=float, help="beam energy in keV")
        if name in ("two-beam", "systematic-row", "rocking"):
            sp.add_argument("--g", type=_hkl, help="reflection hkl, e.g. '2 0 0'")
        if name == "two-beam":
            sp.add_argument("--normal", action="store_true", help="normal incidence instead of Bragg tilt")
        if name in ("systematic-row", "rocking"):
            sp.add_argument("--n-max", type=int, help="row half-length")
        if name == "fields":
            sp.add_argument("--quantities", nargs="+", choices=QUANTITIES, help="fields to map")
    return p


def resolve_config(args) -> ScenarioConfig:
    base, kinds, _ = SUBCOMMANDS[args.command]
    cfg = base
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from None
        cfg = parse_config(text, base=base, require=False)
        if cfg.kind not in kinds:
            raise ConfigError(f"config kind {cfg.kind!r} does not fit subcommand {args.command!r}")
    over = {}
    if args.dz is not None:
        over["dz_aa"] = args.dz
    if args.thickness is not None:
        over["thickness_aa"] = args.thickness
    if args.energy is not None:
        over["energy_kev"] = args.energy
    if args.no_raster:
        over["raster"] = False
    if getattr(args, "g", None) is not None:
        over["g_hkl"] = args.g
    if getattr(args, "normal", False):
        over["kind"] = "two_beam_normal"
    if getattr(args, "n_max", None) is not None:
        over["n_max"] = args.n_max
    if getattr(args, "quantities", None):
        over["quantities"] = tuple(args.quantities)
    try:
        return dataclasses.replace(cfg, **over)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        man = run(cfg, args.out_dir, trajectories=SUBCOMMANDS[args.command][2])
    except RunError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, KeyError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"run {man.run_id}: {len(man.files)} files in {args.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
