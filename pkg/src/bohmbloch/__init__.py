"""Bloch-wave electron diffraction with Bohmian trajectories through crystals.

Submodules
----------
crystal     lattice, scattering factors, structure factors, potential
blochwave   beam selection, Bethe reduction, eigen-solve, wave evaluation
hydro       velocity field, quantum potential and force, trajectories
scenarios   zone-axis, two-beam, systematic-row setups and field maps
runio       config text, run orchestration and CSV/JSON writers
"""

__version__ = "0.1.0"

from . import blochwave, crystal, hydro, scenarios  # noqa: E402
from .blochwave import (BeamSet, BlochSolution, Orientation, assemble_dynamical_matrix,  # noqa: E402
                        beam_intensities, delta_I, extinction_distance, generate_beams,
                        partition_bethe, solve_bloch, wave_at)
from .crystal import (KIRKLAND_CU, CrystalCell, electron_kinematics, fcc_cell,  # noqa: E402
                      get_preset, scattering_factor, structure_factor)
from .hydro import (propagate_trajectories, quantum_force, quantum_potential,  # noqa: E402
                    seed_grid, seed_line, velocity_field)
from .scenarios import (ScenarioConfig, field_map, rocking_curve, systematic_row_setup,  # noqa: E402
                        two_beam_setup, zone_axis_setup)

__all__ = [
    "__version__", "blochwave", "crystal", "hydro", "scenarios",
    "BeamSet", "BlochSolution", "Orientation", "assemble_dynamical_matrix", "beam_intensities",
    "delta_I", "extinction_distance", "generate_beams", "partition_bethe", "solve_bloch", "wave_at",
    "KIRKLAND_CU", "CrystalCell", "electron_kinematics", "fcc_cell", "get_preset",
    "scattering_factor", "structure_factor",
    "propagate_trajectories", "quantum_force", "quantum_potential", "seed_grid", "seed_line",
    "velocity_field",
    "ScenarioConfig", "field_map", "rocking_curve", "systematic_row_setup", "two_beam_setup",
    "zone_axis_setup",
]
