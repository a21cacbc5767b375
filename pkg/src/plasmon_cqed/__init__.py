"""Quantum emitters in a lossy plasmonic nanocavity: driven Lindblad dynamics,
steady states, extinction cross-sections and sub-radiant state formation."""

from plasmon_cqed.hilbert import HilbertSpec
from plasmon_cqed.cavity import (
    DriveSpec,
    EmitterSpec,
    ModeProfile,
    NanocavityParams,
    build_hamiltonian,
    coupling_strength,
    drive_for_photon_number,
    effective_coupling,
    in_coupling,
)
from plasmon_cqed.lindblad import (
    EvolutionConfig,
    Liouvillian,
    build_liouvillian,
    evolve,
    propagator_expm,
    steady_state,
)

__version__ = "0.1.0"

__all__ = [
    "DriveSpec",
    "EmitterSpec",
    "EvolutionConfig",
    "HilbertSpec",
    "Liouvillian",
    "ModeProfile",
    "NanocavityParams",
    "build_hamiltonian",
    "build_liouvillian",
    "coupling_strength",
    "drive_for_photon_number",
    "effective_coupling",
    "evolve",
    "in_coupling",
    "propagator_expm",
    "steady_state",
]
