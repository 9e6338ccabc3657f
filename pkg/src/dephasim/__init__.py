"""Dephasing in a disordered tight-binding chain, simulated by randomised tilts."""

from .experiments import (
    PRESETS,
    Budget,
    ExperimentRecord,
    ExperimentSpec,
    ScanRecord,
    SpecError,
    SweepRecord,
    get_preset,
    run_convergence_scan,
    run_disorder_sweep,
    run_single_realization,
)
from .lindblad import DensityMatrix, LindbladSettings, evolve_lindblad
from .metrics import infidelity_distribution, population_infidelity, quarter_decay_time, state_infidelity
from .model import (
    DephasingSpec,
    HamiltonianOperator,
    LatticeSpec,
    PureState,
    build_hamiltonian,
    ground_state,
    sample_disorder,
)
from .propagator import PropagatorSettings, SpectralCache, evolve_unitary
from .protocols import ProtocolConfig, averaged_digital_density, make_schedule, run_ensemble

__all__ = [
    "PRESETS", "Budget", "ExperimentRecord", "ExperimentSpec", "ScanRecord", "SpecError", "SweepRecord",
    "get_preset", "run_convergence_scan", "run_disorder_sweep", "run_single_realization",
    "DensityMatrix", "LindbladSettings", "evolve_lindblad",
    "infidelity_distribution", "population_infidelity", "quarter_decay_time", "state_infidelity",
    "DephasingSpec", "HamiltonianOperator", "LatticeSpec", "PureState", "build_hamiltonian", "ground_state",
    "sample_disorder", "PropagatorSettings", "SpectralCache", "evolve_unitary",
    "ProtocolConfig", "averaged_digital_density", "make_schedule", "run_ensemble",
]
