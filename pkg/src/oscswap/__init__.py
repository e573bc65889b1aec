"""Conditional SWAP and entanglement of two oscillators through a three-level coupler."""

__version__ = "0.1.0"

from .hamiltonians import (
    IdealParams,
    ParamSolution,
    PhysicalParams,
    build_effective,
    build_full,
    build_ideal,
    check_detuning_conditions,
    solve_params,
)
from .hilbert import E, F, G, GP, DensityMatrix, Ket, Operator, SystemDims
from .lindblad import DecoherenceRates, SolverConfig, SolverError, Trajectory, integrate, simulate_protocol_open
from .metrics import entanglement_entropy, fidelity
from .protocol import run_protocol, swap_gate_check, swap_oracle
from .runner import PRESETS, Scenario, load_scenario, run
from .states import CouplerState, OscState, cat, coherent, fock, squeezed_vacuum

__all__ = [
    "__version__",
    "G", "GP", "E", "F",
    "SystemDims", "Operator", "Ket", "DensityMatrix",
    "OscState", "CouplerState", "fock", "coherent", "squeezed_vacuum", "cat",
    "PhysicalParams", "IdealParams", "ParamSolution", "solve_params", "check_detuning_conditions",
    "build_ideal", "build_effective", "build_full",
    "swap_oracle", "run_protocol", "swap_gate_check",
    "DecoherenceRates", "SolverConfig", "SolverError", "Trajectory", "integrate", "simulate_protocol_open",
    "fidelity", "entanglement_entropy",
    "Scenario", "PRESETS", "load_scenario", "run",
]
