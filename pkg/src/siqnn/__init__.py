"""Excited-state property regression from molecular ground states.

A statevector-simulated, spin-symmetric quantum neural network with a
parameterized all-Z observable predicts transition energies and transition
dipole norms across dissociation scans, benchmarked against classical
regressors on replicated low-data training sets.
"""

__version__ = "0.1.0"

from .ansatz import CircuitTemplate, ObservableBasis, build_observable_basis, build_siqnn, param_count_formula
from .fermions import build_dipole_operator, build_qubit_hamiltonian, jw_annihilation, jw_creation, s2_operator
from .integrals import ActiveSpaceIntegrals, Bundle, validate_bundle
from .model import MLP, DirectWeights, HybridModel, mlp_forward, mlp_init
from .paulis import PauliString, PauliSum, multiply, qwc_group
from .simulator import (
    GateInstruction,
    StateVector,
    apply_n_gate,
    apply_p_gate,
    estimate_z_observable,
    expectation,
    gradient,
    sample_z_basis,
)
from .spectra import Dataset, ScanSpectra, Scaling, classify_state, diagonalize, tdm_norm, track_states

__all__ = [
    "ActiveSpaceIntegrals",
    "Bundle",
    "CircuitTemplate",
    "Dataset",
    "DirectWeights",
    "GateInstruction",
    "HybridModel",
    "MLP",
    "ObservableBasis",
    "PauliString",
    "PauliSum",
    "ScanSpectra",
    "Scaling",
    "StateVector",
    "apply_n_gate",
    "apply_p_gate",
    "build_dipole_operator",
    "build_observable_basis",
    "build_qubit_hamiltonian",
    "build_siqnn",
    "classify_state",
    "diagonalize",
    "estimate_z_observable",
    "expectation",
    "gradient",
    "jw_annihilation",
    "jw_creation",
    "mlp_forward",
    "mlp_init",
    "multiply",
    "param_count_formula",
    "qwc_group",
    "s2_operator",
    "sample_z_basis",
    "tdm_norm",
    "track_states",
    "validate_bundle",
]
