"""Simulator for a driven Ising spin-chain quantum register.

Exact and perturbative propagation of rectangular rf pulse sequences on an
L-qubit chain with per-site Larmor frequencies and nearest-neighbour Ising
coupling, the end-to-end entanglement walk built on top of it, and the
dynamical-fidelity analysis of that walk.
"""

from .basis import (
    BasisState,
    StateVector,
    flip,
    format_state_table,
    ground_state,
    spin_z,
)
from .errors import (
    CapacityError,
    FrameError,
    NumericalError,
    PairingError,
    ProtocolError,
    SpinChainError,
)
from .exact import from_rotating, propagate_pulse, run_protocol, to_rotating
from .fidelity import (
    FidelityReport,
    PredictedFidelity,
    build_ideal_state,
    dynamical_fidelity,
    fidelity_minima_J,
    predicted_fidelity,
    protocol_fidelity,
)
from .hamiltonian import (
    ChainParams,
    ChaosEstimate,
    RotFrameHam,
    build_rot_ham,
    chaos_border,
    fake_transitions,
    h0_energy,
    single_flip_deltas,
)
from .pert import (
    BlockPartition,
    TwoLevelBlock,
    block_evolve,
    epsilon_param,
    eta_param,
    partition_blocks,
    run_protocol_pert,
)
from .protocol import (
    Protocol,
    Pulse,
    build_entanglement_protocol,
    format_protocol_table,
    resonance_frequency,
    spectator_detunings,
    two_pi_k_omega,
    validate_selective,
)

__version__ = "0.1.0"

__all__ = [
    "BasisState",
    "BlockPartition",
    "CapacityError",
    "ChainParams",
    "ChaosEstimate",
    "FidelityReport",
    "FrameError",
    "NumericalError",
    "PairingError",
    "PredictedFidelity",
    "Protocol",
    "ProtocolError",
    "Pulse",
    "RotFrameHam",
    "SpinChainError",
    "StateVector",
    "TwoLevelBlock",
    "block_evolve",
    "build_entanglement_protocol",
    "build_ideal_state",
    "build_rot_ham",
    "chaos_border",
    "dynamical_fidelity",
    "epsilon_param",
    "eta_param",
    "fake_transitions",
    "fidelity_minima_J",
    "flip",
    "format_protocol_table",
    "format_state_table",
    "from_rotating",
    "ground_state",
    "h0_energy",
    "partition_blocks",
    "predicted_fidelity",
    "propagate_pulse",
    "protocol_fidelity",
    "resonance_frequency",
    "run_protocol",
    "run_protocol_pert",
    "single_flip_deltas",
    "spectator_detunings",
    "spin_z",
    "to_rotating",
    "two_pi_k_omega",
    "validate_selective",
]
