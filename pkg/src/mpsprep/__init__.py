"""mpsprep: tensor network states prepared by local measurement and correction.

Families of preparable MPS, the measurement protocol that fuses small clusters into a long
chain, diagnostics that search a tensor for a basis it pushes through, and the 2D toric-code
and GHZ PEPS examples.

Example:
    from mpsprep import pauli_basis, phase_diagram_point, run_protocol, tetrahedron_tensor

    a = tetrahedron_tensor(phase_diagram_point("aklt"))
    report = run_protocol(a, n=6, basis=pauli_basis(), trials=20, seed=7)
    assert report.deterministic()
"""

__version__ = "0.1.0"

from .bases import (
    BasisValidationError,
    ChoiBasis,
    GroupData,
    UnitaryErrorBasis,
    choi_vectors,
    clock_basis,
    conjugate_basis,
    from_projective_rep,
    pauli_basis,
    quaternion_transversal_basis,
)
from .config import ConfigError, RunConfig, resolve_config
from .diagnostics import (
    PreparabilityCertificate,
    SolutionSpace,
    blocked_intersection,
    certify_preparable,
    find_product_solutions,
    solution_space,
)
from .families import (
    InfeasibleSpectrumError,
    aklt_deformed_tensor,
    clock_tensor,
    correlation_lengths,
    nice_basis_tensor,
    phase_diagram_point,
    spectrum_to_weights,
    tetrahedron_tensor,
    trajectory_sweep,
    weights_to_spectrum,
)
from .incomplete import incomplete_protocol, ising_split_tensor
from .linalg import (
    DimensionError,
    DomainError,
    MpsprepError,
    PreconditionError,
    ResourceError,
    ShapeError,
)
from .mpo import mpo_apply, resource_state
from .mps import (
    MPSTensor,
    SimplexWeights,
    TransferMatrix,
    UniformMPS,
    check_conditions,
    dense_state,
    entanglement_data,
    transfer_matrix,
)
from .peps import (
    InsertionPattern,
    PEPSLattice,
    dense_peps_state,
    forbidden_amplitudes,
    parity_statistics,
    simulate_peps_protocol,
    verify_push_rules,
)
from .protocol import (
    NotCorrectable,
    ProtocolReport,
    construct_correction_unitary,
    derive_corrections,
    run_protocol,
)
from .serialize import FormatError, dump_tensor, load_basis, load_tensor

__all__ = [
    # Errors
    "MpsprepError",
    "DimensionError",
    "ShapeError",
    "PreconditionError",
    "ResourceError",
    "DomainError",
    "ConfigError",
    "FormatError",
    "BasisValidationError",
    "InfeasibleSpectrumError",
    "NotCorrectable",
    # Error bases
    "UnitaryErrorBasis",
    "GroupData",
    "ChoiBasis",
    "pauli_basis",
    "clock_basis",
    "from_projective_rep",
    "quaternion_transversal_basis",
    "conjugate_basis",
    "choi_vectors",
    # MPS
    "MPSTensor",
    "UniformMPS",
    "SimplexWeights",
    "TransferMatrix",
    "transfer_matrix",
    "dense_state",
    "entanglement_data",
    "check_conditions",
    # Families
    "tetrahedron_tensor",
    "clock_tensor",
    "nice_basis_tensor",
    "aklt_deformed_tensor",
    "phase_diagram_point",
    "weights_to_spectrum",
    "spectrum_to_weights",
    "correlation_lengths",
    "trajectory_sweep",
    # Protocol
    "ProtocolReport",
    "construct_correction_unitary",
    "derive_corrections",
    "run_protocol",
    "incomplete_protocol",
    "ising_split_tensor",
    "mpo_apply",
    "resource_state",
    # PEPS
    "InsertionPattern",
    "PEPSLattice",
    "dense_peps_state",
    "verify_push_rules",
    "simulate_peps_protocol",
    "parity_statistics",
    "forbidden_amplitudes",
    # Diagnostics
    "SolutionSpace",
    "solution_space",
    "blocked_intersection",
    "find_product_solutions",
    "certify_preparable",
    "PreparabilityCertificate",
    # Files and config
    "load_tensor",
    "dump_tensor",
    "load_basis",
    "RunConfig",
    "resolve_config",
]
