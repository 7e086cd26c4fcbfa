"""Lattice gauge theory on decorated Rydberg pair arrays.

Ground states and adiabatic preparation of a square-lattice U(1)
quantum link model, its single-spin-per-plaquette dual, and the
atom-pair arrays whose blockade physics realizes that dual.
"""

from .lattice import CHAIN, OPEN_SQUARE, PERIODIC_LADDER, LatticeSpec
from .geometry import (
    BlockadeSolution,
    DriveParams,
    GeometryError,
    PairArrayGeometry,
    effective_rabi,
    ising_coupling_A,
    onsite_coefficient_B,
    solution_from_json_dict,
    solve_ladder_geometry,
    solve_square_geometry,
)
from .gauge import (
    ConstrainedBasis,
    check_gauss_law,
    enumerate_link_sector,
    enumerate_sector,
    from_dual,
    full_dual_basis,
    height_field,
    to_dual,
)
from .hamiltonian import (
    SparseOperator,
    add_penalty,
    add_pinning,
    build_atom_level,
    build_dual_rk,
    build_effective_spin,
    build_original_rk,
    build_pxp_chain,
    build_rydberg_rk,
    build_transverse_drive,
    linear_combination,
    pxp_chain_basis,
)
from .observables import (
    RvbsDiagnostic,
    StructureFactorReport,
    compute_report,
    correlation,
    fidelity,
    flippable_count,
    reciprocal_grid,
    rvbs_signature,
    structure_factor,
)
from .solver import (
    GroundStateResult,
    PulseSpec,
    SweepResult,
    adiabatic_sweep,
    dense_spectrum,
    evolve,
    ground_state,
)

__version__ = "0.1.0"

__all__ = [
    "CHAIN", "OPEN_SQUARE", "PERIODIC_LADDER", "LatticeSpec",
    "BlockadeSolution", "DriveParams", "GeometryError", "PairArrayGeometry",
    "effective_rabi", "ising_coupling_A", "onsite_coefficient_B",
    "solution_from_json_dict", "solve_ladder_geometry",
    "solve_square_geometry",
    "ConstrainedBasis", "check_gauss_law", "enumerate_link_sector",
    "enumerate_sector", "from_dual", "full_dual_basis", "height_field",
    "to_dual",
    "SparseOperator", "add_penalty", "add_pinning", "build_atom_level",
    "build_dual_rk", "build_effective_spin", "build_original_rk",
    "build_pxp_chain", "build_rydberg_rk", "build_transverse_drive",
    "linear_combination", "pxp_chain_basis",
    "RvbsDiagnostic", "StructureFactorReport", "compute_report",
    "correlation", "fidelity", "flippable_count", "reciprocal_grid",
    "rvbs_signature", "structure_factor",
    "GroundStateResult", "PulseSpec", "SweepResult", "adiabatic_sweep",
    "dense_spectrum", "evolve", "ground_state",
    "__version__",
]
