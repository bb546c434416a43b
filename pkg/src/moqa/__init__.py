"""Compile min-max problems over quadratic binary objectives into diagonal
Pauli-Z Hamiltonians by the power-sum approximation, and check the result by
brute force."""

__version__ = "0.1.0"

from .annealer import AnnealResult, AnnealSchedule, anneal, local_energy_delta
from .estimators import AnnealingSolver, MOQAHamiltonian
from .exceptions import (
    ConvergenceError,
    MOQAError,
    NumericRangeError,
    PreconditionError,
    ResourceBudgetError,
    SymmetryError,
    ValidationError,
)
from .expansion import (
    ExpansionTerms,
    allocation_count,
    allocations,
    expand,
    expand_dense,
    expand_sparse,
    mask_of,
    multinomial,
    normalize_for_expansion,
    resource_report,
    symmetry_reduced_expand,
    threshold,
)
from .generators import (
    ConstrainedProblem,
    LinearConstraint,
    PartitionGraph,
    constrained_to_multiobjective,
    partition_problem,
    random_constrained,
    random_multiobjective,
    random_partition_graph,
    spp_problem,
)
from .hamiltonian import SparsePauliHamiltonian
from .oracle import (
    SpectrumReport,
    check_sandwich,
    guarantee_holds,
    landscape_max,
    landscape_p,
    spectrum,
    threshold_p,
)
from .qubo import (
    IsingObjective,
    MultiObjectiveProblem,
    QuboMatrix,
    apply_shift,
    augmented_matrix,
    bits_to_spins,
    compute_shift,
    evaluate_objective,
    qubo_to_ising,
    spins_to_bits,
)
