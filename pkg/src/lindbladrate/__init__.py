"""Lindblad rate equations: coupled Lindblad-like evolutions of auxiliary
density matrices with classical rate-equation structure.

The physical state is the channel sum ``rho_S = sum_R rho_R``; channels
exchange weight like a continuous-time Markov chain while each carries its
own Lindblad self-dynamics.  The package provides a deterministic solver
(exact exponential / adaptive RK), spectral stationary analysis,
Laplace-domain memory kernels, a reproducible Monte Carlo trajectory
unraveling of Walk-class models, closed-form qubit dephasing/depolarizing
reservoirs used as oracles, and the ``lre`` command line tool.
"""

from .linalg import (
    choi_matrix,
    devectorize,
    hamiltonian_superop,
    hermitian_eigs,
    kraus_superop,
    matrix_exp,
    psd_check,
    sandwich_superop,
    vectorize,
)
from .model import (
    LindbladRateModel,
    MarkovDecayError,
    ModelStructureError,
    OperatorBasis,
    RateBlock,
    StackedGenerator,
    StackedState,
    ValidationReport,
    assemble_generator,
    build_from_correlations,
    channel_generator,
    decompose_random_lindblad,
    initial_stacked_state,
    reduce_from_tripartite,
    validate_model,
)
from .qubit import (
    PRESETS,
    DephasingParams,
    DepolarizingParams,
    QubitElements,
    cp_bound_check,
    dephasing_kernel,
    dephasing_model,
    dephasing_stationary,
    depolarizing_model,
    depolarizing_stationary,
    h_of_t,
    h_of_u,
    preset_params,
)
from .solver import (
    DefectiveSpectrumError,
    EvolutionResult,
    KernelSample,
    SingularSolveError,
    SolverError,
    StationaryProjector,
    evolve,
    homogeneity_check,
    memory_kernel_at,
    reduced_resolvent,
    stationary_projector,
    stationary_state,
    system_state,
)
from .stochastic import (
    EnsembleAccumulator,
    StochasticModel,
    TrajectoryState,
    channel_occupation,
    convert_walk_to_rate_model,
    init_channel,
    run_ensemble,
    sample_sojourn,
    select_next_channel,
    step_trajectory,
)

__version__ = "0.1.0"
