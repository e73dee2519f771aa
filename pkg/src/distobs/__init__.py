"""Reduced-order distributed observers for LTI plants over directed networks.

Synthesis of the order Nn - sum(p_i) observer network, numerical certificates
(cancellation identity, feasibility LMI, invariant-subspace algebra,
convergence rate), and deterministic simulation of the coupled dynamics.
"""

from .error_system import (
    GlobalErrorSystem,
    build_error_system,
    certify_rate,
    lyapunov_decrease_check,
)
from .graph import (
    GraphSpectralData,
    GraphStructureError,
    NetworkGraph,
    is_strongly_connected,
    laplacian,
    perron_row_vector,
    spectral_data,
)
from .linalg import (
    FullRankFactorization,
    NodeDecomposition,
    full_rank_factorize,
    is_negative_definite,
    min_symmetric_eigenvalue,
    observability_decomposition,
    observability_matrix,
    solve_lyapunov,
    spectral_abscissa,
)
from .problem import (
    ProblemFile,
    ProblemFormatError,
    graph_from_fragment,
    load_problem,
    load_realization,
    problem_from_dict,
    realization_from_dict,
    realization_to_dict,
    save_realization,
    write_trace_csv,
)
from .simulate import (
    SimulationConfig,
    SimulationDiverged,
    SimulationTrace,
    check_invariance,
    equilibrium_initial_observer_states,
    estimate_rate,
    simulate,
    suggested_timestep,
)
from .synthesis import (
    NodeGains,
    ObserverRealization,
    Plant,
    SynthesisError,
    SynthesisParameters,
    assemble_gains,
    compute_epsilon,
    place_injection,
    select_gamma,
    solve_pie,
    synthesize,
    verify_cancellation,
    verify_lmi_th1,
)

__version__ = "0.1.0"
