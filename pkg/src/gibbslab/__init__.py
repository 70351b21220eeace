"""Numerical laboratory for finite-alphabet lattice spin systems.

Exact, desk-scale machinery for windows and configurations on Z^d, local
functions and their oscillation vectors, finite-volume Gibbs measures,
relative entropy densities, Gaussian concentration scans, an
oscillation-budget distance computed by linear programming, and heat-bath
Glauber dynamics with reversibility checks.
"""

__version__ = "0.1.0"

from .lattice import (
    Configuration,
    SpinAlphabet,
    TabulationCapError,
    Window,
    box_window,
    cube_window,
    minkowski_sum,
    patch,
    restrict_configuration,
    tabulation_cap,
    translate_configuration,
)
from .funcspace import (
    AxiomCheckReport,
    DiameterRule,
    LocalFunction,
    MetricQuotientRule,
    OscillationVector,
    axiom_check,
    ergodic_sum,
    local_approximation,
    oscillation_vector,
    random_local_function,
)
from .measures import (
    EmpiricalSource,
    IsingChainSource,
    Potential,
    PotentialTerm,
    ProductSource,
    TorusGibbsSource,
    TransferMatrix,
    WindowMeasure,
    bernoulli_product,
    decimate_ising_1d,
    expectation,
    finite_volume_gibbs,
    hamiltonian,
    ising2d_potential,
    ising_potential,
    load_potential,
    log_partition,
    product_measure,
    torus_gibbs,
    transfer_matrix_marginal,
)
from .entropy import (
    EntropyDensityTrace,
    entropy_density_sequence,
    ising_entropy_density_exact,
    relative_entropy_window,
    variational_value,
)
from .concentration import (
    GcbScanResult,
    default_beta_grid,
    empirical_constant,
    gcb_log_moment,
    gcb_scan,
    quantitative_bound_check,
    young_check,
)
from .metric import (
    MetricLpSolution,
    distance_lp,
    distance_lp_measures,
    wasserstein_hamming,
)
from .dynamics import (
    TorusState,
    convergence_experiment,
    detailed_balance_check,
    heat_bath_sweep,
    initial_state,
    sample_torus_gibbs,
    site_conditional,
)
