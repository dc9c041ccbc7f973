"""Two-species Lotka-Volterra competition dynamics on weighted patch networks.

Core surface:

- :mod:`patchlv.digraph` - weighted digraphs, cycle-balance certification,
  Laplacian cofactors, spanning-unicyclic covers, and the cofactor/cycle
  summation identity.
- :mod:`patchlv.spectral` - coupling matrices, Perron spectral bounds,
  invasion decay rates, and dispersal-scaling limits.
- :mod:`patchlv.dynamics` - the ODE systems, RK4 integration, equilibrium
  solvers, Jacobians, and the competitive order.
- :mod:`patchlv.classify` - the global-outcome classifier over dispersal
  and competition parameters, sweeps, thresholds, and limits.
- :mod:`patchlv.cli` - the ``patchlv`` command.

Hot kernels run in a compiled extension when available; set PATCHLV_PURE=1
to force the NumPy fallback (see ``patchlv.backend_name()``).
"""

from ._backend import COMPILED, backend_name
from .classify import (
    DispersalScan,
    GlobalOutcome,
    Outcome,
    Region,
    RegionLabel,
    SweepCell,
    ThresholdReport,
    classify_point,
    continuum_distance,
    equal_competition_scan,
    invasion_rates,
    large_mu_limit,
    large_mu_probe,
    shared_resource_thresholds,
    small_mu_limit,
    small_mu_probe,
    sweep,
    verify_cells,
)
from .digraph import (
    CycleBalanceCertificate,
    DirectedCycle,
    UnicyclicSubdigraph,
    WeightedDigraph,
    certify_cycle_balance,
    check_3cycle_balance,
    cycle_weight,
    enumerate_cycles,
    enumerate_spanning_unicyclic,
    graph_from_json,
    graph_to_json,
    is_sign_pattern_symmetric,
    is_strongly_connected,
    laplacian_cofactors,
    symmetrized_sum,
    tree_cycle_identity,
)
from .dynamics import (
    ContinuumFamily,
    EquilibriumKind,
    EquilibriumReport,
    OrderRelation,
    PatchSystem,
    SinglePatchParams,
    Stability,
    Trajectory,
    coexistence_equilibrium,
    continuum_family,
    equilibrium_report,
    integrate,
    jacobian,
    jacobian_spectral_bound,
    order_compare,
    semitrivial_equilibria,
    single_equilibrium,
    single_rhs,
    stability,
    system_from_json,
    system_to_json,
    trivial_equilibrium,
    two_rhs,
)
from .spectral import (
    SpectralLimits,
    SpectralReport,
    connection_matrix,
    lambda1,
    row_laplacian,
    scaled_bound_samples,
    spectral_bound,
    spectral_limits,
    theta,
)

__version__ = "0.1.0"
