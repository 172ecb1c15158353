"""Numerical laboratory for one-parameter families of piecewise expanding
interval maps: invariant densities, Green-Kubo variances, parameter-space
transversality and partitions, and Monte Carlo verification of the
CLT/LIL and block laws for the critical-orbit process.
"""

from . import errors
from .families import (
    GOLDEN_BETA,
    MapFamily,
    OrbitRecord,
    branch_points,
    deriv_a_at,
    deriv_x_at,
    eval_map,
    make_family,
    orbit,
)
from .observables import (
    Observable,
    cos1,
    const,
    erdos_fortet as erdos_fortet_observable,
    from_cells,
    identity,
    indicator,
    norm_alpha,
    osc,
    poly,
    seminorm_alpha,
    trig,
)
from .ulam import (
    MomentInterpolator,
    UlamSystem,
    VarianceResult,
    autocovariances,
    build_ulam,
    correlation,
    decay_rate,
    direct_variance,
    green_kubo_sigma,
    invariant_density,
    lasota_yorke_probe,
    normalize_observable,
    sigma_scan,
    solve,
    transfer_pointwise,
)
from .partitions import (
    ParameterPartition,
    TransversalityReport,
    build_partition,
    condition_iii_sum,
    distortion_ratio,
    parameter_vs_phase_growth,
    small_image_fraction,
    transversality_ratios,
)
from .experiments import (
    BlockDecomposition,
    ExperimentReport,
    PartitionCache,
    XiProcess,
    block_decomposition_at,
    block_lln_check,
    block_lln_experiment,
    build_blocks,
    clt_experiment,
    dyadic_indicators,
    erdos_fortet,
    lil_experiment,
    step_function_chi,
    typicality_check,
    typicality_experiment,
    variance_growth,
    xi_process,
)

__version__ = "0.1.0"
