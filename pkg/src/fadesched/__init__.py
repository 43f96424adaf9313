"""Link scheduling for wireless networks with finite-state fading channels."""

__version__ = "0.1.0"

from .analysis import (
    LpfReport,
    RegionCertificate,
    lambda_membership,
    lambdahat_membership,
    lpf,
    max_load_scale,
    subgraph_sigma,
    gfs_stability_guaranteed,
)
from .arrivals import (
    BernoulliBatchArrivals,
    DeterministicArrivals,
    PoissonArrivals,
    StateTableArrivals,
    adversarial_table,
    mean_rate_vector,
    sample_arrivals,
)
from .fading import FactoredFadingModel, FadingModel, build_product_model, mean_rates, sample_state
from .lp import LPResult, lp_solve
from .network import (
    NetworkGraph,
    RateAllocationVector,
    build_khop_interference,
    enumerate_maximal_schedules,
    is_feasible,
)
from .schedulers import (
    QueueState,
    SchedulerKind,
    apply_departures,
    gfs_route,
    gfs_select,
    gms_select,
    maxweight_select,
    nonopp_select,
)
from .sim import Metrics, SimConfig, StabilityVerdict, estimate_stability, load_sweep, run

__all__ = [
    "__version__",
    "adversarial_table",
    "apply_departures",
    "BernoulliBatchArrivals",
    "build_khop_interference",
    "build_product_model",
    "DeterministicArrivals",
    "enumerate_maximal_schedules",
    "estimate_stability",
    "FactoredFadingModel",
    "FadingModel",
    "gfs_route",
    "gfs_select",
    "gfs_stability_guaranteed",
    "gms_select",
    "is_feasible",
    "lambda_membership",
    "lambdahat_membership",
    "load_sweep",
    "lp_solve",
    "lpf",
    "LpfReport",
    "LPResult",
    "max_load_scale",
    "maxweight_select",
    "mean_rate_vector",
    "mean_rates",
    "Metrics",
    "NetworkGraph",
    "nonopp_select",
    "PoissonArrivals",
    "QueueState",
    "RateAllocationVector",
    "RegionCertificate",
    "run",
    "sample_arrivals",
    "sample_state",
    "SchedulerKind",
    "SimConfig",
    "StabilityVerdict",
    "StateTableArrivals",
    "subgraph_sigma",
]
