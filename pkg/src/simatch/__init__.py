"""Sequential importance sampling for perfect matchings in banded bipartite graphs."""

from .bipartite import (
    CUSTOM,
    DIST2,
    FIB1,
    FIB2,
    BipartiteGraph,
    Family,
    GraphError,
    allowable_options,
    bregman_bound,
    count_exact,
    custom_graph,
    distance,
    enumerate_matchings,
    family_count,
    fibonacci,
    load_graph,
    make_family,
)
from .experiments import (
    EstimateReport,
    estimate_count,
    estimate_statistic,
    reproduce_table,
    run_clt,
    star_variance_sweep,
)
from .limits import LimitExceededError, Limits, current_limits
from .moments import MomentReport, exhaustive_moments
from .sis import (
    DecisionTrace,
    OrderPolicy,
    ChoiceRule,
    Sampler,
    path_probability,
    resolve_algorithm,
    sample,
)

__version__ = "0.1.0"


__all__ = [
    "BipartiteGraph",
    "CUSTOM",
    "ChoiceRule",
    "DIST2",
    "DecisionTrace",
    "EstimateReport",
    "FIB1",
    "FIB2",
    "Family",
    "GraphError",
    "LimitExceededError",
    "Limits",
    "MomentReport",
    "OrderPolicy",
    "Sampler",
    "allowable_options",
    "bregman_bound",
    "count_exact",
    "current_limits",
    "custom_graph",
    "distance",
    "enumerate_matchings",
    "estimate_count",
    "estimate_statistic",
    "exhaustive_moments",
    "family_count",
    "fibonacci",
    "load_graph",
    "make_family",
    "path_probability",
    "reproduce_table",
    "resolve_algorithm",
    "run_clt",
    "sample",
    "star_variance_sweep",
]
