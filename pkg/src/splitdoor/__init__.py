"""Split-door causal effect estimation for time-series panels."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    Channel,
    DailyPanel,
    DataError,
    PairPeriod,
    VisitEvent,
    apply_popularity_filter,
    filter_constant_direct,
    ingest_events,
    read_panel_csv,
    slice_periods,
    write_panel_csv,
)
from .discovery import DiscoveryRun, SplitDoorInstance, discover, screen_periods, threshold  # noqa: E402
from .estimation import aggregate_focal, group_breakdown, mean_effect, naive_ctr  # noqa: E402
from .independence import IndependenceResult, distance_correlation, randomization_pvalue  # noqa: E402
from .multiplicity import (  # noqa: E402
    effect_interval,
    fndr_bound,
    nettleton_pi_indep,
    storey_pi_indep,
)
from .pipeline import RunConfig, alpha_sweep, run_pipeline  # noqa: E402
from .sensitivity import (  # noqa: E402
    SensitivityConfig,
    inject_confound,
    linear_bias_prediction,
    sensitivity_surface,
)
from .synthgen import GeneratorParams, generate_panel, theoretical_cov  # noqa: E402
