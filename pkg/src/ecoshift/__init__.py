"""Performance-aware distribution of reclaimed power across CPU-GPU applications."""

from .allocator import AllocationResult, AppAllocation, dp_allocate, dp_allocate_rolling
from .completion import (
    CompletionModel,
    SamplingPlan,
    default_plan,
    fit,
    load_model,
    predict_surface,
    prediction_accuracy,
    sample_surface,
    save_model,
)
from .errors import *  # noqa: F401,F403
from .harness import (
    ComparisonReport,
    CompletionPredictor,
    GapStudyConfig,
    ScenarioSpec,
    gap_study,
    jain_index,
    load_scenario,
    run_comparison,
)
from .options import ImprovementCurve, OptionTable, build_option_table, improvement_curve
from .oracle import brute_force_allocate, oracle_gap
from .policies import DemandSignal, demand_proportional_allocate, fair_share_allocate, no_distribution
from .surface import (
    Application,
    CapGrid,
    CapPair,
    PerformanceSurface,
    load_apps,
    normalized_performance,
    relative_improvement,
    save_apps,
)
from .synthetic import SyntheticSurfaceParams, generate_surface, synthetic_app

__version__ = "0.1.0"
