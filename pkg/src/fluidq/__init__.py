"""Static fluid analysis, path diagnostics and many-server simulation for
multiclass parallel-server queueing networks."""

from .model import (
    DEFAULT_TOL,
    ActivitySet,
    DimensionMismatch,
    EffectiveRates,
    ModelError,
    NegativeServiceRate,
    NetworkModel,
    NonPositiveRate,
    activity_set,
    effective_rates,
    load_model,
    model_to_dict,
    save_model,
    validate_model,
)
from .linprog import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    LPResult,
    NumericalFailure,
    optimal_range,
    solve_lp,
)
from .static_fluid import (
    AssumptionReport,
    FluidSolution,
    GenerationFailed,
    InfeasibleModel,
    check_assumptions,
    generate_critical_instance,
    solve_static_allocation,
)
from .paths import (
    CLASS_DEPENDENT,
    CLOSED,
    NEGATIVE,
    NEITHER,
    NotATree,
    OPEN,
    POOL_DEPENDENT,
    POSITIVE,
    SimplePath,
    ZERO,
    assign_signs,
    basic_cycle_weights,
    classify_dependence,
    enumerate_simple_paths,
    path_weights,
)
from .optimality import (
    AllocationPolytope,
    GammaFamily,
    NC_IMPOSSIBLE,
    NC_POSSIBLE,
    NC_UNKNOWN,
    NCVerdict,
    PerturbationCheck,
    ThroughputVerdict,
    ZeroPathEvidence,
    combined_zero_path_check,
    gamma_family,
    max_throughput,
    nc_verdict,
    throughput_verdict_lp,
    throughput_verdict_paths,
    zero_path_check,
)
from .simulator import (
    ExperimentResult,
    ExperimentRow,
    GreedyBasic,
    IdlePolicy,
    NegativePathPump,
    Policy,
    PolicyViolation,
    ScaledTrajectories,
    ScalingViolation,
    SimResult,
    SystemInstance,
    SystemState,
    build_system,
    derive_seed,
    make_policy,
    run_nc_experiment,
    scale_result,
    simulate,
)
from .cli import AnalysisReport, render_report, run_analysis

__all__ = [name for name in dir() if not name.startswith("_")]
