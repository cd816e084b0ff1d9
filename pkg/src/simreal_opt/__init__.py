"""Sim-to-real gait tuning with an entropy-search surrogate loop."""

from .acquisition import (
    AcquisitionConfig,
    PminDistribution,
    Selection,
    entropy,
    expected_entropy_change,
    make_grid,
    pmin_distribution,
    select_next,
)
from .benchmark import run_benchmark, score_function, write_benchmark_csv
from .bounds import Box
from .cli import main
from .config import DEFAULTS, RunConfig, build_config, parse_config
from .errors import (
    BudgetExhaustedError,
    ConfigError,
    InvalidArgumentError,
    NumericalError,
    OperatorAbort,
    OperatorSkip,
)
from .gp import (
    GPModel,
    HyperBounds,
    NoiseConfig,
    Observation,
    fit,
    log_marginal_likelihood,
    optimize_hyperparameters,
    posterior_joint,
    posterior_mean,
    predict,
    sample_posterior,
    standardize,
)
from .gait_sim import (
    Command,
    CommandSequence,
    CostReport,
    GaitParams,
    GaitState,
    PenaltyConfig,
    PlantConfig,
    Trace,
    corrective_action,
    default_sequence,
    expected_waveform,
    gait_phase,
    mid_gains,
    penalty,
    plant_step,
    push_impulse,
    real_plant,
    rollout,
    simulated_cost,
    surrogate_real_cost,
    write_trace_csv,
    DEFAULT_GAIN_BOUNDS,
)
from .kernels import (
    AugmentedParam,
    CompositeKernelConfig,
    Fidelity,
    RQConfig,
    aug,
    composite_kernel,
    delta_kernel,
    kernel_cross,
    kernel_matrix,
    rq_kernel,
)
from .history import (
    read_history,
    record_to_json,
    summary_to_json,
    validate_history,
    write_history,
)
from .optimizer import (
    Budget,
    GPSettings,
    ImprovementReport,
    IterationRecord,
    LoopSettings,
    Problem,
    RunHistory,
    RunResult,
    evaluate_improvement,
    final_incumbent,
    grid_oracle,
    nelder_mead,
    random_search,
    run_bo,
)
from .runner import (
    FallCounter,
    build_problem,
    improvement_report,
    run_from_config,
    validate_run,
)

__version__ = "0.1.0"
