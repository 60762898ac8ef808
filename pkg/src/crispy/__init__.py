"""Profile a data-processing job on small samples, extrapolate its memory
needs, and pick a cluster configuration with enough total memory."""

from .core import (
    GiB,
    MiB,
    Catalog,
    ClusterConfig,
    ExecutionRecord,
    Family,
    Framework,
    MachineType,
    MemoryModel,
    MemorySample,
    ProfilingRun,
    Recommendation,
    Strategy,
    execution_cost,
    load_catalog,
    total_cluster_memory,
)
from .evaluator import (
    EvaluationRow,
    baseline_bfa,
    baseline_medium,
    baseline_random,
    evaluate,
    evaluate_crispy,
    load_history,
    report,
)
from .memmodel import (
    RequirementParams,
    decide_linearity,
    estimate_requirement,
    fit_linear,
    fit_memory_model,
    r2_score,
)
from .profiler import JobSpec, MonitorConfig, capture_baseline, profile_job, read_system_memory, run_profiled
from .sampler import SamplePlan, adjust_base_fraction, materialize_sample, plan_samples
from .selector import RankedConfig, bfa_rank, normalize_costs, select

__version__ = "0.1.0"

__all__ = [
    "GiB",
    "MiB",
    "Catalog",
    "ClusterConfig",
    "ExecutionRecord",
    "Family",
    "Framework",
    "MachineType",
    "MemoryModel",
    "MemorySample",
    "ProfilingRun",
    "Recommendation",
    "Strategy",
    "execution_cost",
    "load_catalog",
    "total_cluster_memory",
    "EvaluationRow",
    "baseline_bfa",
    "baseline_medium",
    "baseline_random",
    "evaluate",
    "evaluate_crispy",
    "load_history",
    "report",
    "RequirementParams",
    "decide_linearity",
    "estimate_requirement",
    "fit_linear",
    "fit_memory_model",
    "r2_score",
    "JobSpec",
    "MonitorConfig",
    "capture_baseline",
    "profile_job",
    "read_system_memory",
    "run_profiled",
    "SamplePlan",
    "adjust_base_fraction",
    "materialize_sample",
    "plan_samples",
    "RankedConfig",
    "bfa_rank",
    "normalize_costs",
    "select",
]
