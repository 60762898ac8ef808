"""Linear memory model: fit, R^2 gate, and cluster memory requirement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from .core import GiB, LINEARITY_THRESHOLD, MemoryModel, ProfilingRun

Point = Tuple[float, float]


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class RequirementParams:
    per_node_overhead_bytes: int = 2 * GiB
    leeway_factor: float = 0.10

    def __post_init__(self):
        if self.per_node_overhead_bytes < 0:
            raise ValueError("per_node_overhead_bytes must be >= 0")
        if self.leeway_factor < 0:
            raise ValueError("leeway_factor must be >= 0")


def _arrays(points: Iterable[Point]):
    pts = np.asarray(list(points), dtype=float)
    if pts.size == 0:
        raise ModelError("no points")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ModelError("points must be (x, y) pairs")
    return pts[:, 0], pts[:, 1]


def fit_linear(points: Iterable[Point]) -> Tuple[float, float]:
    """Ordinary least squares line through ``points``; returns (slope, intercept)."""
    x, y = _arrays(points)
    if len(x) < 2:
        raise ModelError("need at least two points")
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise ModelError("all input sizes are equal; slope is undetermined")
    slope = float(dx @ (y - ym)) / sxx
    return slope, float(ym - slope * xm)


def r2_score(points: Iterable[Point], slope: float, intercept: float) -> float:
    """Coefficient of determination of the line on ``points``.

    With constant y the score is 1.0 for a perfect fit and 0.0 otherwise.
    """
    x, y = _arrays(points)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    dy = y - y.mean()
    ss_tot = float(dy @ dy)
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def decide_linearity(r2: float) -> bool:
    return r2 > LINEARITY_THRESHOLD


def fit_memory_model(points: Sequence[Point]) -> MemoryModel:
    """Fit and score on the same (training) points."""
    points = list(points)
    slope, intercept = fit_linear(points)
    return MemoryModel(slope, intercept, r2_score(points, slope, intercept), len(points))


def points_from_runs(runs: Iterable[ProfilingRun]) -> list:
    """(sample bytes, peak job bytes) for every successful run."""
    return [(r.sample_bytes, r.peak_job_bytes) for r in runs if r.succeeded]


def predicted_job_bytes(model: MemoryModel, full_dataset_bytes: int) -> int:
    """Extrapolated job memory for the full dataset, clamped at zero."""
    return max(int(round(model.predict(full_dataset_bytes))), 0)


def estimate_requirement(model: MemoryModel, full_dataset_bytes: int, node_count: int,
                         params: RequirementParams = RequirementParams()) -> int:
    """Total cluster memory needed to run the full dataset on ``node_count`` nodes."""
    if not model.is_linear:
        raise ModelError(f"model is not linear (R^2 = {model.r2:.4f}); use a zero requirement instead")
    if full_dataset_bytes <= 0:
        raise ModelError("full dataset size must be positive")
    if node_count < 1:
        raise ModelError("node_count must be >= 1")
    job = predicted_job_bytes(model, full_dataset_bytes)
    return int(round(job * (1 + params.leeway_factor))) + node_count * params.per_node_overhead_bytes


def model_report(model: MemoryModel) -> str:
    verdict = "linear" if model.is_linear else "not linear"
    return "\n".join([
        f"slope:     {model.slope:.6g} bytes/byte",
        f"intercept: {model.intercept / GiB:.4f} GiB",
        f"r2:        {model.r2:.6f}",
        f"verdict:   {verdict} (threshold r2 > {LINEARITY_THRESHOLD})",
    ])
