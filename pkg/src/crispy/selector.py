"""Best-for-all ranking and memory-constrained configuration selection."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import (
    ClusterConfig,
    ExecutionRecord,
    Framework,
    GiB,
    MemoryModel,
    Recommendation,
    Strategy,
    total_cluster_memory,
)
from .memmodel import RequirementParams, estimate_requirement, predicted_job_bytes

ConfigKey = Tuple[str, int]


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class RankedConfig:
    config: ClusterConfig
    mean_normalized_cost: float
    support_count: int


def group_costs(records: Iterable[ExecutionRecord]) -> Dict[ConfigKey, float]:
    """Cost per config within one group; repeated executions are averaged."""
    sums: Dict[ConfigKey, List[float]] = defaultdict(list)
    for r in records:
        sums[r.config.key].append(r.cost)
    return {k: sum(v) / len(v) for k, v in sums.items()}


def normalize_costs(records: Iterable[ExecutionRecord]) -> Dict[ConfigKey, float]:
    """Divide each config's cost by the cheapest cost in the group."""
    costs = group_costs(records)
    if not costs:
        raise SelectionError("cannot normalize an empty group")
    bad = [k for k, c in costs.items() if not c > 0]
    if bad:
        raise SelectionError(f"non-positive cost for {bad}")
    lo = min(costs.values())
    return {k: c / lo for k, c in costs.items()}


def groups_of(history: Iterable[ExecutionRecord]) -> Dict[Tuple[str, str], List[ExecutionRecord]]:
    groups: Dict[Tuple[str, str], List[ExecutionRecord]] = defaultdict(list)
    for r in history:
        groups[r.group].append(r)
    return dict(groups)


def bfa_rank(history: Iterable[ExecutionRecord], framework: Framework,
             exclude_job: Optional[str] = None) -> List[RankedConfig]:
    """Rank configs by mean normalized cost over all other jobs of ``framework``.

    Every (job, dataset label) pair is its own group, and a config is
    averaged only over the groups in which it was executed.
    """
    framework = Framework(framework)
    kept = [r for r in history if r.framework is framework and r.job_name != exclude_job]
    if not kept:
        raise SelectionError(f"no {framework.value} history left after excluding job {exclude_job!r}")
    configs: Dict[ConfigKey, ClusterConfig] = {}
    acc: Dict[ConfigKey, List[float]] = defaultdict(list)
    for records in groups_of(kept).values():
        for r in records:
            configs[r.config.key] = r.config
        for key, value in normalize_costs(records).items():
            acc[key].append(value)
    ranked = [RankedConfig(configs[k], sum(v) / len(v), len(v)) for k, v in acc.items()]
    ranked.sort(key=lambda rc: (rc.mean_normalized_cost, total_cluster_memory(rc.config),
                                rc.config.machine_type.name, rc.config.node_count))
    return ranked


def _fallback(ranking: Sequence[RankedConfig], why: str) -> Recommendation:
    head = ranking[0]
    return Recommendation(
        config=head.config,
        job_memory_bytes=0,
        strategy=Strategy.BFA_FALLBACK,
        satisfied_memory_constraint=True,
        rationale=f"{why}; using the best-for-all configuration "
                  f"(mean normalized cost {head.mean_normalized_cost:.4f})",
    )


def select(ranking: Sequence[RankedConfig], model: Optional[MemoryModel], full_dataset_bytes: int,
           params: RequirementParams = RequirementParams()) -> Recommendation:
    """Pick the best-ranked config whose total memory covers the requirement.

    Without a linear model the requirement is zero and the ranking head is
    returned. If no config is large enough, the one with the most total
    memory is returned with ``satisfied_memory_constraint=False``.
    """
    if not ranking:
        raise SelectionError("empty ranking")
    if model is None:
        return _fallback(ranking, "no memory model")
    if not model.is_linear:
        return _fallback(ranking, f"memory use is not linear in input size (R^2 = {model.r2:.4f})")
    job_bytes = predicted_job_bytes(model, full_dataset_bytes)
    if job_bytes == 0:
        return _fallback(ranking, "extrapolated job memory is zero")

    for pos, rc in enumerate(ranking):
        need = estimate_requirement(model, full_dataset_bytes, rc.config.node_count, params)
        if total_cluster_memory(rc.config) >= need:
            skipped = f"; skipped {pos} better-ranked configs with too little memory" if pos else ""
            return Recommendation(
                config=rc.config,
                job_memory_bytes=job_bytes,
                strategy=Strategy.CRISPY,
                satisfied_memory_constraint=True,
                rationale=f"needs {need / GiB:.2f} GiB on {rc.config.node_count} nodes, "
                          f"has {total_cluster_memory(rc.config) / GiB:.2f} GiB{skipped}",
                required_bytes=need,
            )

    biggest = max(ranking, key=lambda rc: total_cluster_memory(rc.config))
    need = estimate_requirement(model, full_dataset_bytes, biggest.config.node_count, params)
    return Recommendation(
        config=biggest.config,
        job_memory_bytes=job_bytes,
        strategy=Strategy.CRISPY,
        satisfied_memory_constraint=False,
        rationale=f"WARNING: no known configuration provides the {need / GiB:.2f} GiB required; "
                  f"choosing the largest ({total_cluster_memory(biggest.config) / GiB:.2f} GiB)",
        required_bytes=need,
    )


def recommendation_report(rec: Recommendation) -> str:
    return "\n".join([
        f"configuration: {rec.config}",
        f"total memory:  {total_cluster_memory(rec.config) / GiB:.2f} GiB",
        f"job memory:    {rec.job_memory_bytes / GiB:.2f} GiB",
        f"requirement:   {rec.required_bytes / GiB:.2f} GiB",
        f"strategy:      {rec.strategy.value}",
        f"satisfied:     {'yes' if rec.satisfied_memory_constraint else 'no'}",
        f"rationale:     {rec.rationale}",
    ])
