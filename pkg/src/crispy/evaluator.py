"""Baseline comparison over an execution-history dataset.

For each (job, dataset label) group the evaluator reports the normalized
cost reached by four selection strategies: Random (mean over recorded
configs), Medium (one fixed config), BFA (best-for-all ranking, leaving the
job out) and Crispy (BFA ranking filtered by the memory requirement).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

from .core import Catalog, CatalogError, ClusterConfig, ExecutionRecord, Framework, MemoryModel
from .memmodel import RequirementParams
from .selector import (
    RankedConfig,
    SelectionError,
    bfa_rank,
    groups_of,
    normalize_costs,
    select,
)

HISTORY_COLUMNS = ("job", "framework", "dataset_label", "machine_type", "node_count", "runtime_seconds")
OPTIONAL_COLUMNS = ("cost", "dataset_bytes")
STRATEGIES = ("random", "medium", "bfa", "crispy")
MISSING = "-"
_TITLES = {"random": "Random", "medium": "Medium", "bfa": "BFA", "crispy": "Crispy"}


class HistoryFormatError(ValueError):
    pass


@dataclass
class EvaluationRow:
    job_name: str
    framework: str
    dataset_label: str
    random_cost: Optional[float]
    medium_cost: Optional[float]
    bfa_cost: Optional[float]
    crispy_cost: Optional[float]

    def value(self, strategy: str) -> Optional[float]:
        return getattr(self, f"{strategy}_cost")


def load_history(path: Union[str, Path], catalog: Catalog) -> List[ExecutionRecord]:
    """Parse the canonical history CSV, resolving machine types in ``catalog``.

    Malformed rows are reported together with their line numbers; machine
    types missing from the catalog are listed in a single CatalogError.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.lstrip().startswith("#"))
        missing_cols = [c for c in HISTORY_COLUMNS if c not in (reader.fieldnames or [])]
        if missing_cols:
            raise HistoryFormatError(f"{path}: missing columns {missing_cols}")
        rows = [(reader.line_num, row) for row in reader]

    unknown = catalog.missing(row["machine_type"].strip() for _, row in rows)
    if unknown:
        raise CatalogError(f"{path}: machine types not in catalog: {', '.join(unknown)}")

    records, problems = [], []
    for line, row in rows:
        try:
            cost = (row.get("cost") or "").strip()
            size = (row.get("dataset_bytes") or "").strip()
            records.append(ExecutionRecord(
                job_name=row["job"].strip(),
                framework=Framework.parse(row["framework"]),
                dataset_label=row["dataset_label"].strip(),
                config=catalog.config(row["machine_type"].strip(), int(row["node_count"])),
                runtime_seconds=float(row["runtime_seconds"]),
                cost=float(cost) if cost else None,
                dataset_bytes=int(size) if size else None,
            ))
        except (TypeError, ValueError) as exc:
            problems.append(f"line {line}: {exc}")
    if problems:
        raise HistoryFormatError(f"{path}: {len(problems)} malformed rows\n  " + "\n  ".join(problems))
    return records


def write_history(records: Iterable[ExecutionRecord], path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS + OPTIONAL_COLUMNS)
        for r in records:
            writer.writerow([r.job_name, r.framework.value, r.dataset_label, r.config.machine_type.name,
                             r.config.node_count, repr(r.runtime_seconds), repr(r.cost),
                             "" if r.dataset_bytes is None else r.dataset_bytes])


def baseline_random(group: Sequence[ExecutionRecord]) -> float:
    """Expected normalized cost of picking a recorded config uniformly at random."""
    norm = normalize_costs(group)
    return sum(norm.values()) / len(norm)


def baseline_medium(group: Sequence[ExecutionRecord], medium_config: ClusterConfig) -> Optional[float]:
    return normalize_costs(group).get(medium_config.key)


def _present(ranking: Sequence[RankedConfig], norm: Mapping) -> List[RankedConfig]:
    return [rc for rc in ranking if rc.config.key in norm]


def _group(history: Sequence[ExecutionRecord], job_name: str, dataset_label: str) -> List[ExecutionRecord]:
    group = [r for r in history if r.job_name == job_name and r.dataset_label == dataset_label]
    if not group:
        raise SelectionError(f"no records for job {job_name!r} / {dataset_label!r}")
    return group


def baseline_bfa(history: Sequence[ExecutionRecord], job_name: str, dataset_label: str) -> float:
    """Normalized cost of the best-for-all choice for this group.

    The ranking is built without any record of ``job_name``; configs never
    run for this group are skipped.
    """
    group = _group(history, job_name, dataset_label)
    norm = normalize_costs(group)
    present = _present(bfa_rank(history, group[0].framework, exclude_job=job_name), norm)
    if not present:
        raise SelectionError(f"no ranked config was executed for {job_name!r} / {dataset_label!r}")
    return norm[present[0].config.key]


def evaluate_crispy(history: Sequence[ExecutionRecord], job_name: str, dataset_label: str,
                    model: Optional[MemoryModel], full_dataset_bytes: Optional[int],
                    params: RequirementParams = RequirementParams()) -> float:
    group = _group(history, job_name, dataset_label)
    norm = normalize_costs(group)
    present = _present(bfa_rank(history, group[0].framework, exclude_job=job_name), norm)
    if not present:
        raise SelectionError(f"no ranked config was executed for {job_name!r} / {dataset_label!r}")
    if model is not None and not full_dataset_bytes:
        raise SelectionError(f"full dataset size unknown for {job_name!r} / {dataset_label!r}")
    rec = select(present, model, full_dataset_bytes or 1, params)
    return norm[rec.config.key]


@dataclass(frozen=True)
class JobModel:
    """A fitted memory model for one job plus full dataset sizes per label."""

    job_name: str
    model: MemoryModel
    full_dataset_bytes: Dict[str, int]

    def to_dict(self):
        d = {"job": self.job_name, "full_dataset_bytes": dict(self.full_dataset_bytes)}
        d.update(self.model.to_dict())
        return d

    @classmethod
    def from_dict(cls, d) -> "JobModel":
        return cls(d["job"], MemoryModel.from_dict(d),
                   {k: int(v) for k, v in (d.get("full_dataset_bytes") or {}).items()})


def load_models(models_dir: Union[str, Path]) -> Dict[str, JobModel]:
    """Read every ``*.json`` job-model file in ``models_dir``."""
    out = {}
    for path in sorted(Path(models_dir).glob("*.json")):
        jm = JobModel.from_dict(json.loads(path.read_text()))
        out[jm.job_name] = jm
    return out


def evaluate(history: Sequence[ExecutionRecord], medium_config: Optional[ClusterConfig] = None,
             models: Optional[Mapping[str, JobModel]] = None,
             params: RequirementParams = RequirementParams()) -> List[EvaluationRow]:
    """One row per (job, dataset label) group, in order of first appearance."""
    models = models or {}
    rows = []
    for (job, label), group in groups_of(history).items():
        jm = models.get(job)
        model, full = None, None
        if jm is not None:
            model = jm.model
            full = jm.full_dataset_bytes.get(label) or group[0].dataset_bytes
        rows.append(EvaluationRow(
            job_name=job,
            framework=group[0].framework.value,
            dataset_label=label,
            random_cost=baseline_random(group),
            medium_cost=baseline_medium(group, medium_config) if medium_config else None,
            bfa_cost=baseline_bfa(history, job, label),
            crispy_cost=evaluate_crispy(history, job, label, model, full, params),
        ))
    return rows


def column_means(rows: Sequence[EvaluationRow]) -> Dict[str, Optional[float]]:
    """Per-strategy mean, skipping missing cells."""
    means = {}
    for s in STRATEGIES:
        vals = [v for v in (r.value(s) for r in rows) if v is not None]
        means[s] = math.fsum(vals) / len(vals) if vals else None
    return means


def _cell(v: Optional[float]) -> str:
    return MISSING if v is None else f"{v:.4f}"


def report(rows: Sequence[EvaluationRow], profiling_times: Optional[Mapping[str, float]] = None) -> str:
    """Render the cost comparison table and, optionally, profiling times."""
    if not rows:
        raise ValueError("nothing to report")
    wj = max(len("Job"), *(len(r.job_name) for r in rows), len("Mean"))
    wf = max(len("Framework"), *(len(r.framework) for r in rows))
    wl = max(len("Dataset"), *(len(r.dataset_label) for r in rows))
    head = f"{'Job':<{wj}}  {'Framework':<{wf}}  {'Dataset':<{wl}}" + "".join(f"  {_TITLES[s]:>8}" for s in STRATEGIES)
    lines = ["Normalized job execution cost", head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.job_name:<{wj}}  {r.framework:<{wf}}  {r.dataset_label:<{wl}}"
                     + "".join(f"  {_cell(r.value(s)):>8}" for s in STRATEGIES))
    lines.append("=" * len(head))
    means = column_means(rows)
    lines.append(f"{'Mean':<{wj}}  {'':<{wf}}  {'':<{wl}}" + "".join(f"  {_cell(means[s]):>8}" for s in STRATEGIES))
    if any(r.value(s) is None for r in rows for s in STRATEGIES):
        lines.append(f"{MISSING}: no execution recorded for that configuration")
    if profiling_times:
        lines += ["", "Profiling time", f"{'Job':<{wj}}  {'Time (s)':>9}"]
        for job, secs in profiling_times.items():
            lines.append(f"{job:<{wj}}  {secs:>9.0f}")
        mean = math.fsum(profiling_times.values()) / len(profiling_times)
        lines.append(f"{'Mean':<{wj}}  {mean:>9.0f}")
    return "\n".join(lines) + "\n"


def results_dict(rows: Sequence[EvaluationRow]) -> dict:
    return {"rows": [asdict(r) for r in rows], "means": column_means(rows)}


def write_results(rows: Sequence[EvaluationRow], path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(results_dict(rows), indent=2, sort_keys=True) + "\n")
