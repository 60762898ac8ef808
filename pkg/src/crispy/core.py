"""Domain types shared across the package.

Memory quantities are integer bytes throughout; prices are currency per
hour and runtimes are seconds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

GiB = 1024**3
MiB = 1024**2

# strict: a training R^2 of exactly 0.99 is not linear
LINEARITY_THRESHOLD = 0.99


class CatalogError(ValueError):
    """Raised for malformed catalog files or unknown machine types."""


class Family(str, Enum):
    C = "c"
    M = "m"
    R = "r"
    OTHER = "other"

    @classmethod
    def parse(cls, value: str) -> "Family":
        value = value.strip().lower()
        for member in cls:
            if member.value == value:
                return member
        return cls.OTHER


class Framework(str, Enum):
    SPARK = "spark"
    HADOOP = "hadoop"
    OTHER = "other"

    @classmethod
    def parse(cls, value: str) -> "Framework":
        value = value.strip().lower()
        for member in cls:
            if member.value == value:
                return member
        return cls.OTHER


class Strategy(str, Enum):
    CRISPY = "crispy"
    BFA_FALLBACK = "bfa_fallback"


@dataclass(frozen=True)
class MachineType:
    name: str
    family: Family
    cores: int
    memory_bytes: int
    price_per_hour: float

    def __post_init__(self):
        if not self.name:
            raise ValueError("machine type needs a name")
        if self.cores < 1:
            raise ValueError(f"{self.name}: cores must be >= 1, got {self.cores}")
        if self.memory_bytes <= 0:
            raise ValueError(f"{self.name}: memory_bytes must be > 0")
        if self.price_per_hour < 0:
            raise ValueError(f"{self.name}: price_per_hour must be >= 0")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "family": self.family.value,
            "cores": self.cores,
            "memory_bytes": self.memory_bytes,
            "price_per_hour": self.price_per_hour,
        }


@dataclass(frozen=True)
class ClusterConfig:
    machine_type: MachineType
    node_count: int

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError(f"node_count must be >= 1, got {self.node_count}")

    @property
    def key(self) -> Tuple[str, int]:
        return (self.machine_type.name, self.node_count)

    def __str__(self) -> str:
        return f"{self.node_count} x {self.machine_type.name}"


def total_cluster_memory(config: ClusterConfig) -> int:
    """Aggregate memory of all nodes in ``config``, in bytes."""
    return config.node_count * config.machine_type.memory_bytes


def execution_cost(runtime_seconds: float, config: ClusterConfig) -> float:
    """Cost of running ``config`` for ``runtime_seconds``, billed per second."""
    if not runtime_seconds > 0:
        raise ValueError(f"runtime must be positive, got {runtime_seconds}")
    return runtime_seconds * config.node_count * config.machine_type.price_per_hour / 3600.0


class Catalog:
    """The set of purchasable machine types, keyed by name.

    One entry may be flagged as the "medium" machine type, used by the
    evaluator's Medium baseline.
    """

    def __init__(self, machine_types: Iterable[MachineType], medium: Optional[str] = None):
        self._types: Dict[str, MachineType] = {}
        for mt in machine_types:
            if mt.name in self._types:
                raise CatalogError(f"duplicate machine type {mt.name!r} in catalog")
            self._types[mt.name] = mt
        if medium is not None and medium not in self._types:
            raise CatalogError(f"medium machine type {medium!r} is not in the catalog")
        self.medium = medium

    def __contains__(self, name: str) -> bool:
        return name in self._types

    def __iter__(self):
        return iter(self._types.values())

    def __len__(self) -> int:
        return len(self._types)

    def __getitem__(self, name: str) -> MachineType:
        try:
            return self._types[name]
        except KeyError:
            raise CatalogError(f"unknown machine type {name!r}") from None

    def config(self, name: str, node_count: int) -> ClusterConfig:
        return ClusterConfig(self[name], node_count)

    def missing(self, names: Iterable[str]) -> List[str]:
        return sorted({n for n in names if n not in self._types})


CATALOG_COLUMNS = ("name", "family", "cores", "memory_bytes", "price_per_hour")
_TRUE = {"1", "true", "yes", "y", "x"}


def load_catalog(path: Union[str, Path]) -> Catalog:
    """Read a machine catalog CSV.

    Required columns are ``name,family,cores,memory_bytes,price_per_hour``;
    an optional ``medium`` column marks (at most) one row as the medium type.
    """
    path = Path(path)
    types = []
    medium = None
    with path.open(newline="") as fh:
        reader = csv.DictReader(_skip_comments(fh))
        missing = [c for c in CATALOG_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise CatalogError(f"{path}: missing columns {missing}")
        for row in reader:
            line = reader.line_num
            try:
                mt = MachineType(
                    name=row["name"].strip(),
                    family=Family.parse(row["family"]),
                    cores=int(row["cores"]),
                    memory_bytes=int(row["memory_bytes"]),
                    price_per_hour=float(row["price_per_hour"]),
                )
            except (TypeError, ValueError) as exc:
                raise CatalogError(f"{path}:{line}: {exc}") from None
            types.append(mt)
            if (row.get("medium") or "").strip().lower() in _TRUE:
                if medium is not None:
                    raise CatalogError(f"{path}:{line}: more than one medium entry")
                medium = mt.name
    return Catalog(types, medium=medium)


def write_catalog(catalog: Catalog, path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CATALOG_COLUMNS + ("medium",))
        for mt in catalog:
            writer.writerow([mt.name, mt.family.value, mt.cores, mt.memory_bytes,
                             repr(mt.price_per_hour), "yes" if mt.name == catalog.medium else ""])


def _skip_comments(lines):
    for line in lines:
        if not line.lstrip().startswith("#"):
            yield line


@dataclass(frozen=True)
class ExecutionRecord:
    """One historical execution of a job on a cluster configuration."""

    job_name: str
    framework: Framework
    dataset_label: str
    config: ClusterConfig
    runtime_seconds: float
    cost: Optional[float] = None
    dataset_bytes: Optional[int] = None

    def __post_init__(self):
        if not self.runtime_seconds > 0:
            raise ValueError(f"runtime_seconds must be > 0, got {self.runtime_seconds}")
        if self.cost is None:
            object.__setattr__(self, "cost", execution_cost(self.runtime_seconds, self.config))

    @property
    def group(self) -> Tuple[str, str]:
        return (self.job_name, self.dataset_label)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "job": self.job_name,
            "framework": self.framework.value,
            "dataset_label": self.dataset_label,
            "dataset_bytes": self.dataset_bytes,
            "machine_type": self.config.machine_type.name,
            "node_count": self.config.node_count,
            "runtime_seconds": self.runtime_seconds,
            "cost": self.cost,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any], catalog: Catalog) -> "ExecutionRecord":
        return cls(
            job_name=d["job"],
            framework=Framework.parse(d["framework"]),
            dataset_label=d["dataset_label"],
            dataset_bytes=d.get("dataset_bytes"),
            config=catalog.config(d["machine_type"], int(d["node_count"])),
            runtime_seconds=float(d["runtime_seconds"]),
            cost=None if d.get("cost") is None else float(d["cost"]),
        )


@dataclass(frozen=True)
class MemorySample:
    elapsed_ms: int
    used_bytes: int

    def __post_init__(self):
        if self.used_bytes < 0:
            raise ValueError("used_bytes must be >= 0")


@dataclass
class ProfilingRun:
    """One local execution of the job on a dataset sample.

    ``samples`` holds the raw system-wide readings; job memory is derived
    by subtracting ``baseline_bytes`` and clamping at zero.
    """

    sample_bytes: int
    baseline_bytes: int
    samples: List[MemorySample]
    duration_seconds: float
    exit_status: int
    timed_out: bool = False
    sample_path: Optional[str] = None

    @property
    def peak_job_bytes(self) -> int:
        if not self.samples:
            return 0
        return max(max(s.used_bytes - self.baseline_bytes, 0) for s in self.samples)

    @property
    def mean_job_bytes(self) -> float:
        if not self.samples:
            return 0.0
        return sum(max(s.used_bytes - self.baseline_bytes, 0) for s in self.samples) / len(self.samples)

    @property
    def succeeded(self) -> bool:
        return self.exit_status == 0 and not self.timed_out and bool(self.samples)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sample_bytes": self.sample_bytes,
            "sample_path": self.sample_path,
            "baseline_bytes": self.baseline_bytes,
            "duration_seconds": self.duration_seconds,
            "exit_status": self.exit_status,
            "timed_out": self.timed_out,
            "peak_job_bytes": self.peak_job_bytes,
            "mean_job_bytes": self.mean_job_bytes,
            "samples": [[s.elapsed_ms, s.used_bytes] for s in self.samples],
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ProfilingRun":
        return cls(
            sample_bytes=int(d["sample_bytes"]),
            baseline_bytes=int(d["baseline_bytes"]),
            samples=[MemorySample(int(t), int(u)) for t, u in d["samples"]],
            duration_seconds=float(d["duration_seconds"]),
            exit_status=int(d["exit_status"]),
            timed_out=bool(d.get("timed_out", False)),
            sample_path=d.get("sample_path"),
        )


@dataclass(frozen=True)
class MemoryModel:
    """Peak job memory as a linear function of input bytes."""

    slope: float
    intercept: float
    r2: float
    n_points: int = 0

    @property
    def is_linear(self) -> bool:
        return self.r2 > LINEARITY_THRESHOLD

    def predict(self, input_bytes: float) -> float:
        return self.slope * input_bytes + self.intercept

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "is_linear": self.is_linear,
            "n_points": self.n_points,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "MemoryModel":
        return cls(float(d["slope"]), float(d["intercept"]), float(d["r2"]), int(d.get("n_points", 0)))


@dataclass(frozen=True)
class Recommendation:
    config: ClusterConfig
    job_memory_bytes: int
    strategy: Strategy
    satisfied_memory_constraint: bool
    rationale: str
    # requirement evaluated for the chosen config (job memory + leeway + per-node overhead)
    required_bytes: int = 0

    def __post_init__(self):
        if self.strategy is Strategy.BFA_FALLBACK and self.job_memory_bytes != 0:
            raise ValueError("a fallback recommendation carries no job memory requirement")
        if self.strategy is Strategy.CRISPY and self.job_memory_bytes <= 0:
            raise ValueError("a crispy recommendation needs a positive job memory requirement")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "machine_type": self.config.machine_type.name,
            "node_count": self.config.node_count,
            "total_memory_bytes": total_cluster_memory(self.config),
            "job_memory_bytes": self.job_memory_bytes,
            "required_bytes": self.required_bytes,
            "strategy": self.strategy.value,
            "satisfied_memory_constraint": self.satisfied_memory_constraint,
            "rationale": self.rationale,
        }
