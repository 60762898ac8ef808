"""On-disk run manifest shared by the CLI stages.

Each stage (profile, model, recommend) writes its own top-level section
and leaves the other sections untouched.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .core import MemoryModel, ProfilingRun
from .profiler import read_trace

STAGES = ("profile", "model", "recommend")


class ManifestError(ValueError):
    pass


class RunManifest:
    def __init__(self, path: Union[str, Path], data: Optional[Dict[str, Any]] = None):
        self.path = Path(path)
        self.data: Dict[str, Any] = data or {}

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        path = Path(path)
        if not path.is_file():
            raise ManifestError(f"manifest {path} not found")
        return cls(path, json.loads(path.read_text()))

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, self.path)

    def set_stage(self, stage: str, section: Dict[str, Any]) -> None:
        if stage not in STAGES:
            raise ManifestError(f"unknown stage {stage!r}")
        self.data[stage] = section

    def stage(self, stage: str) -> Dict[str, Any]:
        try:
            return self.data[stage]
        except KeyError:
            raise ManifestError(f"manifest {self.path} has no {stage!r} section; run that stage first") from None

    @property
    def job_name(self) -> str:
        return self.stage("profile")["job_name"]

    @property
    def full_dataset_bytes(self) -> int:
        return int(self.stage("profile")["full_dataset_bytes"])

    def runs(self) -> List[ProfilingRun]:
        """Profiling runs, re-read from their trace files."""
        base = self.path.parent
        out = []
        for entry in self.stage("profile")["runs"]:
            trace = Path(entry["trace_path"])
            out.append(read_trace(trace if trace.is_absolute() else base / trace))
        return out

    def model(self) -> MemoryModel:
        return MemoryModel.from_dict(self.stage("model"))
