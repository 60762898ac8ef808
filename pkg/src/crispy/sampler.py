"""Sample planning and materialization for the profiling runs.

Five samples are profiled. Their sizes are the fractions 1/5 .. 5/5 of a
base sample, and the base sample is a fraction of the full dataset that is
tuned until the largest run lands inside a target runtime window.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

logger = logging.getLogger(__name__)

N_SAMPLES = 5
DEFAULT_BASE_FRACTION = 0.01
RUNTIME_WINDOW = (30.0, 180.0)
MAX_ADJUSTMENTS = 12

LINE_DELIMITED = "line_delimited"
RAW_BYTES = "raw_bytes"

_CHUNK = 1 << 20


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class SamplePlan:
    full_dataset_bytes: int
    base_fraction: float
    sizes: Tuple[int, ...]

    @property
    def base_bytes(self) -> int:
        return self.sizes[-1]

    def to_dict(self):
        return {
            "full_dataset_bytes": self.full_dataset_bytes,
            "base_fraction": self.base_fraction,
            "sizes": list(self.sizes),
        }

    @classmethod
    def from_dict(cls, d) -> "SamplePlan":
        return cls(int(d["full_dataset_bytes"]), float(d["base_fraction"]), tuple(int(s) for s in d["sizes"]))


def _check_fraction(fraction: float) -> None:
    if not 0 < fraction <= 1:
        raise SamplingError(f"base fraction must be in (0, 1], got {fraction}")


def plan_samples(full_dataset_bytes: int, base_fraction: float = DEFAULT_BASE_FRACTION,
                 min_record_bytes: int = 1) -> SamplePlan:
    """Plan five equally spaced sample sizes ending at ``base_fraction`` of the data.

    Raises SamplingError when the smallest sample would hold less than one
    record of ``min_record_bytes``.
    """
    if full_dataset_bytes <= 0:
        raise SamplingError(f"dataset size must be positive, got {full_dataset_bytes}")
    _check_fraction(base_fraction)
    base = base_fraction * full_dataset_bytes
    sizes = tuple(int(round(base * i / N_SAMPLES)) for i in range(1, N_SAMPLES + 1))
    if sizes[0] < max(min_record_bytes, 1):
        raise SamplingError(
            f"smallest sample would be {base / N_SAMPLES:.3g} bytes, below one record "
            f"({min_record_bytes} bytes); raise the base fraction or use a larger dataset")
    if any(a >= b for a, b in zip(sizes, sizes[1:])):
        raise SamplingError(f"base sample of {base:.3g} bytes is too small for {N_SAMPLES} distinct sizes")
    return SamplePlan(full_dataset_bytes, base_fraction, sizes)


def adjust_base_fraction(observed_runtime_seconds: float, current_fraction: float,
                         window: Tuple[float, float] = RUNTIME_WINDOW) -> Optional[float]:
    """Return a new base fraction, or None if the observed runtime is acceptable.

    Too slow halves the fraction; too fast doubles it, capped at the whole
    dataset.
    """
    _check_fraction(current_fraction)
    if not observed_runtime_seconds > 0:
        raise SamplingError(f"runtime must be positive, got {observed_runtime_seconds}")
    low, high = window
    if low <= observed_runtime_seconds <= high:
        return None
    if observed_runtime_seconds > high:
        return current_fraction / 2
    return min(current_fraction * 2, 1.0)


def tune_base_fraction(runtime_of: Callable[[float], float], initial_fraction: float = DEFAULT_BASE_FRACTION,
                       window: Tuple[float, float] = RUNTIME_WINDOW,
                       max_iterations: int = MAX_ADJUSTMENTS) -> float:
    """Repeatedly apply :func:`adjust_base_fraction` until a runtime is accepted.

    ``runtime_of`` maps a fraction to an observed runtime. A fraction of 1.0
    that still runs too fast is accepted as-is, since no larger sample exists.
    """
    fraction = initial_fraction
    for _ in range(max_iterations):
        new = adjust_base_fraction(runtime_of(fraction), fraction, window)
        if new is None or new == fraction:
            return fraction
        fraction = new
    raise SamplingError(f"base fraction did not converge within {max_iterations} runs")


def materialize_sample(dataset_path: Union[str, Path], target_bytes: int,
                       output_path: Union[str, Path], format: str = LINE_DELIMITED) -> int:
    """Write a prefix of the dataset of at most ``target_bytes`` bytes.

    In line-delimited mode the prefix is cut after the last complete record
    that fits. Returns the number of bytes written.
    """
    dataset_path, output_path = Path(dataset_path), Path(output_path)
    if format not in (LINE_DELIMITED, RAW_BYTES):
        raise SamplingError(f"unknown sample format {format!r}")
    size = dataset_path.stat().st_size
    if target_bytes > size:
        raise SamplingError(f"target {target_bytes} exceeds dataset size {size}")
    if target_bytes <= 0:
        raise SamplingError("target must be positive")

    copied = 0
    record_end = 0
    with dataset_path.open("rb") as src, output_path.open("wb") as dst:
        while copied < target_bytes:
            chunk = src.read(min(_CHUNK, target_bytes - copied))
            if not chunk:
                break
            nl = chunk.rfind(b"\n")
            if nl >= 0:
                record_end = copied + nl + 1
            dst.write(chunk)
            copied += len(chunk)
        if format == RAW_BYTES:
            actual = copied
        elif copied == size:
            # last record may lack a trailing newline
            actual = size
        else:
            actual = record_end
        if actual == 0:
            dst.close()
            output_path.unlink()
            raise SamplingError(
                f"target {target_bytes} is smaller than the first record of {dataset_path}")
        dst.truncate(actual)
    return actual


@dataclass
class MaterializedSample:
    target_bytes: int
    actual_bytes: int
    path: str

    def to_dict(self):
        return {"target_bytes": self.target_bytes, "actual_bytes": self.actual_bytes, "path": self.path}


def materialize_plan(dataset_path: Union[str, Path], plan: SamplePlan, workdir: Union[str, Path],
                     format: str = LINE_DELIMITED) -> List[MaterializedSample]:
    """Materialize every size of ``plan`` into ``workdir``."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    out = []
    for i, size in enumerate(plan.sizes, start=1):
        path = workdir / f"sample_{i}.dat"
        actual = materialize_sample(dataset_path, size, path, format)
        out.append(MaterializedSample(size, actual, os.fspath(path)))
    return out
