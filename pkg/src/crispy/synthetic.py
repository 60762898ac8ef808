"""Synthetic jobs, traces and execution histories for tests and demos.

Run as a program, this module is a stand-in data-processing job: it reads
the size of its input file, holds ``slope * size + intercept`` bytes of
memory and keeps running for ``seconds_per_byte * size + min_seconds``::

    python -m crispy.synthetic --mem-slope 2 --mem-intercept 0 \\
        --seconds-per-byte 1e-6 --min-seconds 0.5 {sample}
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import (
    Catalog,
    ClusterConfig,
    ExecutionRecord,
    Family,
    Framework,
    GiB,
    MachineType,
    MemorySample,
    ProfilingRun,
    total_cluster_memory,
)

# name, family, cores, memory GiB, price/hour
EXAMPLE_MACHINES = [
    ("c4.large", "c", 2, 3.75, 0.100),
    ("c4.xlarge", "c", 4, 7.5, 0.199),
    ("c4.2xlarge", "c", 8, 15, 0.398),
    ("m4.large", "m", 2, 8, 0.100),
    ("m4.xlarge", "m", 4, 16, 0.200),
    ("m4.2xlarge", "m", 8, 32, 0.400),
    ("r4.large", "r", 2, 15.25, 0.133),
    ("r4.xlarge", "r", 4, 30.5, 0.266),
    ("r4.2xlarge", "r", 8, 61, 0.532),
]
EXAMPLE_SCALE_OUTS = (4, 6, 8, 12, 16, 24, 32, 48)


def example_catalog() -> Catalog:
    return Catalog(
        [MachineType(n, Family(f), c, int(m * GiB), p) for n, f, c, m, p in EXAMPLE_MACHINES],
        medium="m4.xlarge",
    )


def example_configs(catalog: Optional[Catalog] = None,
                    scale_outs: Sequence[int] = EXAMPLE_SCALE_OUTS) -> List[ClusterConfig]:
    catalog = catalog or example_catalog()
    return [ClusterConfig(mt, n) for mt in catalog for n in scale_outs]


@dataclass(frozen=True)
class SyntheticJob:
    """A job whose cost on a cluster follows a simple analytic model.

    Runtime falls sublinearly with total cores. A caching job whose working
    set does not fit into usable cluster memory is slowed down by
    ``bottleneck_penalty``.
    """

    name: str
    framework: Framework
    work_core_seconds: float
    memory_slope: float = 0.0
    memory_intercept: float = 0.0
    caching: bool = False
    bottleneck_penalty: float = 5.0
    scaling_exponent: float = 0.85
    per_node_overhead_bytes: int = 2 * GiB

    def working_set(self, input_bytes: float) -> float:
        return self.memory_slope * input_bytes + self.memory_intercept

    def runtime(self, config: ClusterConfig, input_bytes: float) -> float:
        cores = config.node_count * config.machine_type.cores
        t = 30.0 + self.work_core_seconds / cores ** self.scaling_exponent
        usable = total_cluster_memory(config) - config.node_count * self.per_node_overhead_bytes
        if self.caching and usable < self.working_set(input_bytes):
            t *= self.bottleneck_penalty
        return t


def simulate_history(jobs: Sequence[SyntheticJob], configs: Sequence[ClusterConfig],
                     dataset_sizes: Dict[str, int], rng: Optional[np.random.Generator] = None,
                     noise: float = 0.05, coverage: float = 1.0) -> List[ExecutionRecord]:
    """Execution records for every job, dataset label and (sampled) config.

    ``noise`` is the sigma of multiplicative log-normal runtime noise and
    ``coverage`` the probability that a given config was executed at all.
    """
    rng = rng or np.random.default_rng(0)
    out = []
    for job in jobs:
        for label, size in dataset_sizes.items():
            chosen = [c for c in configs if rng.random() < coverage] or [configs[int(rng.integers(len(configs)))]]
            for c in chosen:
                t = job.runtime(c, size) * float(np.exp(rng.normal(0.0, noise))) if noise else job.runtime(c, size)
                out.append(ExecutionRecord(job.name, job.framework, label, c, t, dataset_bytes=size))
    return out


def random_history(rng: np.random.Generator, n_jobs: int = 6, n_configs: int = 8,
                   labels: Sequence[str] = ("huge", "bigdata"), catalog: Optional[Catalog] = None,
                   coverage: float = 0.8) -> List[ExecutionRecord]:
    """An unstructured history: log-uniform runtimes on random configs."""
    all_configs = example_configs(catalog)
    idx = rng.choice(len(all_configs), size=n_configs, replace=False)
    configs = [all_configs[i] for i in sorted(idx)]
    frameworks = [Framework.SPARK, Framework.HADOOP]
    out = []
    for j in range(n_jobs):
        fw = frameworks[int(rng.integers(2))]
        for label in labels:
            chosen = [c for c in configs if rng.random() < coverage] or [configs[0]]
            for c in chosen:
                runtime = float(np.exp(rng.uniform(np.log(60), np.log(6000))))
                out.append(ExecutionRecord(f"job{j}", fw, label, c, runtime))
    return out


def bottleneck_suite(rng: Optional[np.random.Generator] = None, n_suite: int = 10, n_light: int = 50,
                     label: str = "huge", noise: float = 0.03):
    """A history in which cheap configs suit most jobs but starve caching ones.

    Returns ``(history, suite, sizes)``: ``suite`` lists the caching
    SyntheticJobs and ``sizes`` maps each job name to its input size in bytes.
    The light jobs hold little memory and prefer small, cheap clusters, so
    a best-for-all ranking puts configs with too little memory first for
    the suite jobs.
    """
    rng = rng or np.random.default_rng(0)
    configs = example_configs()
    light = [SyntheticJob(f"light{i}", Framework.SPARK, float(rng.uniform(2e3, 2e4)))
             for i in range(n_light)]
    suite = [SyntheticJob(f"cache{i}", Framework.SPARK, float(rng.uniform(2e3, 2e4)),
                          memory_slope=float(rng.uniform(1.0, 3.0)), memory_intercept=float(rng.uniform(1, 8)) * GiB,
                          caching=True)
             for i in range(n_suite)]
    sizes = {j.name: int(rng.uniform(10, 40) * GiB) for j in light}
    sizes.update({j.name: int(rng.uniform(60, 150) * GiB) for j in suite})
    history = []
    for job in light + suite:
        history += simulate_history([job], configs, {label: sizes[job.name]}, rng, noise=noise)
    return history, suite, sizes


def synthetic_runs(slope: float, intercept: float, sizes: Sequence[int], rng: Optional[np.random.Generator] = None,
                   noise_bytes: float = 0.0, baseline_bytes: int = 4 * GiB, n_samples: int = 20,
                   curvature: float = 0.0) -> List[ProfilingRun]:
    """Profiling runs whose peak job memory follows a planted curve.

    Peak memory is ``slope*x + intercept + curvature*x**2`` plus Gaussian
    noise; the rest of each trace ramps up to the peak and back down.
    """
    rng = rng or np.random.default_rng(0)
    runs = []
    for x in sizes:
        peak = slope * x + intercept + curvature * float(x) ** 2
        if noise_bytes:
            peak += rng.normal(0.0, noise_bytes)
        peak = max(int(round(peak)), 0)
        ramp = np.concatenate([np.linspace(0.0, 1.0, n_samples // 2), np.linspace(1.0, 0.2, n_samples - n_samples // 2)])
        samples = [MemorySample(500 * i, baseline_bytes + int(round(peak * f))) for i, f in enumerate(ramp)]
        runs.append(ProfilingRun(int(x), baseline_bytes, samples, 500 * n_samples / 1000, 0))
    return runs


def _hold(args) -> int:
    size = os.path.getsize(args.sample)
    target = int(max(args.mem_slope * size + args.mem_intercept + args.mem_quadratic * size * size, 0))
    duration = args.seconds_per_byte * size + args.min_seconds
    t0 = time.monotonic()
    if args.spawn_child:
        child = subprocess.Popen([sys.executable, "-c", "import time; time.sleep(3600)"])
        with open(args.spawn_child, "w") as fh:
            fh.write(str(child.pid))
    # filled, not zeroed, so every page is committed
    block = b"\x01" * target if target else b""
    remaining = duration - (time.monotonic() - t0)
    if remaining > 0:
        time.sleep(remaining)
    del block
    return args.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    p = argparse.ArgumentParser(prog="python -m crispy.synthetic", description="Synthetic profiling target.")
    p.add_argument("sample")
    p.add_argument("--mem-slope", type=float, default=0.0, help="bytes held per input byte")
    p.add_argument("--mem-intercept", type=float, default=0.0, help="bytes held regardless of input")
    p.add_argument("--mem-quadratic", type=float, default=0.0, help="bytes held per squared input byte")
    p.add_argument("--seconds-per-byte", type=float, default=0.0)
    p.add_argument("--min-seconds", type=float, default=0.0)
    p.add_argument("--spawn-child", metavar="PIDFILE", help="start a long-lived child and record its pid")
    p.add_argument("--exit-code", type=int, default=0)
    return _hold(p.parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
