"""Local profiling runs with OS-level memory polling.

The job is an opaque command. Memory is read system-wide (total minus
available), so the pre-launch baseline is subtracted from each reading to
estimate what the job and its support processes use.
"""

from __future__ import annotations

import datetime
import json
import logging
import os
import shlex
import signal
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import psutil

from .core import MemorySample, ProfilingRun
from .sampler import (
    DEFAULT_BASE_FRACTION,
    LINE_DELIMITED,
    MAX_ADJUSTMENTS,
    RUNTIME_WINDOW,
    SamplePlan,
    adjust_base_fraction,
    materialize_sample,
    plan_samples,
)

logger = logging.getLogger(__name__)

SAMPLE_PLACEHOLDER = "{sample}"
RUNTIME_ARGS_PLACEHOLDER = "{runtime_args}"
MEMINFO = "/proc/meminfo"

MemoryReader = Callable[[], int]


class MemoryReadError(RuntimeError):
    pass


class ProfilingError(RuntimeError):
    pass


@dataclass
class JobSpec:
    """How to launch the job on one sample.

    ``command_template`` is split shell-style; the token ``{sample}`` is
    replaced by the sample path and a standalone ``{runtime_args}`` token
    expands to ``runtime_tuning_args`` (e.g. garbage-collector flags), which
    are passed through untouched.
    """

    command_template: str
    environment: Dict[str, str] = field(default_factory=dict)
    runtime_tuning_args: List[str] = field(default_factory=list)
    working_dir: Optional[str] = None
    timeout_seconds: float = 600.0

    def __post_init__(self):
        n = self.command_template.count(SAMPLE_PLACEHOLDER)
        if n != 1:
            raise ValueError(f"command template needs exactly one {SAMPLE_PLACEHOLDER} placeholder, found {n}")
        if not self.timeout_seconds > 0:
            raise ValueError("timeout_seconds must be positive")
        tokens = shlex.split(self.command_template)
        if self.runtime_tuning_args and RUNTIME_ARGS_PLACEHOLDER not in tokens:
            raise ValueError(
                f"runtime tuning args given but the template has no standalone {RUNTIME_ARGS_PLACEHOLDER} token")

    def argv(self, sample_path: Union[str, Path]) -> List[str]:
        out = []
        for tok in shlex.split(self.command_template):
            if tok == RUNTIME_ARGS_PLACEHOLDER:
                out.extend(self.runtime_tuning_args)
            else:
                out.append(tok.replace(SAMPLE_PLACEHOLDER, os.fspath(sample_path)))
        return out

    def to_dict(self):
        return {
            "command_template": self.command_template,
            "environment": dict(self.environment),
            "runtime_tuning_args": list(self.runtime_tuning_args),
            "working_dir": self.working_dir,
            "timeout_seconds": self.timeout_seconds,
        }


@dataclass(frozen=True)
class MonitorConfig:
    """Polling cadence and baseline capture settings.

    Before the baseline is taken, readings are watched until they drift by
    less than ``settle_rate_bytes_per_s`` across one baseline window (or
    ``settle_timeout_ms`` passes); memory still being released by a previous
    run would otherwise inflate the baseline. ``settle_timeout_ms=0``
    disables the wait.
    """

    poll_interval_ms: int = 500
    baseline_window_ms: int = 5000
    settle_timeout_ms: int = 60000
    settle_rate_bytes_per_s: int = 1024**2

    def __post_init__(self):
        if self.poll_interval_ms < 50:
            raise ValueError("poll_interval_ms must be >= 50")
        if self.baseline_window_ms < self.poll_interval_ms:
            raise ValueError("baseline_window_ms must be >= poll_interval_ms")
        if self.settle_timeout_ms < 0 or self.settle_rate_bytes_per_s < 0:
            raise ValueError("settle settings must be non-negative")


def parse_meminfo(text: str) -> Tuple[int, int]:
    """Return (total, available) bytes from /proc/meminfo contents."""
    values = {}
    for line in text.splitlines():
        key, _, rest = line.partition(":")
        parts = rest.split()
        if key in ("MemTotal", "MemAvailable") and parts:
            scale = 1024 if len(parts) > 1 and parts[1].lower() == "kb" else 1
            values[key] = int(parts[0]) * scale
    if "MemTotal" not in values or "MemAvailable" not in values:
        raise MemoryReadError("meminfo lacks MemTotal or MemAvailable")
    return values["MemTotal"], values["MemAvailable"]


def used_from_counters(total: int, available: int) -> int:
    if total <= 0 or available < 0:
        raise MemoryReadError(f"implausible memory counters: total={total} available={available}")
    if available > total:
        raise MemoryReadError(f"available memory ({available}) exceeds total ({total})")
    return total - available


def read_system_memory(meminfo_path: str = MEMINFO) -> int:
    """System memory in use right now: total minus available, in bytes."""
    try:
        with open(meminfo_path) as fh:
            total, available = parse_meminfo(fh.read())
    except FileNotFoundError:
        vm = psutil.virtual_memory()
        total, available = vm.total, vm.available
    except OSError as exc:
        raise MemoryReadError(f"cannot read {meminfo_path}: {exc}") from exc
    return used_from_counters(total, available)


def capture_baseline(monitor: MonitorConfig = MonitorConfig(), reader: MemoryReader = read_system_memory,
                     sleep: Callable[[float], None] = time.sleep) -> int:
    """Mean of the readings taken over the baseline window."""
    n = max(monitor.baseline_window_ms // monitor.poll_interval_ms, 1)
    readings = []
    for i in range(n):
        if i:
            sleep(monitor.poll_interval_ms / 1000)
        readings.append(reader())
    return int(round(sum(readings) / len(readings)))


def settle_baseline(monitor: MonitorConfig = MonitorConfig(), reader: MemoryReader = read_system_memory,
                    sleep: Callable[[float], None] = time.sleep) -> int:
    """Wait for memory use to stop drifting, then return the window mean.

    Readings are grouped into consecutive baseline windows. Memory is
    settled once two consecutive windows together span less than the allowed
    drift, since release can pause briefly between steps. The mean of the
    second window is returned. On timeout the latest window is used and a
    warning logged.
    """
    n = max(monitor.baseline_window_ms // monitor.poll_interval_ms, 1)
    window_s = monitor.baseline_window_ms / 1000
    allowed = monitor.settle_rate_bytes_per_s * window_s
    max_windows = max(1, -(-monitor.settle_timeout_ms // monitor.baseline_window_ms))
    readings: List[int] = []
    previous: List[int] = []
    for w in range(max_windows):
        previous, readings = readings, []
        for i in range(n):
            if i or w:
                sleep(monitor.poll_interval_ms / 1000)
            readings.append(reader())
        both = previous + readings
        if previous and max(both) - min(both) <= 2 * allowed:
            break
    else:
        logger.warning("system memory still drifting after %.0fs; baseline may be off",
                       monitor.settle_timeout_ms / 1000)
    return int(round(sum(readings) / len(readings)))


class _Poller(threading.Thread):
    """Appends one MemorySample per poll interval until stopped."""

    def __init__(self, reader: MemoryReader, interval_ms: int, t0: float):
        super().__init__(daemon=True)
        self.reader = reader
        self.interval = interval_ms / 1000
        self.t0 = t0
        self.samples: List[MemorySample] = []
        self.error: Optional[BaseException] = None
        self._stop_evt = threading.Event()

    def run(self):
        last = -1
        while True:
            try:
                used = self.reader()
            except BaseException as exc:
                self.error = exc
                return
            elapsed = int((time.monotonic() - self.t0) * 1000)
            elapsed = max(elapsed, last + 1)
            self.samples.append(MemorySample(elapsed, used))
            last = elapsed
            if self._stop_evt.wait(self.interval):
                return

    def stop(self):
        self._stop_evt.set()
        self.join()


def _kill_group(pgid: int, sig=signal.SIGKILL) -> None:
    try:
        os.killpg(pgid, sig)
    except (ProcessLookupError, PermissionError):
        pass


def run_profiled(job: JobSpec, sample_path: Union[str, Path], sample_bytes: int,
                 monitor: MonitorConfig = MonitorConfig(), reader: MemoryReader = read_system_memory,
                 baseline_bytes: Optional[int] = None, trace_path: Union[str, Path, None] = None,
                 timeout_seconds: Optional[float] = None) -> ProfilingRun:
    """Run the job on one sample while polling memory.

    A timeout or nonzero exit status does not raise: the returned run is
    marked failed and keeps its samples. Spawn failures and unreadable
    memory counters raise ProfilingError.
    """
    if not Path(sample_path).exists():
        raise ProfilingError(f"sample {sample_path} does not exist")
    if baseline_bytes is None:
        if monitor.settle_timeout_ms:
            baseline_bytes = settle_baseline(monitor, reader)
        else:
            baseline_bytes = capture_baseline(monitor, reader)
    timeout = job.timeout_seconds if timeout_seconds is None else timeout_seconds
    env = dict(os.environ)
    env.update(job.environment)
    argv = job.argv(sample_path)
    log_path = Path(trace_path).with_suffix(".log") if trace_path else None
    started_at = datetime.datetime.now(datetime.timezone.utc).isoformat()

    out = open(log_path, "wb") if log_path else subprocess.DEVNULL
    t0 = time.monotonic()
    try:
        try:
            proc = subprocess.Popen(argv, cwd=job.working_dir, env=env, stdout=out,
                                    stderr=subprocess.STDOUT, start_new_session=True)
        except OSError as exc:
            raise ProfilingError(f"cannot start {argv[0]!r}: {exc}") from exc
        poller = _Poller(reader, monitor.poll_interval_ms, t0)
        poller.start()
        timed_out = False
        try:
            proc.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            timed_out = True
            logger.warning("run on %s exceeded %.1fs, terminating", sample_path, timeout)
            _kill_group(proc.pid, signal.SIGTERM)
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                _kill_group(proc.pid)
                proc.wait()
        finally:
            duration = time.monotonic() - t0
            poller.stop()
            # reap anything the job left behind in its session
            _kill_group(proc.pid)
            if proc.poll() is None:
                proc.kill()
                proc.wait()
    finally:
        if log_path:
            out.close()

    if poller.error is not None:
        raise ProfilingError(f"memory polling failed: {poller.error}") from poller.error

    run = ProfilingRun(
        sample_bytes=int(sample_bytes),
        baseline_bytes=baseline_bytes,
        samples=poller.samples,
        duration_seconds=max(duration, 1e-9),
        exit_status=proc.returncode,
        timed_out=timed_out,
        sample_path=os.fspath(sample_path),
    )
    if trace_path:
        write_trace(run, trace_path, {"argv": argv, "started_at": started_at,
                                      "poll_interval_ms": monitor.poll_interval_ms})
    return run


def write_trace(run: ProfilingRun, path: Union[str, Path], meta: Optional[dict] = None) -> None:
    """Write a run as JSON lines: one metadata record, then one record per sample."""
    header = {"type": "run"}
    header.update({k: v for k, v in run.to_dict().items() if k != "samples"})
    header.update(meta or {})
    with Path(path).open("w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for s in run.samples:
            fh.write(json.dumps({"elapsed_ms": s.elapsed_ms, "used_bytes": s.used_bytes}) + "\n")


def read_trace(path: Union[str, Path]) -> ProfilingRun:
    with Path(path).open() as fh:
        header = json.loads(fh.readline())
        samples = [json.loads(line) for line in fh if line.strip()]
    header["samples"] = [[s["elapsed_ms"], s["used_bytes"]] for s in samples]
    return ProfilingRun.from_dict(header)


@dataclass
class ProfileResult:
    runs: List[ProfilingRun]
    plan: SamplePlan
    trace_paths: List[str]
    # (fraction, observed runtime seconds) for every tuning attempt
    attempts: List[Tuple[float, float]]
    wall_seconds: float


def profile_job(job: JobSpec, dataset_path: Union[str, Path], base_fraction: float = DEFAULT_BASE_FRACTION,
                monitor: MonitorConfig = MonitorConfig(), full_dataset_bytes: Optional[int] = None,
                workdir: Union[str, Path, None] = None, window: Tuple[float, float] = RUNTIME_WINDOW,
                max_adjustments: int = MAX_ADJUSTMENTS, format: str = LINE_DELIMITED,
                reader: MemoryReader = read_system_memory) -> ProfileResult:
    """Profile the job on five samples of the dataset.

    The largest sample is run first and the base fraction adjusted until
    its runtime lands in ``window``; a run still going at the upper bound is
    cancelled and counted as too slow. The other four sizes then reuse the
    accepted fraction. Each run is retried once before giving up.
    """
    dataset_path = Path(dataset_path)
    if not dataset_path.is_file():
        raise ProfilingError(f"dataset {dataset_path} is not readable")
    local_bytes = dataset_path.stat().st_size
    full = local_bytes if full_dataset_bytes is None else int(full_dataset_bytes)
    workdir = Path(workdir) if workdir is not None else dataset_path.parent / "crispy-profile"
    workdir.mkdir(parents=True, exist_ok=True)
    t_start = time.monotonic()

    def run_sample(index: int, target: int, timeout: Optional[float] = None):
        sample = workdir / f"sample_{index}.dat"
        actual = materialize_sample(dataset_path, min(target, local_bytes), sample, format)
        trace = workdir / f"trace_{index}.jsonl"
        run = run_profiled(job, sample, actual, monitor, reader, trace_path=trace, timeout_seconds=timeout)
        return run, os.fspath(trace)

    def run_with_retry(index: int, target: int):
        for attempt in (1, 2):
            run, trace = run_sample(index, target)
            if run.succeeded:
                return run, trace
            logger.warning("sample %d failed (exit %s, timed out %s), attempt %d",
                           index, run.exit_status, run.timed_out, attempt)
        raise ProfilingError(f"sample {index} ({target} bytes) failed twice; see {trace}")

    low, high = window
    fraction = base_fraction
    attempts: List[Tuple[float, float]] = []
    failures = 0
    accepted = None
    for _ in range(max_adjustments):
        plan = plan_samples(full, fraction)
        if plan.base_bytes > local_bytes:
            raise ProfilingError(
                f"largest sample ({plan.base_bytes} bytes) exceeds the local dataset ({local_bytes} bytes)")
        cancel_at = min(job.timeout_seconds, high)
        run, trace = run_sample(5, plan.base_bytes, timeout=cancel_at)
        cancelled_slow = run.timed_out and cancel_at == high
        if not run.succeeded and not cancelled_slow:
            failures += 1
            if failures >= 2:
                raise ProfilingError(f"largest sample failed twice in a row; see {trace}")
            continue
        failures = 0
        runtime = run.duration_seconds
        attempts.append((fraction, runtime))
        new = adjust_base_fraction(runtime, fraction, window)
        if new is None or new == fraction:
            if new is not None:
                logger.warning("whole dataset runs in %.1fs, below the %.0fs target; accepting", runtime, low)
            accepted = (plan, run, trace)
            break
        logger.info("runtime %.1fs outside [%g, %g]s; base fraction %g -> %g", runtime, low, high, fraction, new)
        fraction = new
    if accepted is None:
        raise ProfilingError(f"base fraction did not converge within {max_adjustments} runs")

    plan, largest, largest_trace = accepted
    runs, traces = [], []
    for i, size in enumerate(plan.sizes[:-1], start=1):
        run, trace = run_with_retry(i, size)
        runs.append(run)
        traces.append(trace)
    runs.append(largest)
    traces.append(largest_trace)
    return ProfileResult(runs, plan, traces, attempts, time.monotonic() - t_start)
