"""
Sampling a dataset and profiling a job on it
============================================

A job is profiled on five prefixes of its input, at 1/5 .. 5/5 of a base
fraction of the full dataset. Here the "job" is the bundled synthetic
program, which holds ``8 x input + 128 MiB`` of memory for about a second.
"""

import sys
import tempfile
from pathlib import Path

from crispy import GiB, MiB
from crispy.memmodel import fit_memory_model, model_report, points_from_runs
from crispy.profiler import JobSpec, MonitorConfig, profile_job
from crispy.sampler import plan_samples

# For a 250 GiB input and the default 1% base fraction the five samples are:
plan = plan_samples(250 * GiB)
for i, size in enumerate(plan.sizes, 1):
    print(f"sample {i}: {size / GiB:6.2f} GiB")

# A local run needs a real file; this one is 40 MB of 10-byte records.
work = Path(tempfile.mkdtemp(prefix="crispy-demo-"))
data = work / "input.txt"
data.write_text("".join(f"{i:09d}\n" for i in range(4_000_000)))

# {sample} is replaced with the path of each materialized sample.
job = JobSpec(f"{sys.executable} -m crispy.synthetic --mem-slope 8 --mem-intercept {128 * MiB} "
              "--min-seconds 1 {sample}")

# The real runtime window is 30..180 s. A short window keeps the demo
# quick; settling waits for memory freed by the previous run to drain.
result = profile_job(job, data, base_fraction=1.0, monitor=MonitorConfig(100, 2000),
                     workdir=work / "runs", window=(0.5, 20.0))

print("\nbytes in    peak job memory")
for run in result.runs:
    print(f"{run.sample_bytes:>9d}   {run.peak_job_bytes / MiB:8.1f} MiB"
          f"   (planted {(8 * run.sample_bytes + 128 * MiB) / MiB:.1f})")

model = fit_memory_model(points_from_runs(result.runs))
print()
print(model_report(model))
print(f"traces written under {work / 'runs'}")
