"""
A full evaluation report
========================

Writes a catalog, an execution history and job-model files under
``demos/data``, then prints the strategy comparison. The same files work
with the command line::

    crispy evaluate --history demos/data/history.csv --catalog demos/data/catalog.csv \\
        --models-dir demos/data/models
"""

import json
from pathlib import Path

import numpy as np

from crispy.core import write_catalog
from crispy.evaluator import JobModel, evaluate, report, write_history
from crispy.memmodel import fit_memory_model, points_from_runs
from crispy.synthetic import bottleneck_suite, example_catalog, synthetic_runs

out = Path(__file__).resolve().parent / "data"
(out / "models").mkdir(parents=True, exist_ok=True)

catalog = example_catalog()
history, suite, sizes = bottleneck_suite(np.random.default_rng(0))
write_catalog(catalog, out / "catalog.csv")
write_history(history, out / "history.csv")

# one fitted model per caching job, as `crispy model --export-dir` would write
models = {}
for job in suite:
    full = sizes[job.name]
    runs = synthetic_runs(job.memory_slope, job.memory_intercept, [full // 100 * k for k in range(1, 6)])
    jm = JobModel(job.name, fit_memory_model(points_from_runs(runs)), {"huge": full})
    models[job.name] = jm
    (out / "models" / f"{job.name}.json").write_text(json.dumps(jm.to_dict(), indent=2, sort_keys=True) + "\n")

rows = evaluate(history, catalog.config(catalog.medium, 12), models)
# only the caching jobs carry models; the light jobs fall back to BFA
print(report([r for r in rows if r.job_name in models]))
print(f"files written to {out}")
