"""
Best-for-all ranking and the memory filter
==========================================

The ranking orders configurations by their mean normalized cost over the
other jobs of the same framework. Crispy walks it top-down and takes the
first configuration with enough aggregate memory for the job at hand.
"""

import numpy as np

from crispy import GiB, Framework, total_cluster_memory
from crispy.evaluator import baseline_bfa, evaluate_crispy
from crispy.memmodel import fit_memory_model, points_from_runs
from crispy.selector import bfa_rank, recommendation_report, select
from crispy.synthetic import bottleneck_suite, synthetic_runs

# Fifty light jobs favour small clusters; ten caching jobs need far more memory.
history, suite, sizes = bottleneck_suite(np.random.default_rng(0))
job = suite[1]
full = sizes[job.name]
print(f"{job.name}: {full / GiB:.0f} GiB input, working set {job.working_set(full) / GiB:.0f} GiB")

ranking = bfa_rank(history, Framework.SPARK, exclude_job=job.name)
print("\ntop of the ranking")
for rc in ranking[:5]:
    print(f"  {str(rc.config):>16}  mean {rc.mean_normalized_cost:.3f}  "
          f"{total_cluster_memory(rc.config) / GiB:6.1f} GiB")

sizes_5 = [full // 100 * k for k in range(1, 6)]
model = fit_memory_model(points_from_runs(synthetic_runs(job.memory_slope, job.memory_intercept, sizes_5)))
print()
print(recommendation_report(select(ranking, model, full)))

print(f"\nnormalized cost: BFA {baseline_bfa(history, job.name, 'huge'):.3f}, "
      f"Crispy {evaluate_crispy(history, job.name, 'huge', model, full):.3f}")

# Without a model (or with a non-linear one) Crispy is exactly BFA.
print(f"no model:        Crispy {evaluate_crispy(history, job.name, 'huge', None, None):.3f}")
