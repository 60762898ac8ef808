"""
From profiling runs to a memory requirement
===========================================

Peak job memory is regressed on sample size. If the fit is good enough
(training R^2 above 0.99) the line is extrapolated to the full input, a
leeway is added, and each node reserves a fixed overhead.
"""

import numpy as np

from crispy import GiB
from crispy.memmodel import RequirementParams, estimate_requirement, fit_memory_model, points_from_runs
from crispy.synthetic import synthetic_runs

rng = np.random.default_rng(0)
full = 100 * GiB
sizes = [full // 100 * k for k in range(1, 6)]

# Traces whose peaks follow 0.6 x input + 1 GiB, with a little noise
linear = fit_memory_model(points_from_runs(
    synthetic_runs(0.6, 1 * GiB, sizes, rng, noise_bytes=5e6)))
print(f"linear job:    slope {linear.slope:.3f}  intercept {linear.intercept / GiB:.3f} GiB  "
      f"R^2 {linear.r2:.5f}  linear={linear.is_linear}")

# A job whose memory grows with the square of its input does not pass
curved = fit_memory_model(points_from_runs(
    synthetic_runs(0.0, 1 * GiB, sizes, rng, curvature=2e-9)))
print(f"quadratic job: R^2 {curved.r2:.5f}  linear={curved.is_linear}")

# The requirement depends on the node count through the per-node overhead.
params = RequirementParams()  # 2 GiB per node, 10% leeway
print("\nnodes  required")
for nodes in (4, 8, 16, 32):
    need = estimate_requirement(linear, full, nodes, params)
    print(f"{nodes:>5}  {need / GiB:7.1f} GiB")
