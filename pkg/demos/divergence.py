"""What goes wrong outside the method's assumptions.

* A weight matrix with a strongly negative eigenvalue makes the
  diminishing-step method's disagreement explode.
* On the cubic pair the gradients are not Lipschitz, and both accelerated
  methods blow up from a symmetric start.
"""
import numpy as np

from dnlab.experiments import diverge_assumption_1b, diverge_cubic

tr, obj = diverge_assumption_1b(200)
for k in (20, 50, 100, 200):
    print(f"negative eigenvalue: k={k:<4} disagreement={tr.dis_x[k]:.3e}")

for method in ("dng", "dnc"):
    tr, obj = diverge_cubic(method, 1000)
    gaps = tr.node_gaps(obj).min(axis=1)
    status = f"stopped by the divergence guard at k={tr.k_max}" if tr.diverged else "ran to the end"
    print(f"cubic pair, {method}: {status}; min gap {gaps[0]:.3g} -> {gaps[-1]:.3g}")

# The constant-step run starts exactly symmetric, so the average stays at the
# optimum in exact arithmetic. Rounding breaks the symmetry and the unstable
# direction takes over after roughly 150 iterations.
print("\nfinite float64 tail of the constant-step run:",
      np.isfinite(tr.node_gaps(obj)).sum(), "iterates")
