"""Compare the accelerated methods and the baseline on distributed logistic regression.

Thirty nodes on a random geometric network each hold one labelled sample.
We count how many broadcasts (summed over all nodes) each method needs to
bring the average relative optimality gap below each target.

    python demos/logistic_comparison.py [seed]
"""
import sys

from dnlab.experiments import fig1_left

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cmp = fig1_left(seed, n=30, k_max=10_000)
print(f"logistic, n={cmp.obj.n}, L={cmp.obj.L:.4f}, mu(W)={cmp.mu['W']:.4f}")

targets = (1e-1, 1e-2, 1e-3, 1e-4)
hits = cmp.first_hits(targets)
print(f"{'method':<10}" + "".join(f"{t:>12.0e}" for t in targets))
for name, row in hits.items():
    cells = [f"{h[2]:>12d}" if h else f"{'-':>12}" for h in row.values()]
    print(f"{name:<10}" + "".join(cells))

# The diminishing-step method spends one broadcast per iteration; the
# constant-step method spends a growing number of consensus sweeps per outer
# iteration, so it pays more per step but takes larger ones.
