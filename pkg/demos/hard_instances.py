"""Instances on which the baseline is slow, and on which unbounded gradients hurt.

1. The two-node, two-region instance: whatever the step exponent tau, the
   baseline's worst gap after k iterations stays above an explicit envelope,
   which for tau = 1/3 decays only like k^(-2/3).
2. Two far-apart parabolas: without a gradient bound, both accelerated
   methods can be made to have an arbitrarily large gap at a chosen iteration.
"""
from dnlab.experiments import nedic_hard, unbounded_dnc, unbounded_dng

print("baseline on the two-region instance (k up to 2000)")
for tau in (0.0, 1 / 3, 0.5, 1.0):
    r = nedic_hard(tau, 2000)
    print(f"  tau={tau:.2f}  gap(2000)={r.max_gap[-1]:.4f}  envelope={r.envelope[-1]:.4f}  "
          f"slope={r.slope(100, 2000):+.3f}  stays above: {r.envelope_ok}")

print("\nconstant-step method, parabola scale chosen for (k, M)")
for k, M in ((10, 1.0), (20, 4.0), (40, 9.0)):
    gap, _, obj = unbounded_dnc(k, M)
    print(f"  k={k:<3} M={M:<4} theta={obj.params['theta']:<8g} gap at k = {gap:.2f}")

tr, obj, lb = unbounded_dng(100, 1.0)
print(f"\ndiminishing-step method: disagreement / lower bound over k in [5, 100] >= "
      f"{(tr.dis_x[5:] / lb[5:]).min():.3f}")
