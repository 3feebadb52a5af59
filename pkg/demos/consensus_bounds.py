"""Measured disagreement against the closed-form consensus bounds.

Runs both accelerated methods on one logistic instance and prints the
ratio of the measured disagreement to its bound at a few iterations. The
bounds hold with a wide margin; the ratios show how much.
"""
import numpy as np

from dnlab import bounds, net, solvers
from dnlab.verify import instance

obj, W = instance(10, seed=3, eta=0.1)
mu = net.spectral(W).mu
C = bounds.c_cons(mu, 0.1)
print(f"mu = {mu:.4f}, C_cons = {C:.1f}")

K = 1000
dng = solvers.run_dng(obj, solvers.DngConfig(1.0, K, W), np.zeros(3))
a = 1 / (2 * obj.L)
dnc = solvers.run_dnc(obj, solvers.DncConfig(a, 200, W), np.zeros(3))

print(f"{'k':>6} {'dng ratio':>12} {'dnc ratio':>12}")
for k in (1, 10, 50, 100, 200):
    r1 = dng.dis_x[k] / bounds.dng_consensus_bound(k, obj.n, 1.0, obj.G, C)[0]
    r2 = dnc.dis_x[k] / bounds.dnc_consensus_bound(k, obj.n, a, obj.G)
    print(f"{k:>6} {r1:>12.2e} {r2:>12.2e}")
