"""
Self-verification suite: every structural invariant and every theoretical
guarantee checked numerically, at sizes small enough to finish in well
under a minute.

Each check returns a :class:`CheckResult`; :func:`run_suite` collects them.
Bound-related checks compare against constants recomputed here by an
independent route (plain grids, explicit loops) so that an error in the
library formulas shows up as a disagreement instead of silently loosening
the bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bounds, experiments, net, objectives, oracle, solvers


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


DENSITY = {5: 0.5, 10: 0.4, 20: 0.2}


def instance(n, seed, eta=0.1):
    """Solvable logistic set with a safeguarded Metropolis matrix on a geometric graph."""
    data_seed = objectives.solvable_logistic_seeds(n, 1, start=seed)[0]
    obj = objectives.make_logistic(n, data_seed)
    W = net.metropolis_weights(net.generate_geometric(n, DENSITY[n], seed))
    return obj, net.safeguard_weights(W, eta)


def instances(count, eta=0.1):
    sizes = (5, 10, 20)
    return [instance(sizes[j % 3], 1000 * j + 17, eta) for j in range(count)]


# -- independent constant evaluation -----------------------------------------

def b_sup_grid(r, z_max=400.0, step=2e-4):
    """Supremum of ``z r^z log(1+z)`` on a plain uniform grid (no refinement)."""
    if r == 0:
        return 0.0
    z = np.arange(0.5, z_max, step)
    return float(np.max(z * r ** z * np.log1p(z)))


def c_cons_independent(mu, eta):
    r = math.sqrt(mu)
    return 8.0 / math.sqrt(eta) / math.sqrt(1.0 - mu) * (2.0 * b_sup_grid(r) + 7.0 / (1.0 - mu))


# -- checks -------------------------------------------------------------------

def check_gradients(tol=1e-5):
    fams = [objectives.make_logistic(20, 3), objectives.make_huber_two_group(10.0, 1),
            objectives.make_huber_pair(), objectives.make_hard_quadratic_pair(3.0),
            objectives.make_cubic_pair(), objectives.make_fair_loss(4, 1.5, [0, 1, -2, 3])]
    fams += [objectives.make_hard_nonsmooth_pair(t) for t in (0.0, 0.5, 1.0)]
    worst = {o.family + (f"({o.params['theta']})" if "theta" in o.params else ""):
             objectives.gradient_check(o, points=100, box=min(o.box, 5.0) if o.family == "cubic_pair" else None)
             for o in fams}
    bad = {k: v for k, v in worst.items() if v > tol}
    return CheckResult("gradient finite differences", not bad,
                       f"worst rel err {max(worst.values()):.2e}" + (f"; failing {sorted(bad)}" if bad else ""))


def check_certificates():
    fams = [objectives.make_logistic(20, 3), objectives.make_huber_two_group(10.0, 1),
            objectives.make_huber_pair(), objectives.make_hard_nonsmooth_pair(0.5),
            objectives.make_hard_quadratic_pair(3.0), objectives.make_fair_loss(4, 1.5, [0, 1, -2, 3])]
    fails = []
    for o in fams:
        box = 10.0 if o.family == "logistic" else None
        cert = objectives.certify(o, 1000, box=box, seed=1)
        if o.L is not None and cert["lip"] > o.L * (1 + 1e-9):
            fails.append(f"{o.family} L")
        if o.G is not None and cert["grad"] > o.G * (1 + 1e-9):
            fails.append(f"{o.family} G")
    return CheckResult("sampled L and G certificates", not fails, "ok" if not fails else ", ".join(fails))


def check_weights(count=30, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    ok = True
    for j in range(count):
        n = (5, 10, 20)[j % 3]
        g = net.generate_geometric(n, DENSITY[n], int(rng.integers(1 << 30)))
        W = net.metropolis_weights(g)
        eta = float(rng.uniform(0.01, 0.9))
        Ws = net.safeguard_weights(W, eta)
        sp, sps = net.spectral(W), net.spectral(Ws)
        mapped = np.sort((1 + eta) / 2 + (1 - eta) / 2 * sp.eigenvalues)
        worst = max(worst, float(np.max(np.abs(np.sort(sps.eigenvalues) - mapped))))
        ok &= sp.assumption_1a and sps.assumption_1b(eta)
    ok &= worst <= 1e-10
    return CheckResult("Metropolis and safeguard spectra", bool(ok), f"eigenvalue map error {worst:.1e}")


def check_dng_consensus(count=6, k_max=500, eta=0.1):
    worst = 0.0
    const_err = 0.0
    for obj, W in instances(count, eta):
        mu = net.spectral(W).mu
        C = bounds.c_cons(mu, eta)
        const_err = max(const_err, abs(C / c_cons_independent(mu, eta) - 1))
        tr = solvers.run_dng(obj, solvers.DngConfig(1.0, k_max, W), np.zeros(obj.d))
        ks = np.arange(1, k_max + 1)
        bx, by = bounds.dng_consensus_bound(ks, obj.n, 1.0, obj.G, C)
        worst = max(worst, float(np.max(tr.dis_x[1:] / bx)), float(np.max(tr.dis_y[1:] / by)))
    ok = worst <= 1 and const_err <= 1e-4
    return CheckResult("diminishing-step consensus bound", ok,
                       f"max measured/bound {worst:.2e}, constant cross-check rel err {const_err:.1e}")


def check_dnc_consensus(count=6, k_max=100):
    worst = 0.0
    for obj, W in instances(count):
        a = 1 / (2 * obj.L)
        tr = solvers.run_dnc(obj, solvers.DncConfig(a, k_max, W), np.zeros(obj.d))
        b = bounds.dnc_consensus_bound(np.arange(1, k_max + 1), obj.n, a, obj.G)
        worst = max(worst, float(np.max(tr.dis_x[1:] / b)), float(np.max(tr.dis_y[1:] / b)))
    return CheckResult("constant-step consensus bound", worst <= 1, f"max measured/bound {worst:.2e}")


def check_gap_bounds(count=6, k_dng=500, k_dnc=100, eta=0.1):
    worst = 0.0
    for obj, W in instances(count, eta):
        mu = net.spectral(W).mu
        R = float(np.linalg.norm(obj.x_star))
        c = min(1.0, 1 / (2 * obj.L))
        tr = solvers.run_dng(obj, solvers.DngConfig(c, k_dng, W), np.zeros(obj.d))
        b = bounds.dng_gap_bound(np.arange(1, k_dng + 1), c, obj.L, obj.G, R, bounds.c_cons(mu, eta))
        worst = max(worst, float(np.max(tr.max_gap(obj)[1:] / obj.n / b)))
        a = 1 / (2 * obj.L)
        tr = solvers.run_dnc(obj, solvers.DncConfig(a, k_dnc, W), np.zeros(obj.d))
        b = bounds.dnc_gap_bound(np.arange(1, k_dnc + 1), a, obj.L, obj.G, R)
        worst = max(worst, float(np.max(tr.max_gap(obj)[1:] / obj.n / b)))
    comm_ok = all(bounds.dnc_comm_count(k, mu) <= bounds.dnc_comm_bound(k, mu)
                  for mu in (0.3, 0.75, 0.9) for k in (1, 2, 5, 50, 200))
    return CheckResult("optimality-gap bounds and sweep count", worst <= 1 and comm_ok,
                       f"max measured/bound {worst:.2e}, sweep bound {'holds' if comm_ok else 'violated'}")


def check_oracle(k_max=100, probes=500):
    obj, W = instance(10, 3)
    worst = -np.inf
    for tr in (solvers.run_dng(obj, solvers.DngConfig(1 / (2 * obj.L), k_max, W), np.zeros(3)),
               solvers.run_dnc(obj, solvers.DncConfig(1 / (2 * obj.L), k_max, W), np.zeros(3))):
        for k in range(0, k_max + 1, 10):
            s = oracle.inexact_oracle_at(obj, tr.y[k])
            worst = max(worst, *oracle.check_definition1(s, obj, probes, 5.0, seed=k))
    return CheckResult("inexact oracle sandwich", worst <= oracle.VIOLATION_TOL,
                       f"worst violation {worst:.2e}")


def check_progress(k_max=300):
    obj, W = instance(10, 3)
    reps = [
        oracle.check_lemma2_progress(
            solvers.run_dng(obj, solvers.DngConfig(1 / (2 * obj.L), k_max, W), np.zeros(3)), obj),
        oracle.check_lemma2_progress(
            solvers.run_dnc(obj, solvers.DncConfig(1 / (2 * obj.L), k_max, W), np.zeros(3)), obj),
        oracle.check_lemma2_progress(
            solvers.run_dng(obj, solvers.DngConfig(2 / obj.L, k_max, W), np.zeros(3)), obj),
    ]
    bad = sum(len(r.violations) for r in reps)
    return CheckResult("per-iteration progress inequality", bad == 0,
                       f"{bad} violations, worst in-regime residual {min(r.worst for r in reps):.2e}")


def check_phi(count=4, span=50, eta=0.1):
    worst = 0.0
    for j in range(count):
        n = (5, 10, 20)[j % 3]
        W = net.safeguard_weights(net.metropolis_weights(net.generate_geometric(n, DENSITY[n], 50 + j)), eta)
        mu = net.spectral(W).mu
        for t in (0, 1, 7):
            ratio = bounds.phi_norms(W, t, span) / bounds.phi_norm_bound(mu, eta, np.arange(span + 1))
            worst = max(worst, float(np.max(ratio)))
    return CheckResult("transition-matrix norm bound", worst <= 1, f"max norm/bound {worst:.3f}")


def check_nedic(k_max=500):
    fails = []
    for tau in (0.0, 1 / 3, 0.5, 0.75, 1.0):
        r = experiments.nedic_hard(tau, k_max)
        if not (r.envelope_ok and r.in_region.all()):
            fails.append(f"tau={tau:.2f}")
    return CheckResult("baseline lower envelope", not fails, "ok" if not fails else ", ".join(fails))


def check_single_node(k_max=1000, c=0.5):
    obj = objectives.make_logistic(1, 4)
    W = net.custom_weights(1, [[1.0]])
    tr = solvers.run_dng(obj, solvers.DngConfig(c, k_max, W), np.zeros(3))
    ref = solvers.run_centralized(obj, lambda k: c / (k + 1), k_max, np.zeros(3))
    err = max(float(np.max(np.abs(tr.x[:, 0] - ref.x[:, 0]))),
              float(np.max(np.abs(tr.y[:, 0] - ref.y[:, 0]))))
    return CheckResult("single-node reduction", err <= 1e-12, f"max iterate difference {err:.1e}")


def check_unbounded():
    g1, _, _ = experiments.unbounded_dnc(10, 1.0)
    tr, obj, lb = experiments.unbounded_dng(100, 1.0)
    ratio = float(np.min(tr.dis_x[5:] / lb[5:]))
    ok = g1 >= 1.0 and ratio >= 1.0
    return CheckResult("unbounded-gradient instances", ok,
                       f"constant-step gap {g1:.2f} (needs >= 1), disagreement/lower bound {ratio:.3f}")


SUITE = (check_gradients, check_certificates, check_weights, check_dng_consensus,
         check_dnc_consensus, check_gap_bounds, check_oracle, check_progress, check_phi,
         check_nedic, check_single_node, check_unbounded)


def run_suite(checks=SUITE):
    return [chk() for chk in checks]
