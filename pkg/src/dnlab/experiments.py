"""
Ready-made experiments: the logistic and Huber comparisons, the adversarial
instances, and the divergence demonstrations.

Each function returns plain data (traces, arrays, small dataclasses) so the
command line, the demos and the tests can share them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .net import (custom_weights, generate_geometric, metropolis_weights, safeguard_weights,
                  spectral, two_node_weights)
from .objectives import (hard_nonsmooth_grad, hard_nonsmooth_region, hard_nonsmooth_value,
                         make_cubic_pair, make_hard_quadratic_pair, make_huber_pair,
                         make_huber_two_group, make_logistic, solvable_logistic_seeds)
from .solvers import (DncConfig, DngConfig, DsgConfig, metrics, run_dnc, run_dng, run_dsg)

HARD_W = 1.0 / 8.0          # off-diagonal weight of the slow-baseline instance
HARD_C = 1.0 / (2.0 * math.sqrt(2.0))
FAST_N = 30
FAST_DENSITY = 0.15
FULL_N = 100
FULL_DENSITY = 0.10


# ---------------------------------------------------------------------------
# logistic comparison
# ---------------------------------------------------------------------------

@dataclass
class Comparison:
    """Traces of several methods on one objective, keyed by a label."""

    obj: object
    traces: dict
    mu: dict = field(default_factory=dict)

    def first_hits(self, targets=None, quantity="avg_rel_err"):
        kw = {} if targets is None else {"targets": targets}
        return {name: metrics(tr, self.obj, quantity=quantity, **kw)
                for name, tr in self.traces.items()}


def logistic_setup(seed, n=FAST_N, density=None):
    """Solvable logistic instance and a connected geometric network for `seed`.

    When the drawn samples are separable (no minimizer) the next solvable
    seed is used, so the data seed can differ from `seed`.
    """
    if density is None:
        density = FULL_DENSITY if n >= FULL_N else FAST_DENSITY
    data_seed = solvable_logistic_seeds(n, 1, start=seed)[0]
    obj = make_logistic(n, data_seed)
    g = generate_geometric(n, density, seed)
    return obj, metropolis_weights(g)


def fig1_left(seed, n=FAST_N, k_max=None, density=None, eta=0.1):
    """Logistic comparison of the accelerated methods and the baseline.

    The diminishing-step method runs on the safeguarded matrix with step
    ``1/(k+1)``; the constant-step method runs with ``1/(2L)`` and ``1/L``;
    the baseline uses step ``1/sqrt(k)`` at iteration ``k``. Iteration
    budgets are chosen so every method spends a comparable number of
    broadcasts.
    """
    obj, W = logistic_setup(seed, n, density)
    Ws = safeguard_weights(W, eta)
    if k_max is None:
        k_max = 5000
    x0 = np.zeros(obj.d)
    mu = spectral(W).mu
    traces = {
        "dng": run_dng(obj, DngConfig(1.0, k_max, Ws), x0, seed),
        "dsg": run_dsg(obj, DsgConfig(1.0, 0.5, k_max, W), x0, seed),
    }
    budget = k_max
    for label, a in (("dnc_half", 1 / (2 * obj.L)), ("dnc_full", 1 / obj.L)):
        k_outer = _outer_for_budget(budget, mu)
        traces[label] = run_dnc(obj, DncConfig(a, k_outer, W), x0, seed)
    return Comparison(obj, traces, {"W": mu, "W_safe": spectral(Ws).mu})


def _outer_for_budget(budget, mu):
    """Largest outer count whose cumulative consensus sweeps stay within `budget`."""
    from .solvers import tau_x, tau_y
    total, k = 0, 0
    while True:
        step = tau_x(k + 1, mu) + tau_y(k + 1, mu)
        if total + step > budget:
            return max(k, 1)
        total += step
        k += 1


def fig1_right(seed, thetas=(0.01, 10.0, 1000.0), k_max=100_000, density=0.32):
    """Huber two-group comparison of the accelerated methods for several scales.

    Both methods use the plain Metropolis matrix of a 20-node geometric
    network; the diminishing-step method uses ``c = 1`` and the
    constant-step method ``alpha = 1/L = 1``. The default budget of 1e5
    broadcasts per node is what the ``theta = 1000`` case needs: the
    optimum sits about ``theta`` away from the start and gradients are
    bounded by one, so nothing converges before a few thousand iterations.
    """
    g = generate_geometric(20, density, seed)
    W = metropolis_weights(g)
    mu = spectral(W).mu
    out = {}
    for th in thetas:
        obj = make_huber_two_group(th, seed)
        x0 = np.zeros(1)
        out[th] = Comparison(obj, {
            "dng": run_dng(obj, DngConfig(1.0, k_max, W), x0, seed),
            "dnc": run_dnc(obj, DncConfig(1.0, _outer_for_budget(k_max, mu), W), x0, seed),
        }, {"W": mu})
    return out


# ---------------------------------------------------------------------------
# slow-baseline instance
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NedicReport:
    """Per-horizon results: entry ``j`` is a run of length ``k[j]`` with ``theta[j]``."""

    tau: float
    k: np.ndarray
    theta: np.ndarray
    max_gap: np.ndarray
    envelope: np.ndarray
    in_region: np.ndarray

    @property
    def envelope_ok(self):
        return bool(np.all(self.max_gap >= self.envelope - 1e-9))

    def slope(self, lo=1e2, hi=1e4):
        m = (self.k >= lo) & (self.k <= hi)
        return float(np.polyfit(np.log(self.k[m]), np.log(self.max_gap[m]), 1)[0])


def nedic_hard(tau, k_max, c=HARD_C, x0=((1.0, 0.0), (1.0, 0.0))):
    """Baseline on the two-region instance, one run per horizon ``k = 1..k_max``.

    Run ``k`` uses ``theta_k = 1 / s_k(tau)`` and step ``c / t^tau`` at
    iteration ``t``; all horizons advance together as one batched array so
    the work is ``O(k_max^2)`` vector entries rather than Python loops.
    Gradients come from the same kernel as the objective set.
    """
    ks = np.arange(1, k_max + 1)
    theta = 1.0 / bounds.s_k(ks, tau)
    w_self, w_other = 1 - HARD_W, HARD_W
    # layout (node, horizon, coordinate): each node's active block is a view
    X = np.empty((2, k_max, 2))
    x0 = np.asarray(x0, dtype=float)
    X[0], X[1] = x0[0], x0[1]
    node = [np.zeros(k_max, dtype=int), np.ones(k_max, dtype=int)]
    inside = np.ones(k_max, dtype=bool)
    for t in range(1, k_max + 1):
        a = c / t ** tau
        j = t - 1                          # runs with horizon >= t
        th = theta[j:]
        X0, X1 = X[0, j:], X[1, j:]
        g0 = hard_nonsmooth_grad(X0, node[0][j:], th)
        g1 = hard_nonsmooth_grad(X1, node[1][j:], th)
        X0[...], X1[...] = (w_self * X0 + w_other * X1 - a * g0,
                            w_other * X0 + w_self * X1 - a * g1)
        inside[j:] &= hard_nonsmooth_region(X0, node[0][j:], th)
        inside[j:] &= hard_nonsmooth_region(X1, node[1][j:], th)
    # final states: f(x_i) = f_1(x_i) + f_2(x_i) for both nodes
    gaps = np.column_stack([
        hard_nonsmooth_value(X[i], node[0], theta) + hard_nonsmooth_value(X[i], node[1], theta)
        - (theta + 1.0)
        for i in range(2)
    ])
    env = bounds.nedic_envelope(ks, tau, c, c)
    return NedicReport(tau, ks, theta, gaps.max(axis=1), env, inside)


def nedic_hard_single(tau, k, c=HARD_C, x0=((1.0, 0.0), (1.0, 0.0))):
    """One unbatched baseline run of horizon `k` (cross-check for :func:`nedic_hard`)."""
    from .objectives import make_hard_nonsmooth_pair
    obj = make_hard_nonsmooth_pair(bounds.theta_k(k, tau))
    tr = run_dsg(obj, DsgConfig(c, tau, k, two_node_weights(HARD_W)), np.asarray(x0))
    return obj, tr


# ---------------------------------------------------------------------------
# unbounded-gradient instances
# ---------------------------------------------------------------------------

DNG_HARD_W = 0.5 * (1 - 1e-6)
DNG_HARD_C = 0.25e-6


def unbounded_dnc(k, M, alpha=0.5, w_off=0.25):
    """Constant-step method on the far-apart parabola pair scaled for iteration `k`.

    Returns ``(max_gap_at_k, trace, obj)``.
    """
    obj = make_hard_quadratic_pair(bounds.hard_theta(k, M, "dnc"))
    tr = run_dnc(obj, DncConfig(alpha, k, two_node_weights(w_off)), np.zeros(1))
    return float(tr.max_gap(obj)[k]), tr, obj


def unbounded_dng(k, M, k_max=None):
    """Diminishing-step method on the parabola pair with a nearly ideal averaging matrix.

    Returns ``(trace, obj, disagreement_lower_bound)`` where the last entry
    is ``sqrt(2) c theta / (2 k)`` for every iteration of the trace.
    """
    theta = bounds.hard_theta(k, M, "dng")
    obj = make_hard_quadratic_pair(theta)
    k_max = k if k_max is None else k_max
    tr = run_dng(obj, DngConfig(DNG_HARD_C, k_max, two_node_weights(DNG_HARD_W)), np.zeros(1))
    kk = np.maximum(np.arange(k_max + 1), 1)
    return tr, obj, math.sqrt(2) * DNG_HARD_C * theta / (2 * kk)


# ---------------------------------------------------------------------------
# divergence demonstrations
# ---------------------------------------------------------------------------

def diverge_assumption_1b(k_max=200):
    """Diminishing-step method on the Huber pair with a matrix that has a negative eigenvalue."""
    obj = make_huber_pair()
    W = custom_weights(2, [[0.1, 0.9], [0.9, 0.1]])
    return run_dng(obj, DngConfig(1.0, k_max, W), np.zeros(1)), obj


def diverge_cubic(method, k_max=1000):
    """Cubic pair with per-node start ``(-1, 1)``; `method` is ``"dng"`` or ``"dnc"``."""
    obj = make_cubic_pair()
    W = two_node_weights(0.1)
    x0 = np.array([[-1.0], [1.0]])
    if method == "dng":
        return run_dng(obj, DngConfig(1.0, k_max, W), x0), obj
    if method == "dnc":
        return run_dnc(obj, DncConfig(0.1, k_max, W), x0), obj
    raise ValueError(f"method must be 'dng' or 'dnc', not {method!r}")
