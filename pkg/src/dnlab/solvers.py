"""
Distributed Nesterov-type solvers, the distributed gradient baseline and a
centralized reference, all producing full :class:`RunTrace` objects.

States are stacked node-major: ``X[i]`` is node ``i``'s estimate, so a
consensus sweep is ``W @ X`` and acts on every coordinate at once.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .net import WeightMatrix, spectral

DIVERGENCE_LIMIT = 1e150
EPS_TARGETS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
TRACE_COLUMNS = ("method", "seed", "k", "comms_per_node", "total_comms", "avg_rel_err",
                 "max_gap", "dis_x", "dis_y", "diverged")


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

def alpha_dng(c, k):
    """Step size ``c / (k + 1)`` used at iteration ``k + 1``."""
    return c / (k + 1)


def beta(k):
    """Momentum weight ``k / (k + 3)``; ``beta(-1)`` is 0."""
    if k < 0:
        return 0.0
    return k / (k + 3)


def _ceil(v):
    # guard against log ratios such as log(4)/log(2) landing just above an integer
    return max(0, math.ceil(v - 1e-9))


def _check_mu(mu):
    if not 0.0 <= mu < 1.0:
        raise ValueError(f"mu must lie in [0, 1) for the consensus schedules, got {mu}")


def tau_x(k, mu):
    """Consensus sweeps after the gradient step of outer iteration ``k``."""
    _check_mu(mu)
    if mu == 0.0:
        return 0 if k == 1 else 1
    return _ceil(2 * math.log(k) / -math.log(mu))


def tau_y(k, mu):
    """Consensus sweeps after the momentum step of outer iteration ``k``."""
    _check_mu(mu)
    if mu == 0.0:
        return 0 if k == 1 else 1
    return _ceil((math.log(3) + 2 * math.log(k)) / -math.log(mu))


# ---------------------------------------------------------------------------
# configs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DngConfig:
    c: float
    k_max: int
    weight: WeightMatrix

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")

    def in_regime(self, L):
        return L is not None and self.c <= 1 / (2 * L)

    def snapshot(self):
        return {"c": self.c, "k_max": self.k_max}


@dataclass(frozen=True)
class DncConfig:
    """Constant step `alpha`; `mu` defaults to the spectral value of `weight`."""

    alpha: float
    k_max: int
    weight: WeightMatrix
    mu: float | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        actual = spectral(self.weight).mu
        if self.mu is None:
            object.__setattr__(self, "mu", actual)
        elif abs(self.mu - actual) > 1e-10:
            raise ValueError(f"mu={self.mu} disagrees with the weight matrix (mu={actual})")
        _check_mu(self.mu)

    def in_regime(self, L):
        return L is not None and self.alpha <= 1 / (2 * L)

    def snapshot(self):
        return {"alpha": self.alpha, "k_max": self.k_max, "mu": self.mu}


@dataclass(frozen=True)
class DsgConfig:
    """Baseline step ``c / k^tau`` at iteration ``k``."""

    c: float
    tau: float
    k_max: int
    weight: WeightMatrix

    def __post_init__(self):
        if self.c <= 0 or self.tau < 0:
            raise ValueError("need c > 0 and tau >= 0")

    def step(self, k):
        return self.c / k ** self.tau

    def snapshot(self):
        return {"c": self.c, "tau": self.tau, "k_max": self.k_max}


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IterRecord:
    k: int
    comms_per_node: int
    x_stack: np.ndarray
    y_stack: np.ndarray
    xbar: np.ndarray
    ybar: np.ndarray
    dis_x: float
    dis_y: float
    gaps: np.ndarray
    avg_rel_err: float


@dataclass(frozen=True, eq=False)
class RunTrace:
    """States of one run, indexed by outer iteration ``k = 0..K``.

    ``x`` and ``y`` have shape ``(K+1, n, d)``; ``comms[k]`` is the cumulative
    number of vector broadcasts per node after iteration ``k``. Gaps are
    computed on demand from the objective's reference optimum, so a refined
    optimum can be applied without rerunning.
    """

    method: str
    x: np.ndarray
    y: np.ndarray
    comms: np.ndarray
    diverged: bool = False
    config: dict = field(default_factory=dict)
    objective: str = ""
    seed: object = None
    steps: np.ndarray | None = None

    def __post_init__(self):
        for a in (self.x, self.y, self.comms):
            a.setflags(write=False)

    @property
    def k_max(self):
        return self.x.shape[0] - 1

    @property
    def n(self):
        return self.x.shape[1]

    @cached_property
    def xbar(self):
        return self.x.mean(axis=1)

    @cached_property
    def ybar(self):
        return self.y.mean(axis=1)

    @cached_property
    def dis_x(self):
        return _spread(self.x, self.xbar)

    @cached_property
    def dis_y(self):
        return _spread(self.y, self.ybar)

    def node_gaps(self, obj):
        """``f(x_i(k)) - f_star`` with shape ``(K+1, n)``."""
        K1, n, d = self.x.shape
        with np.errstate(over="ignore", invalid="ignore"):
            return obj.gap_many(self.x.reshape(K1 * n, d)).reshape(K1, n)

    def max_gap(self, obj):
        return self.node_gaps(obj).max(axis=1)

    def avg_rel_err(self, obj):
        """Mean over nodes of ``gap_i(k) / gap_i(0)``; ``nan`` where a node starts optimal."""
        g = self.node_gaps(obj)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (g / g[0]).mean(axis=1)

    def record(self, k, obj) -> IterRecord:
        g = self.node_gaps(obj)
        return IterRecord(k, int(self.comms[k]), self.x[k], self.y[k], self.xbar[k], self.ybar[k],
                          float(self.dis_x[k]), float(self.dis_y[k]), g[k],
                          float(self.avg_rel_err(obj)[k]))

    def rows(self, obj):
        g = self.node_gaps(obj)
        err = self.avg_rel_err(obj)
        mg = g.max(axis=1)
        last = self.k_max
        for k in range(last + 1):
            yield {
                "method": self.method,
                "seed": "" if self.seed is None else self.seed,
                "k": k,
                "comms_per_node": int(self.comms[k]),
                "total_comms": int(self.comms[k]) * self.n,
                "avg_rel_err": err[k],
                "max_gap": mg[k],
                "dis_x": self.dis_x[k],
                "dis_y": self.dis_y[k],
                "diverged": int(self.diverged and k == last),
            }

    def to_csv(self, path, obj):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for r in self.rows(obj):
                w.writerow([_num(r[c]) for c in TRACE_COLUMNS])


def _spread(S, mean):
    # overflow is expected on diverging runs; the norm is then inf
    with np.errstate(over="ignore", invalid="ignore"):
        return np.linalg.norm((S - mean[:, None, :]).reshape(S.shape[0], -1), axis=1)


def _num(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _init_stack(obj, x0):
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 0:
        x0 = x0.reshape(1)
    if x0.ndim == 1:
        if x0.size != obj.d:
            raise ValueError(f"x0 has {x0.size} entries, objective dimension is {obj.d}")
        return np.tile(x0, (obj.n, 1))
    if x0.shape != (obj.n, obj.d):
        raise ValueError(f"per-node x0 must have shape {(obj.n, obj.d)}, got {x0.shape}")
    return x0.copy()


def _blew_up(X):
    return not np.all(np.isfinite(X)) or np.max(np.abs(X)) > DIVERGENCE_LIMIT


class _Recorder:
    def __init__(self, X0, k_max):
        n, d = X0.shape
        self.x = np.empty((k_max + 1, n, d))
        self.y = np.empty((k_max + 1, n, d))
        self.comms = np.zeros(k_max + 1, dtype=np.int64)
        self.steps = np.full(k_max + 1, np.nan)
        self.x[0] = self.y[0] = X0
        self.last = 0
        self.diverged = False

    def push(self, k, x, y, comms, step):
        bad = _blew_up(x) or _blew_up(y)
        if bad and not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            self.diverged = True
            return False
        self.x[k], self.y[k] = x, y
        self.comms[k] = comms
        self.steps[k] = step
        self.last = k
        if bad:
            self.diverged = True
            return False
        return True

    def trace(self, method, config, obj, seed):
        s = slice(0, self.last + 1)
        return RunTrace(method, self.x[s].copy(), self.y[s].copy(), self.comms[s].copy(),
                        self.diverged, config, obj.describe(), seed, self.steps[s].copy())


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

def run_dng(obj, cfg: DngConfig, x0, seed=None) -> RunTrace:
    """Distributed Nesterov gradient with step ``c/(k+1)`` and one broadcast per iteration.

    Each node mixes its neighbours' momentum variables, takes a local
    gradient step and extrapolates with weight ``(k-1)/(k+2)``.
    """
    W = np.asarray(cfg.weight.w)
    x_prev = _init_stack(obj, x0)
    y = x_prev.copy()
    rec = _Recorder(x_prev, cfg.k_max)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, cfg.k_max + 1):
            a = alpha_dng(cfg.c, k - 1)
            x = W @ y - a * obj.node_grads(y)
            y = x + beta(k - 1) * (x - x_prev)
            if not rec.push(k, x, y, k, a):
                break
            x_prev = x
    return rec.trace("dng", cfg.snapshot(), obj, seed)


def _sweep(W, X, times):
    for _ in range(times):
        X = W @ X
    return X


def run_dnc(obj, cfg: DncConfig, x0, seed=None) -> RunTrace:
    """Distributed Nesterov with consensus: constant step and growing inner averaging.

    Outer iteration ``k`` takes a local gradient step, averages it with
    ``tau_x(k)`` consensus sweeps, extrapolates, and averages again with
    ``tau_y(k)`` sweeps. Communication counts both sweep phases.
    """
    W = np.asarray(cfg.weight.w)
    x_prev = _init_stack(obj, x0)
    y = x_prev.copy()
    rec = _Recorder(x_prev, cfg.k_max)
    comms = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, cfg.k_max + 1):
            tx, ty = tau_x(k, cfg.mu), tau_y(k, cfg.mu)
            x = _sweep(W, y - cfg.alpha * obj.node_grads(y), tx)
            y = _sweep(W, x + beta(k - 1) * (x - x_prev), ty)
            comms += tx + ty
            if not rec.push(k, x, y, comms, cfg.alpha):
                break
            x_prev = x
    return rec.trace("dnc", cfg.snapshot(), obj, seed)


def run_dsg(obj, cfg: DsgConfig, x0, seed=None) -> RunTrace:
    """Distributed (sub)gradient baseline: mix, then step along the local gradient.

    The ``y`` states of the returned trace equal ``x``.
    """
    W = np.asarray(cfg.weight.w)
    x = _init_stack(obj, x0)
    rec = _Recorder(x, cfg.k_max)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, cfg.k_max + 1):
            a = cfg.step(k)
            x = W @ x - a * obj.node_grads(x)
            if not rec.push(k, x, x, k, a):
                break
    return rec.trace("dsg", cfg.snapshot(), obj, seed)


def run_centralized(obj, alpha: float | Callable[[int], float], k_max, x0=None) -> RunTrace:
    """Exact-gradient accelerated method on ``f = sum_i f_i``.

    `alpha` is either a constant step or a callable ``k -> alpha_k`` giving
    the step used at iteration ``k + 1``. The iteration is written through
    the auxiliary sequence ``v(k) = ((k+1)/2) x(k) - ((k-1)/2) x(k-1)`` and
    the averaging weight ``gamma_k = 2/(k+2)``, which is algebraically the
    same method as a momentum step with weight ``(k-1)/(k+2)``. The trace
    has a single "node".
    """
    step = alpha if callable(alpha) else (lambda k, a=float(alpha): a)
    x_prev = np.zeros(obj.d) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    y = x_prev.copy()
    rec = _Recorder(x_prev[None, :], k_max)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, k_max + 1):
            a = step(k - 1)
            x = y - a * obj.grad_f(y)
            v = 0.5 * (k + 1) * x - 0.5 * (k - 1) * x_prev
            g = 2.0 / (k + 2)
            y = (1 - g) * x + g * v
            if not rec.push(k, x[None, :], y[None, :], k, a):
                break
            x_prev = x
    tr = rec.trace("centralized", {"k_max": k_max}, obj, None)
    return tr


def centralized_gaps(trace, obj):
    """``f(x(k)) - f_star`` for a centralized trace (the single row is the global iterate)."""
    return obj.f_many(trace.x[:, 0, :]) - obj.f_star


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def metrics(trace, obj, targets=EPS_TARGETS, quantity="avg_rel_err"):
    """First iteration at which each accuracy target is met.

    Returns a dict mapping each target to ``(k, comms_per_node, total_comms)``
    or ``None`` when the target is never reached. A diverged trace reaches
    no target.
    """
    if quantity == "avg_rel_err":
        err = trace.avg_rel_err(obj)
    elif quantity == "max_gap":
        err = trace.max_gap(obj)
    else:
        raise ValueError(f"unknown quantity {quantity!r}")
    out = {}
    for eps in targets:
        hit = None
        if not trace.diverged:
            ks = np.nonzero(err <= eps)[0]
            if ks.size:
                k = int(ks[0])
                hit = (k, int(trace.comms[k]), int(trace.comms[k]) * trace.n)
        out[eps] = hit
    return out
