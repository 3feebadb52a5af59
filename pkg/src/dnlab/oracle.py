"""
Numeric checks of the inexact-oracle view of the network averages.

The network average of a distributed run behaves like a centralized
accelerated method fed with a perturbed first-order oracle. This module
builds that oracle from stacked node states, probes its two-sided
inequality, and evaluates the per-iteration progress inequality along a
trace. Violations are returned as data; nothing here raises on failure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

VIOLATION_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class OracleSample:
    """Oracle pair at the average ``ybar`` of `y_stack`.

    ``L_k = 2 n L`` and ``delta_k = L ||y - ybar||^2`` (squared Frobenius
    norm of the disagreement).
    """

    y_stack: np.ndarray
    ybar: np.ndarray
    f_hat: float
    g_hat: np.ndarray
    L_k: float
    delta_k: float


def inexact_oracle_at(obj, y_stack) -> OracleSample:
    if obj.L is None:
        raise ValueError("the oracle constants need a finite L")
    Y = obj._stack(y_stack)
    ybar = Y.mean(axis=0)
    vals = obj.node_values(Y)
    grads = obj.node_grads(Y)
    f_hat = float(np.sum(vals + np.einsum("nd,nd->n", grads, ybar - Y)))
    g_hat = grads.sum(axis=0)
    delta = obj.L * float(np.sum((Y - ybar) ** 2))
    return OracleSample(Y.copy(), ybar, f_hat, g_hat, 2 * obj.n * obj.L, delta)


def definition1_violations(sample, obj, points):
    """Lower and upper violations at each row of `points`.

    Lower: ``f_hat + g_hat.(x - ybar) - f(x)``. Upper:
    ``f(x) - [f_hat + g_hat.(x - ybar) + (L_k/2)||x - ybar||^2 + delta_k]``.
    Both are nonpositive when the oracle inequality holds.
    """
    P = np.atleast_2d(points)
    fx = obj.f_many(P)
    diff = P - sample.ybar
    lin = sample.f_hat + diff @ sample.g_hat
    lower = lin - fx
    upper = fx - (lin + 0.5 * sample.L_k * np.einsum("md,md->m", diff, diff) + sample.delta_k)
    return lower, upper


def check_definition1(sample, obj, probes=500, box=5.0, seed=0):
    """Worst ``(lower, upper)`` violation over random and structured probes.

    Structured probes are the average ``ybar``, the reference minimizer
    (when the set has one) and every node state.
    """
    rng = np.random.default_rng(seed)
    pts = [rng.uniform(-box, box, size=(probes, obj.d)), sample.ybar[None, :], sample.y_stack]
    if obj._optimum is not None:
        pts.append(np.atleast_2d(obj.x_star))
    lower, upper = definition1_violations(sample, obj, np.vstack(pts))
    return float(np.max(lower)), float(np.max(upper))


def vbar(xbar_k, ybar_k, k):
    """Auxiliary point ``(ybar - (1 - gamma) xbar) / gamma`` with ``gamma = 2/(k+2)``."""
    g = 2.0 / (k + 2)
    return (np.asarray(ybar_k) - (1 - g) * np.asarray(xbar_k)) / g


@dataclass(frozen=True, eq=False)
class ProgressReport:
    """Residuals ``r_k`` (right side minus left side) for ``k = 1..K``."""

    k: np.ndarray
    residual: np.ndarray
    regime_ok: np.ndarray
    tol: float = VIOLATION_TOL

    @property
    def violations(self):
        return self.k[self.regime_ok & (self.residual < -self.tol)]

    @property
    def worst(self):
        r = self.residual[self.regime_ok]
        return float(np.min(r)) if r.size else float("nan")

    def summary(self):
        return (f"progress: {len(self.k)} iterations, {int(self.regime_ok.sum())} in regime, "
                f"{len(self.violations)} violations, worst residual {self.worst:.3e}")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("k", "residual", "regime_ok"))
            for k, r, ok in zip(self.k, self.residual, self.regime_ok):
                w.writerow((int(k), f"{float(r):.17g}", int(ok)))


def _oracle_curvature(trace, obj):
    """``L_{k-1} = n / alpha_{k-1}`` for ``k = 1..K`` and the regime flags."""
    K = trace.k_max
    ks = np.arange(1, K + 1)
    n = trace.n
    if trace.method == "dng":
        c = trace.config["c"]
        Lk = n * ks / c
    elif trace.method == "dnc":
        Lk = np.full(K, n / trace.config["alpha"])
    else:
        raise ValueError(f"progress check applies to dng/dnc traces, not {trace.method!r}")
    ok = Lk >= 2 * n * obj.L * (1 - 1e-12)
    return ks, Lk, ok


def check_lemma2_progress(trace, obj, x_ref=None, tol=VIOLATION_TOL) -> ProgressReport:
    """Per-iteration progress inequality of the accelerated method on the averages.

    With ``F(k) = f(xbar(k)) - f(x_ref)``, ``V(k) = ||vbar(k) - x_ref||^2`` and
    ``delta = L ||ytilde(k-1)||^2`` the residual is::

        r_k = (k^2-1) F(k-1) + 2 L_{k-1} V(k-1) + (k+1)^2 delta
              - (k+1)^2 F(k) - 2 L_{k-1} V(k)

    Iterations where ``L_{k-1} < 2nL`` are reported but marked out of regime.
    """
    if x_ref is None:
        x_ref = obj.x_star
    x_ref = np.atleast_1d(np.asarray(x_ref, dtype=float))
    ks, Lk, ok = _oracle_curvature(trace, obj)
    xb, yb = trace.xbar, trace.ybar
    F = obj.f_many(xb) - obj.f(x_ref)
    kk = np.arange(trace.k_max + 1)
    V = np.sum((vbar(xb, yb, kk[:, None]) - x_ref) ** 2, axis=1)
    delta = obj.L * trace.dis_y ** 2
    rhs = (ks ** 2 - 1) * F[:-1] + 2 * Lk * V[:-1] + (ks + 1) ** 2 * delta[:-1]
    lhs = (ks + 1) ** 2 * F[1:] + 2 * Lk * V[1:]
    return ProgressReport(ks, rhs - lhs, ok, tol)
