"""
Closed-form convergence guarantees, their constants, and the adversarial
envelopes used to compare measured behaviour against theory.

All bound functions accept a scalar ``k`` or an array of iteration counts
and return values of matching shape.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .net import WeightMatrix
from .solvers import beta, tau_x, tau_y

BOUND_COLUMNS = ("k", "bound_consensus", "bound_gap", "bound_comms")


def _b_objective(z, r):
    return z * r ** z * math.log1p(z)


def big_b(r):
    """``sup_{z >= 1/2} z r^z log(1 + z)`` for ``r`` in ``[0, 1)``.

    A grid of spacing 1e-3 over ``[1/2, max(10, 20/(-log r))]`` locates the
    maximizer, which is then polished with a bounded scalar search in the
    neighbouring grid cells. ``big_b(0)`` is 0.
    """
    if r == 0:
        return 0.0
    if not 0 < r < 1:
        raise ValueError("r must lie in [0, 1)")
    top = max(10.0, 20.0 / -math.log(r))
    z = np.arange(0.5, top + 1e-3, 1e-3)
    vals = z * np.exp(z * math.log(r)) * np.log1p(z)
    j = int(np.argmax(vals))
    lo, hi = z[max(j - 1, 0)], z[min(j + 1, z.size - 1)]
    best = float(vals[j])
    if hi > lo:
        res = minimize_scalar(lambda t: -_b_objective(t, r), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def c_cons(mu, eta):
    """Consensus constant ``8/sqrt(eta(1-mu)) * (2 B(sqrt(mu)) + 7/(1-mu))``."""
    if not 0 <= mu < 1:
        raise ValueError("mu must lie in [0, 1)")
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    return 8.0 / math.sqrt(eta * (1 - mu)) * (2 * big_b(math.sqrt(mu)) + 7.0 / (1 - mu))


def dng_consensus_bound(k, n, c, G, C_cons):
    """Disagreement bounds ``(bx, by)`` for the diminishing-step method; ``by = 4 bx``."""
    k = np.asarray(k, dtype=float)
    bx = math.sqrt(n) * c * G * C_cons / k
    return bx, 4 * bx


def dng_rate_sum(k):
    """``(1/k) sum_{t=1}^k (t+2)^2 / ((t+1) t^2)``; behaves like ``log k / k``."""
    k = np.asarray(k)
    top = int(np.max(k))
    t = np.arange(1, top + 1, dtype=float)
    cum = np.cumsum((t + 2) ** 2 / ((t + 1) * t ** 2))
    return cum[k - 1] / k


def dng_gap_constant(c, L, G, R, C_cons):
    return 2 * R ** 2 / c + 16 * c ** 2 * L * C_cons ** 2 * G ** 2 + c * G ** 2 * C_cons


def dng_gap_bound(k, c, L, G, R, C_cons):
    """Bound on ``(f(x_i(k)) - f_star) / n`` for the diminishing-step method.

    Raises
    ------
    ValueError
        If ``c > 1/(2L)``; see :func:`dng_gap_bound_large_step` for that case.
    """
    if c > 1 / (2 * L) * (1 + 1e-12):
        raise ValueError(f"c={c} exceeds 1/(2L)={1 / (2 * L)}; the bound needs c <= 1/(2L)")
    return dng_gap_constant(c, L, G, R, C_cons) * dng_rate_sum(k)


def dng_gap_bound_large_step(k, c, L, G, R, C_cons):
    """Diagnostic bound on the per-node gap over ``n`` when ``c > 1/(2L)``.

    Valid for ``k > 2cL`` (``nan`` elsewhere), and assumes zero
    initialization so that ``R`` bounds ``||x_star||``. The constant grows
    like ``9^{2cL}``, so the value is mostly of theoretical interest.
    """
    kp = 2 * c * L
    geo = (3 ** kp - 1) / 2
    const = (kp * L * (geo ** 2 * 4 * c ** 2 * G ** 2 + R ** 2)
             + (2 / c) * (2 * (2 * kp + 1) ** 2 * geo ** 2 * 4 * c ** 2 * G ** 2 + 2 * R ** 2)
             + 16 * c ** 2 * L * C_cons ** 2 * G ** 2 + c * C_cons * G ** 2)
    k = np.atleast_1d(np.asarray(k))
    t = np.arange(2, int(k.max()) + 1, dtype=float)
    cum = np.r_[0.0, 0.0, np.cumsum((t + 2) ** 2 / (t * (t - 1) ** 2))]
    out = np.where(k > kp, const * cum[k] / np.maximum(k, 1), np.nan)
    return out if out.size > 1 else float(out[0])


def dnc_consensus_bound(k, n, alpha, G):
    """``2 alpha sqrt(n) G / k^2``, bounding both disagreement vectors."""
    k = np.asarray(k, dtype=float)
    return 2 * alpha * math.sqrt(n) * G / k ** 2


def dnc_gap_bound(k, alpha, L, G, R):
    """Bound on ``(f(x_i(k)) - f_star) / n`` for the constant-step method."""
    if alpha > 1 / (2 * L) * (1 + 1e-12):
        raise ValueError(f"alpha={alpha} exceeds 1/(2L)={1 / (2 * L)}")
    k = np.asarray(k, dtype=float)
    return (2 * R ** 2 / alpha + 11 * alpha ** 2 * L * G ** 2 + alpha * G ** 2) / k ** 2


def dnc_comm_bound(k, mu):
    """Upper bound on the cumulative consensus sweeps after ``k`` outer iterations.

    With ``mu = 0`` each outer iteration uses at most two sweeps, so the
    bound is ``2k``.
    """
    k = np.asarray(k, dtype=float)
    if mu == 0:
        return 2 * k
    if not 0 < mu < 1:
        raise ValueError("mu must lie in [0, 1)")
    return 2 / -math.log(mu) * (k * math.log(3) + 2 * (k + 1) * np.log(k + 1))


def dnc_comm_count(k, mu):
    """Exact cumulative sweeps ``sum_{t<=k} tau_x(t) + tau_y(t)``."""
    return sum(tau_x(t, mu) + tau_y(t, mu) for t in range(1, k + 1))


# ---------------------------------------------------------------------------
# momentum-consensus transition matrices
# ---------------------------------------------------------------------------

def _block(Wt, b):
    n = Wt.shape[0]
    top = np.hstack([(1 + b) * Wt, -b * Wt])
    bottom = np.hstack([np.eye(n), np.zeros((n, n))])
    return np.vstack([top, bottom])


def phi_matrix(w, k, t):
    """Transition matrix of the stacked disagreement ``(x~(k), x~(k-1))`` from ``t`` to ``k``.

    Built as the ordered product ``M(k-2) M(k-3) ... M(t-1)`` of blocks
    ``[[(1+b_s) Wt, -b_s Wt], [I, 0]]`` with ``Wt = W - (1/n) 11^T`` and
    ``b_s = s/(s+3)`` (zero for ``s = -1``).
    """
    if k < t or t < 0:
        raise ValueError("need k >= t >= 0")
    W = np.asarray(w.w if isinstance(w, WeightMatrix) else w, dtype=float)
    n = W.shape[0]
    Wt = W - np.full((n, n), 1.0 / n)
    P = np.eye(2 * n)
    for s in range(t - 1, k - 1):
        P = _block(Wt, beta(s)) @ P
    return P


def phi_norms(w, t, span):
    """Spectral norms of ``phi_matrix(w, t + j, t)`` for ``j = 0..span`` via one running product."""
    W = np.asarray(w.w if isinstance(w, WeightMatrix) else w, dtype=float)
    n = W.shape[0]
    Wt = W - np.full((n, n), 1.0 / n)
    P = np.eye(2 * n)
    out = [1.0]
    for s in range(t - 1, t - 1 + span):
        P = _block(Wt, beta(s)) @ P
        out.append(float(np.linalg.norm(P, 2)))
    return np.array(out)


def phi_norm_bound(mu, eta, k_minus_t):
    """``8 / sqrt(eta (1 - mu)) * sqrt(mu)^(k - t)``."""
    j = np.asarray(k_minus_t, dtype=float)
    return 8.0 / math.sqrt(eta * (1 - mu)) * np.power(math.sqrt(mu), j)


# ---------------------------------------------------------------------------
# adversarial envelopes
# ---------------------------------------------------------------------------

def s_k(k, tau):
    """``sum_{t=0}^{k-1} (t+1)^(-tau)``."""
    k = np.asarray(k)
    top = int(np.max(k))
    cum = np.cumsum(np.arange(1, top + 1, dtype=float) ** -tau)
    out = cum[k - 1]
    return float(out) if out.ndim == 0 else out


def theta_k(k, tau):
    return 1.0 / s_k(k, tau)


def nedic_envelope(k, tau, c_min, c_max):
    """Lower envelope ``(1-c_max)^2/(2 s_k) + c_min^2/(2 k^(2 tau))`` on the baseline's worst gap."""
    kk = np.asarray(k, dtype=float)
    return (1 - c_max) ** 2 / (2 * s_k(k, tau)) + c_min ** 2 / (2 * kk ** (2 * tau))


def hard_theta(k, M, method):
    """Scale of the unbounded-gradient quadratic pair that forces a gap of ``M`` at iteration ``k``."""
    if method == "dnc":
        return 8 * math.sqrt(M) * k ** 2
    if method == "dng":
        return 8e6 * k * math.sqrt(M)
    raise ValueError(f"method must be 'dnc' or 'dng', not {method!r}")


# ---------------------------------------------------------------------------
# reports aligned to traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundReport:
    """Theoretical curves for ``k = 1..K`` plus the constants that produced them."""

    k: np.ndarray
    consensus: np.ndarray
    gap: np.ndarray
    comms: np.ndarray
    constants: dict

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BOUND_COLUMNS)
            for row in zip(self.k, self.consensus, self.gap, self.comms):
                w.writerow([int(row[0])] + [f"{float(v):.17g}" for v in row[1:]])


def bounds_for_trace(trace, obj, mu, eta=None):
    """Bound curves matching a ``dng`` or ``dnc`` trace.

    The gap curve is ``nan`` when the step lies outside the regime where the
    closed form applies. ``R`` is taken as ``||xbar(0) - x_star||``.
    """
    K = trace.k_max
    ks = np.arange(1, K + 1)
    n = trace.n
    R = float(np.linalg.norm(trace.xbar[0] - obj.x_star))
    L, G = obj.L, obj.G
    consts = {"R": R, "L": L, "G": G, "mu": mu}
    if trace.method == "dng":
        c = trace.config["c"]
        C = c_cons(mu, eta)
        consts.update(C_cons=C, B=big_b(math.sqrt(mu)), c=c)
        cons = dng_consensus_bound(ks, n, c, G, C)[0]
        if c <= 1 / (2 * L):
            consts["C_gap"] = dng_gap_constant(c, L, G, R, C)
            gap = dng_gap_bound(ks, c, L, G, R, C)
        else:
            gap = np.full(K, np.nan)
        comms = ks.astype(float)
    elif trace.method == "dnc":
        a = trace.config["alpha"]
        consts.update(alpha=a)
        cons = dnc_consensus_bound(ks, n, a, G)
        gap = dnc_gap_bound(ks, a, L, G, R) if a <= 1 / (2 * L) else np.full(K, np.nan)
        comms = dnc_comm_bound(ks, mu)
    else:
        raise ValueError(f"no bounds for method {trace.method!r}")
    return BoundReport(ks, np.asarray(cons, float), np.asarray(gap, float),
                       np.asarray(comms, float), consts)
