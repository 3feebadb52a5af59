"""
Per-node convex objectives with certified constants and reference optima.

Every family evaluates node functions in a *paired* layout: given points
``P`` of shape ``(m, d)`` and node indices ``idx`` of shape ``(m,)``, the
kernel returns ``f_{idx[r]}(P[r])`` for every row. Stacked node states
(``X[i]`` held by node ``i``) and evaluations of the global sum at many
points are both thin wrappers around that kernel.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog, minimize_scalar
from scipy.special import expit

DEFAULT_BOX = 20.0
CHI_BAR = 6.0


class NonConvergenceError(RuntimeError):
    """The reference solver hit its iteration cap before reaching tolerance."""


class NodeObjective:
    """View of a single node's function ``f_i`` on ``R^d``."""

    def __init__(self, owner, i):
        self._owner = owner
        self.i = int(i)
        self.d = owner.d

    def value(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self._owner._value(x[None, :], np.array([self.i]))[0])

    def gradient(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self._owner._grad(x[None, :], np.array([self.i]))[0]


class ObjectiveSet:
    """Collection of ``n`` node functions sharing a dimension ``d``.

    Subclasses implement ``_value(P, idx)`` and ``_grad(P, idx)``. ``L`` and
    ``G`` are the Lipschitz constant of each node gradient and the bound on
    each node gradient; either may be ``None`` when no finite certificate
    exists for the family.

    Parameters
    ----------
    family : str
        Name of the generating factory, used for serialization.
    params : dict
        Generating parameters (seed, theta, anchors, ...). Together with
        `family` they reproduce the set via :func:`from_params`.
    """

    def __init__(self, family, params, n, d, L=None, G=None, box=DEFAULT_BOX, optimum=None):
        self.family = family
        self.params = dict(params)
        self.n = int(n)
        self.d = int(d)
        self.L = None if L is None else float(L)
        self.G = None if G is None else float(G)
        self.box = float(box)
        self._optimum = optimum

    # -- kernels ----------------------------------------------------------
    def _value(self, P, idx):
        raise NotImplementedError

    def _grad(self, P, idx):
        raise NotImplementedError

    def _knot_distance(self, P, idx):
        """Distance-like measure to the nearest nonsmooth point of each pair."""
        return np.full(P.shape[0], np.inf)

    # -- stacked node states ---------------------------------------------
    def node_values(self, X):
        """``f_i(X[i])`` for each node, shape ``(n,)``."""
        X = self._stack(X)
        return self._value(X, np.arange(self.n))

    def node_grads(self, X):
        """``grad f_i(X[i])`` for each node, shape ``(n, d)``."""
        X = self._stack(X)
        return self._grad(X, np.arange(self.n))

    def _stack(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(self.n, self.d)
        if X.shape != (self.n, self.d):
            raise ValueError(f"expected stacked states of shape {(self.n, self.d)}, got {X.shape}")
        return X

    # -- global function f = sum_i f_i -----------------------------------
    def f_many(self, P, chunk=20000):
        """Global objective at each row of ``P`` (shape ``(m, d)``)."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        m = P.shape[0]
        out = np.empty(m)
        step = max(1, chunk // self.n)
        idx_row = np.arange(self.n)
        for s in range(0, m, step):
            block = P[s:s + step]
            b = block.shape[0]
            rep = np.repeat(block, self.n, axis=0)
            vals = self._value(rep, np.tile(idx_row, b))
            out[s:s + b] = vals.reshape(b, self.n).sum(axis=1)
        return out

    def gap_many(self, P):
        """``f(p) - f_star`` at each row of ``P``."""
        return self.f_many(P) - self.f_star

    def f(self, x):
        return float(self.f_many(np.atleast_1d(x)[None, :])[0])

    def grad_f(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        rep = np.broadcast_to(x, (self.n, self.d))
        return self._grad(np.ascontiguousarray(rep), np.arange(self.n)).sum(axis=0)

    def node(self, i) -> NodeObjective:
        return NodeObjective(self, i)

    # -- optimum -----------------------------------------------------------
    @property
    def optimum(self):
        """``(x_star, f_star, tag)`` with tag ``"closed-form"`` or ``"solved"``."""
        if self._optimum is None:
            x, fx = reference_optimum(self)
            self._optimum = (x, fx, "solved")
        return self._optimum

    @property
    def x_star(self):
        return self.optimum[0]

    @property
    def f_star(self):
        return self.optimum[1]

    def with_optimum(self, x_star, f_star, tag="solved"):
        """Copy sharing data but carrying a different reference optimum."""
        other = object.__new__(type(self))
        other.__dict__.update(self.__dict__)
        other._optimum = (np.atleast_1d(np.asarray(x_star, dtype=float)), float(f_star), tag)
        return other

    def describe(self) -> str:
        parts = [self.family] + [f"{k}={_fmt(v)}" for k, v in sorted(self.params.items())]
        return ";".join(parts)

    def __repr__(self):
        return f"<ObjectiveSet {self.describe()} n={self.n} d={self.d} L={self.L} G={self.G}>"


def _fmt(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ",".join(f"{float(t):.17g}" for t in v) + "]"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

class _Logistic(ObjectiveSet):
    def __init__(self, n, seed, coef, L, G):
        super().__init__("logistic", {"n": n, "seed": seed}, n, 3, L=L, G=G)
        self.coef = coef

    def _value(self, P, idx):
        z = np.einsum("md,md->m", self.coef[idx], P)
        return np.logaddexp(0.0, -z)

    def _grad(self, P, idx):
        c = self.coef[idx]
        z = np.einsum("md,md->m", c, P)
        return -c * expit(-z)[:, None]

    def has_minimizer(self):
        """False when some direction ``u`` has ``c_i . u >= 0`` for all ``i`` and is not flat.

        Along such a direction every loss is nonincreasing and at least one
        strictly decreases, so the infimum is approached only at infinity.
        """
        c = self.coef
        res = linprog(-c.sum(axis=0), A_ub=-c, b_ub=np.zeros(self.n),
                      bounds=[(-1, 1)] * self.d, method="highs")
        return not (res.status == 0 and -res.fun > 1e-9)


def solvable_logistic_seeds(n, count, start=0):
    """The first `count` seeds from `start` whose logistic set has a minimizer."""
    out = []
    seed = start
    while len(out) < count:
        if make_logistic(n, seed).has_minimizer():
            out.append(seed)
        seed += 1
    return out


def make_logistic(n, seed):
    """Logistic-loss classification set with one labelled sample per node.

    The decision variable is ``x = (w1, w2, bias)``. Features are standard
    normal in the plane, the generating vector is standard normal, and labels
    are the sign of the noisy linear score with noise variance 3.
    ``L`` is ``||sum_i c_i c_i^T|| / (4n)`` and ``G = max_i ||c_i||`` where
    ``c_i = (b_i a_i, b_i)``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, 2))
    truth = rng.standard_normal(3)
    noise = rng.normal(0.0, math.sqrt(3.0), size=n)
    b = np.sign(a @ truth[:2] + truth[2] + noise)
    b[b == 0] = 1.0
    coef = np.column_stack([b[:, None] * a, b])
    L = np.linalg.norm(coef.T @ coef, 2) / (4 * n)
    G = float(np.max(np.linalg.norm(coef, axis=1)))
    return _Logistic(n, seed, coef, L, G)


def logistic_from_coef(coef):
    """Logistic set from explicit ``c_i`` rows (used by tests)."""
    coef = np.atleast_2d(np.asarray(coef, dtype=float))
    n = coef.shape[0]
    L = np.linalg.norm(coef.T @ coef, 2) / (4 * n)
    G = float(np.max(np.linalg.norm(coef, axis=1)))
    obj = _Logistic(n, None, coef, L, G)
    obj.params = {"n": n, "coef": coef.ravel().tolist()}
    return obj


class _Huber(ObjectiveSet):
    def __init__(self, family, params, anchors, optimum=None):
        anchors = np.asarray(anchors, dtype=float)
        super().__init__(family, params, anchors.size, 1, L=1.0, G=1.0, optimum=optimum)
        self.anchors = anchors

    def _value(self, P, idx):
        r = np.abs(P[:, 0] - self.anchors[idx])
        return np.where(r <= 1.0, 0.5 * r * r, r - 0.5)

    def _grad(self, P, idx):
        return np.clip(P[:, 0] - self.anchors[idx], -1.0, 1.0)[:, None]

    def _knot_distance(self, P, idx):
        return np.abs(np.abs(P[:, 0] - self.anchors[idx]) - 1.0)


def make_huber_two_group(theta, seed):
    """Twenty Huber losses split into a group of 6 near ``theta`` and 14 near ``-theta``.

    Anchors are ``+-theta + nu_i`` with ``nu_i`` uniform on
    ``[-0.1 theta, 0.1 theta]``.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    rng = np.random.default_rng(seed)
    nu = rng.uniform(-0.1 * theta, 0.1 * theta, size=20)
    centers = np.r_[np.full(6, theta), np.full(14, -theta)]
    return _Huber("huber_two_group", {"theta": float(theta), "seed": seed}, centers + nu)


def make_huber_pair():
    """Huber losses anchored at ``+1`` and ``-1``; minimized at 0 with value 1."""
    return _Huber("huber_pair", {}, [1.0, -1.0],
                  optimum=(np.zeros(1), 1.0, "closed-form"))


def _hn_parts(P, idx, theta):
    s = np.where(idx == 0, -1.0, 1.0)
    u = P[:, 0] + s
    v = P[:, 1] + s
    return u, v, theta * u * u + v * v


def hard_nonsmooth_value(P, idx, theta):
    """Paired values of the two-region instance; `theta` may be per row."""
    _, _, q = _hn_parts(P, idx, theta)
    outer = CHI_BAR * (np.sqrt(q) - CHI_BAR / 2)
    return np.where(q <= CHI_BAR ** 2, 0.5 * q, outer)


def hard_nonsmooth_grad(P, idx, theta):
    u, v, q = _hn_parts(P, idx, theta)
    scale = np.where(q <= CHI_BAR ** 2, 1.0, CHI_BAR / np.sqrt(np.maximum(q, CHI_BAR ** 2)))
    return np.column_stack([theta * u, v]) * scale[:, None]


def hard_nonsmooth_region(P, idx, theta):
    """True where the pair lies in the quadratic region ``q <= chi^2``."""
    return _hn_parts(P, idx, theta)[2] <= CHI_BAR ** 2


class _HardNonsmooth(ObjectiveSet):
    """Two functions that are quadratic on an ellipse and grow linearly outside."""

    def __init__(self, theta):
        super().__init__("hard_nonsmooth", {"theta": float(theta)}, 2, 2,
                         L=math.sqrt(2.0), G=10.0,
                         optimum=(np.zeros(2), theta + 1.0, "closed-form"))
        self.theta = float(theta)

    def _value(self, P, idx):
        return hard_nonsmooth_value(P, idx, self.theta)

    def _grad(self, P, idx):
        return hard_nonsmooth_grad(P, idx, self.theta)

    def _knot_distance(self, P, idx):
        return np.abs(np.sqrt(_hn_parts(P, idx, self.theta)[2]) - CHI_BAR)

    def in_quadratic_region(self, X):
        """Whether each node's state lies where its function is quadratic."""
        return hard_nonsmooth_region(self._stack(X), np.arange(2), self.theta)


def make_hard_nonsmooth_pair(theta):
    """Two-node, two-dimensional instance on which the baseline is slow.

    Node 1 is minimized at ``(1, 1)`` and node 2 at ``(-1, -1)``; the first
    coordinate is weighted by `theta`. The sum is minimized at the origin
    with value ``theta + 1``.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]; the constants L=sqrt(2), G=10 hold only there")
    return _HardNonsmooth(theta)


class _Quadratic(ObjectiveSet):
    def __init__(self, family, params, anchors, optimum=None):
        anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
        n, d = anchors.shape
        if optimum is None:
            xs = anchors.mean(axis=0)
            optimum = (xs, float(0.5 * np.sum((anchors - xs) ** 2)), "closed-form")
        super().__init__(family, params, n, d, L=1.0, G=None, optimum=optimum)
        self.anchors = anchors

    def _value(self, P, idx):
        r = P - self.anchors[idx]
        return 0.5 * np.einsum("md,md->m", r, r)

    def _grad(self, P, idx):
        return P - self.anchors[idx]

    def gap_many(self, P):
        # f(p) - f(mean) = (n/2)||p - mean||^2 exactly; differencing two large
        # values loses everything once the anchors are far apart
        if self._optimum is None or self._optimum[2] != "closed-form":
            return super().gap_many(P)
        P = np.atleast_2d(np.asarray(P, dtype=float))
        r = P - self.anchors.mean(axis=0)
        return 0.5 * self.n * np.einsum("md,md->m", r, r)


def make_hard_quadratic_pair(theta):
    """Parabolas ``0.5 (x -+ theta)^2`` on two nodes; gradients are unbounded."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    return _Quadratic("hard_quadratic", {"theta": float(theta)}, [[theta], [-theta]],
                      optimum=(np.zeros(1), float(theta) ** 2, "closed-form"))


def make_quadratic(anchors):
    """``f_i(x) = 0.5 ||x - a_i||^2`` for each row ``a_i`` of `anchors`."""
    anchors = np.asarray(anchors, dtype=float)
    if anchors.ndim == 1:
        anchors = anchors[:, None]
    return _Quadratic("quadratic", {"anchors": anchors.ravel().tolist(), "d": anchors.shape[1]},
                      anchors)


class _Cubic(ObjectiveSet):
    def __init__(self):
        super().__init__("cubic_pair", {}, 2, 1, L=None, G=None)

    @staticmethod
    def _sign(idx):
        return np.where(idx == 0, 1.0, -1.0)

    def _value(self, P, idx):
        z = self._sign(idx) * P[:, 0]
        return np.where(z >= 1.0, 4 * z ** 3 + 1.5 * z ** 2, 7.5 * z ** 2 - 2.0)

    def _grad(self, P, idx):
        s = self._sign(idx)
        z = s * P[:, 0]
        return (s * np.where(z >= 1.0, 12 * z ** 2 + 3 * z, 15 * z))[:, None]

    def _knot_distance(self, P, idx):
        return np.abs(self._sign(idx) * P[:, 0] - 1.0)


def make_cubic_pair():
    """Pair with cubic growth past a knot at 1 (node 1) and at -1 (node 2).

    Neither the gradient nor its Lipschitz constant is bounded; the set is
    meant for divergence demonstrations.
    """
    return _Cubic()


class _Fair(ObjectiveSet):
    def __init__(self, b0, anchors):
        anchors = np.asarray(anchors, dtype=float)
        super().__init__("fair", {"b0": float(b0), "anchors": anchors.tolist()},
                         anchors.size, 1, L=1.0, G=float(b0))
        self.b0 = float(b0)
        self.anchors = anchors

    def _value(self, P, idx):
        r = np.abs(P[:, 0] - self.anchors[idx]) / self.b0
        return self.b0 ** 2 * (r - np.log1p(r))

    def _grad(self, P, idx):
        u = P[:, 0] - self.anchors[idx]
        return (self.b0 * u / (self.b0 + np.abs(u)))[:, None]


def make_fair_loss(n, b0, anchors):
    """Fair robust loss ``b0^2 (|u|/b0 - log(1 + |u|/b0))`` with ``u = x - anchor_i``."""
    anchors = np.asarray(anchors, dtype=float).ravel()
    if b0 <= 0:
        raise ValueError("b0 must be positive")
    if anchors.size != n:
        raise ValueError(f"need {n} anchors, got {anchors.size}")
    return _Fair(b0, anchors)


FACTORIES = {
    "logistic": lambda p: make_logistic(int(p["n"]), p["seed"]),
    "huber_two_group": lambda p: make_huber_two_group(float(p["theta"]), p["seed"]),
    "huber_pair": lambda p: make_huber_pair(),
    "hard_nonsmooth": lambda p: make_hard_nonsmooth_pair(float(p["theta"])),
    "hard_quadratic": lambda p: make_hard_quadratic_pair(float(p["theta"])),
    "cubic_pair": lambda p: make_cubic_pair(),
    "fair": lambda p: make_fair_loss(len(p["anchors"]), float(p["b0"]), p["anchors"]),
    "quadratic": lambda p: make_quadratic(np.reshape(p["anchors"], (-1, int(p["d"])))),
}


def from_params(family, params):
    """Rebuild an objective set from its family name and generating parameters."""
    try:
        return FACTORIES[family](params)
    except KeyError as exc:
        raise ValueError(f"unknown objective family {family!r}") from exc


# ---------------------------------------------------------------------------
# reference optimum
# ---------------------------------------------------------------------------

def reference_optimum(obj, tol=1e-10, max_iter=1_000_000, x0=None):
    """Minimize ``f = sum_i f_i`` to gradient norm `tol`.

    Runs the exact-gradient accelerated recursion with constant step
    ``1/(nL)`` and momentum ``k/(k+3)``, restarting the momentum counter
    whenever the gradient makes an acute angle with the last step. Sets with
    a closed-form optimum are returned unchanged. One-dimensional sets
    without a finite ``L`` fall back to bounded scalar minimization over the
    certificate box.

    Raises
    ------
    NonConvergenceError
        If the tolerance is not reached within `max_iter` gradient steps.
    """
    if obj._optimum is not None and obj._optimum[2] == "closed-form":
        x, fx, _ = obj._optimum
        return x, fx
    if hasattr(obj, "has_minimizer") and not obj.has_minimizer():
        raise NonConvergenceError("the labelled samples are separable; no minimizer exists")
    if obj.L is None:
        if obj.d != 1:
            raise NonConvergenceError("no step size available: L is absent and d > 1")
        res = minimize_scalar(lambda t: obj.f(np.array([t])), bounds=(-obj.box, obj.box),
                              method="bounded", options={"xatol": 1e-12, "maxiter": 10_000})
        x = np.array([res.x])
        return x, obj.f(x)

    step = 1.0 / (obj.n * obj.L)
    x_prev = np.zeros(obj.d) if x0 is None else np.array(x0, dtype=float)
    y = x_prev.copy()
    j = 0
    for _ in range(max_iter):
        g = obj.grad_f(y)
        if np.linalg.norm(g) <= tol:
            return y, obj.f(y)
        x = y - step * g
        if g @ (x - x_prev) > 0:
            j = 0
        y = x + (j / (j + 3)) * (x - x_prev)
        x_prev = x
        j += 1
    raise NonConvergenceError(
        f"gradient norm {np.linalg.norm(obj.grad_f(y)):.3e} above {tol:.1e} after {max_iter} steps"
    )


# ---------------------------------------------------------------------------
# sampled checks
# ---------------------------------------------------------------------------

def gradient_check(obj, points=100, h=1e-6, knot_gap=1e-4, box=None, seed=0):
    """Worst centered finite-difference error over random (point, node) pairs.

    The error of a pair is ``||g_fd - g|| / max(1, ||g||)``. Pairs closer
    than `knot_gap` to a nonsmooth point are redrawn.
    """
    rng = np.random.default_rng(seed)
    box = obj.box if box is None else box
    P = np.empty((0, obj.d))
    idx = np.empty(0, dtype=int)
    while P.shape[0] < points:
        cand = rng.uniform(-box, box, size=(points, obj.d))
        cidx = rng.integers(0, obj.n, size=points)
        keep = obj._knot_distance(cand, cidx) > knot_gap
        P = np.vstack([P, cand[keep]])
        idx = np.r_[idx, cidx[keep]]
    P, idx = P[:points], idx[:points]
    g = obj._grad(P, idx)
    fd = np.empty_like(g)
    for l in range(obj.d):
        e = np.zeros(obj.d)
        e[l] = h
        fd[:, l] = (obj._value(P + e, idx) - obj._value(P - e, idx)) / (2 * h)
    err = np.linalg.norm(fd - g, axis=1) / np.maximum(1.0, np.linalg.norm(g, axis=1))
    return float(np.max(err))


def certify(obj, samples=1000, box=None, seed=0, scope=None):
    """Sampled ratios backing the declared constants.

    Returns a dict with the worst observed gradient Lipschitz ratio
    (``lip``) and gradient norm (``grad``) over `samples` random draws,
    alongside the declared ``L`` and ``G``. A certificate holds when the
    observed value does not exceed the declared one.

    `scope` is ``"node"`` (ratios of each ``grad f_i``) or ``"mean"``
    (ratio of ``grad f / n``). The default is ``"mean"`` for logistic sets,
    whose declared ``L`` is the curvature bound of the averaged loss, and
    ``"node"`` otherwise. ``grad`` is always per node.
    """
    if scope is None:
        scope = "mean" if obj.family == "logistic" else "node"
    if scope not in ("node", "mean"):
        raise ValueError("scope must be 'node' or 'mean'")
    rng = np.random.default_rng(seed)
    box = obj.box if box is None else box
    x = rng.uniform(-box, box, size=(samples, obj.d))
    y = rng.uniform(-box, box, size=(samples, obj.d))
    idx = rng.integers(0, obj.n, size=samples)
    gx, gy = obj._grad(x, idx), obj._grad(y, idx)
    if scope == "node":
        diff = gx - gy
    else:
        diff = np.array([obj.grad_f(a) - obj.grad_f(b) for a, b in zip(x, y)]) / obj.n
    lip = np.linalg.norm(diff, axis=1) / np.linalg.norm(x - y, axis=1)
    return {
        "lip": float(np.max(lip)),
        "grad": float(np.max(np.linalg.norm(gx, axis=1))),
        "L": obj.L,
        "G": obj.G,
        "scope": scope,
    }
