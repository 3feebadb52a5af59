"""
Command-line experiment runner.

Every command reads an optional config file, applies command-line
overrides, runs deterministically and writes CSV files plus ``summary.txt``
into the output directory. Each CSV is checked against its schema before
the command returns.

Config files are flat ``key = value`` lines; per-method parameters go in
``[method.<name>]`` sections::

    experiment = custom
    seed = 3
    objective = logistic
    n = 10
    density = 0.4
    k_max = 500

    [method.dng]
    c = 1
    eta = 0.1

    [method.dnc]
    alpha = 0.5/L

A step value may be written ``<number>/L`` to divide by the objective's
gradient Lipschitz constant.

Exit status: 0 on success, 1 for a configuration error, 2 when a
verification check or an output schema check fails.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from . import bounds, experiments, net, objectives, oracle, schema, solvers, verify

EXPERIMENTS = ("fig1_left", "fig1_right", "hard_nedic", "hard_unbounded", "diverge_1b",
               "diverge_cubic", "verify", "custom")


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


def _floats(v):
    return [float(t) for t in v.replace(",", " ").split()]


def _bool(v):
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


TOP_KEYS = {
    "experiment": str, "seed": int, "n": int, "density": float, "k_max": int, "eta": float,
    "targets": _floats, "objective": str, "theta": float, "thetas": _floats, "b0": float,
    "anchors": _floats, "network": str, "x0": _floats, "out": str, "long": _bool,
    "taus": _floats, "k": int, "M": float, "which": str,
}

# per-method keys and which of them are required
METHOD_KEYS = {
    "dng": ({"c", "eta"}, {"c"}),
    "dnc": ({"alpha"}, {"alpha"}),
    "dsg": ({"c", "tau"}, {"c", "tau"}),
    "centralized": ({"c"}, {"c"}),
}


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def parse_config(text):
    """Parse config text into ``(top, methods)`` dictionaries of typed values."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    top, methods = {}, {}
    for key, raw in cp["experiment"].items():
        if key not in TOP_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        top[key] = _convert(key, raw, TOP_KEYS[key])
    for sec in cp.sections():
        if sec == "experiment":
            continue
        if not sec.startswith("method."):
            raise ConfigError(f"unknown config section [{sec}]; expected [method.<name>]")
        name = sec[len("method."):]
        if name not in METHOD_KEYS:
            raise ConfigError(f"unknown method {name!r} in [{sec}]; choose from {sorted(METHOD_KEYS)}")
        allowed, _ = METHOD_KEYS[name]
        params = {}
        for key, raw in cp[sec].items():
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} for method {name!r}")
            params[key] = raw.strip()
        methods[name] = params
    return top, methods


def _convert(key, raw, conv):
    try:
        return conv(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None


def _step(name, key, raw, L):
    """Numeric step value, allowing ``<number>/L``."""
    s = raw.replace(" ", "")
    try:
        if s.endswith("/L"):
            if L is None:
                raise ConfigError(f"{name}.{key} = {raw} needs a finite L for this objective")
            return float(s[:-2] or 1) / L
        return float(s)
    except ValueError:
        raise ConfigError(f"bad value for {name}.{key}: {raw!r}") from None


def load_config(path=None, overrides=None):
    top, methods = ({}, {})
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        top, methods = parse_config(text)
    for key, val in (overrides or {}).items():
        if val is not None:
            top[key] = val
    exp = top.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"missing or unknown 'experiment' {exp!r}; choose from {list(EXPERIMENTS)}")
    if exp != "verify" and "seed" not in top:
        raise ConfigError("missing required key 'seed'")
    if "seed" in top and not 0 <= top["seed"] < 2 ** 64:
        raise ConfigError("'seed' must be an unsigned 64-bit integer")
    for name, params in methods.items():
        missing = METHOD_KEYS[name][1] - set(params)
        if missing:
            raise ConfigError(f"method {name!r} is missing {sorted(missing)}")
    return top, methods


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

class Output:
    """Collects emitted files and summary lines for one command."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.lines = []

    def path(self, name, kind):
        p = self.dir / name
        self.files.append((p, kind))
        return p

    def rows(self, name, kind, header, rows):
        with open(self.path(name, kind), "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(_cell(v) for v in r) + "\n")

    def say(self, line=""):
        self.lines.append(line)

    def first_hits(self, label, hits):
        for eps, hit in hits.items():
            if hit is None:
                self.say(f"{label} eps={eps:.0e} not reached")
            else:
                k, per, tot = hit
                self.say(f"{label} eps={eps:.0e} k={k} comms_per_node={per} total_comms={tot}")

    def finish(self):
        for p, kind in self.files:
            schema.validate_csv(p, kind)
        (self.dir / "summary.txt").write_text("\n".join(self.lines) + "\n")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _write_trace(out, name, trace, obj):
    trace.to_csv(out.path(f"{name}.csv", "trace"), obj)


def _write_bounds(out, name, trace, obj, mu, eta):
    if obj.G is None or obj.L is None or not 0 <= mu < 1:
        return
    if trace.method == "dng" and (eta is None or not 0 < eta <= 1):
        return
    bounds.bounds_for_trace(trace, obj, mu, eta).to_csv(out.path(f"{name}_bounds.csv", "bounds"))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _targets(top):
    return tuple(top.get("targets", solvers.EPS_TARGETS))


def exp_fig1_left(top, methods, out):
    long = top.get("long", False)
    n = top.get("n", experiments.FULL_N if long else experiments.FAST_N)
    density = top.get("density", experiments.FULL_DENSITY if n >= experiments.FULL_N
                      else experiments.FAST_DENSITY)
    k_max = top.get("k_max", 20000 if long else 5000)
    eta = top.get("eta", 0.1)
    cmp = experiments.fig1_left(top["seed"], n, k_max, density, eta)
    obj = cmp.obj
    out.say(f"experiment fig1_left seed={top['seed']} n={n} density={density} k_max={k_max}")
    out.say(f"objective {obj.describe()} L={obj.L:.17g} G={obj.G:.17g}")
    out.say(f"mu(W)={cmp.mu['W']:.17g} mu(W_safe)={cmp.mu['W_safe']:.17g}")
    for label, tr in cmp.traces.items():
        _write_trace(out, label, tr, obj)
        if label == "dng":
            _write_bounds(out, label, tr, obj, cmp.mu["W_safe"], eta)
        elif label.startswith("dnc"):
            _write_bounds(out, label, tr, obj, cmp.mu["W"], None)
    for label, hits in cmp.first_hits(_targets(top)).items():
        out.first_hits(label, hits)


def exp_fig1_right(top, methods, out):
    thetas = top.get("thetas", (0.01, 10.0, 1000.0))
    k_max = top.get("k_max", 100_000)
    res = experiments.fig1_right(top["seed"], tuple(thetas), k_max, top.get("density", 0.32))
    out.say(f"experiment fig1_right seed={top['seed']} k_max={k_max}")
    for th, cmp in res.items():
        for label, tr in cmp.traces.items():
            _write_trace(out, f"{label}_theta{th:g}", tr, cmp.obj)
        for label, hits in cmp.first_hits(_targets(top)).items():
            out.first_hits(f"{label}_theta{th:g}", hits)


def exp_hard_nedic(top, methods, out):
    long = top.get("long", False)
    k_max = top.get("k_max", 10_000 if long else 1000)
    taus = top.get("taus", (0.0, 1 / 3, 0.5, 0.75, 1.0))
    out.say(f"experiment hard_nedic k_max={k_max}")
    reps = [experiments.nedic_hard(t, k_max) for t in taus]
    rows = ((r.tau, k, r.theta[j], r.max_gap[j], r.envelope[j], r.in_region[j])
            for r in reps for j, k in enumerate(r.k))
    out.rows("nedic.csv", "nedic", schema.SCHEMAS["nedic"], rows)
    for r in reps:
        slope = r.slope(min(100, k_max // 10), k_max) if k_max >= 20 else float("nan")
        out.say(f"tau={r.tau:.4f} envelope_ok={int(r.envelope_ok)} "
                f"in_region={int(r.in_region.all())} slope={slope:.4f}")


def exp_hard_unbounded(top, methods, out):
    which = top.get("which", "both")
    if which not in ("dnc", "dng", "both"):
        raise ConfigError(f"'which' must be dnc, dng or both, not {which!r}")
    if which in ("dnc", "both"):
        pairs = [(top["k"], top.get("M", 1.0))] if "k" in top else [(10, 1.0), (20, 4.0)]
        rows = []
        for k, M in pairs:
            gap, tr, obj = experiments.unbounded_dnc(k, M)
            rows.append((k, M, obj.params["theta"], gap, gap >= M))
            out.say(f"unbounded_dnc k={k} M={M:g} max_gap={gap:.6g} reached_M={int(gap >= M)}")
        out.rows("unbounded_dnc.csv", "unbounded_dnc", schema.SCHEMAS["unbounded_dnc"], rows)
    if which in ("dng", "both"):
        k, M = top.get("k", 100), top.get("M", 1.0)
        tr, obj, lb = experiments.unbounded_dng(k, M, top.get("k_max"))
        mg = tr.max_gap(obj)
        ks = np.arange(tr.k_max + 1)
        out.rows("unbounded_dng.csv", "unbounded_dng", schema.SCHEMAS["unbounded_dng"],
                 zip(ks, tr.dis_x, lb, mg))
        m = ks >= 5
        ratio = float(np.min(tr.dis_x[m] / lb[m])) if m.any() else float("nan")
        out.say(f"unbounded_dng k={k} M={M:g} min_disagreement_over_lower_bound(k>=5)={ratio:.6g} "
                f"max_gap_at_k={mg[min(k, tr.k_max)]:.6g}")


def exp_diverge_1b(top, methods, out):
    k_max = top.get("k_max", 200)
    tr, obj = experiments.diverge_assumption_1b(k_max)
    _write_trace(out, "dng", tr, obj)
    mins = tr.node_gaps(obj).min(axis=1)
    out.say(f"experiment diverge_1b k_max={k_max} diverged={int(tr.diverged)}")
    for k in sorted({min(20, tr.k_max), tr.k_max}):
        out.say(f"k={k} dis_x={tr.dis_x[k]:.6g} min_gap={mins[k]:.6g}")


def exp_diverge_cubic(top, methods, out):
    k_max = top.get("k_max", 1000)
    out.say(f"experiment diverge_cubic k_max={k_max}")
    for m in ("dng", "dnc"):
        tr, obj = experiments.diverge_cubic(m, k_max)
        _write_trace(out, m, tr, obj)
        mins = tr.node_gaps(obj).min(axis=1)
        out.say(f"{m} diverged={int(tr.diverged)} last_k={tr.k_max} "
                f"min_gap_initial={mins[0]:.6g} min_gap_last={mins[-1]:.6g}")


def _build_objective(top):
    fam = top.get("objective")
    if fam is None:
        raise ConfigError("custom experiment needs 'objective'")
    seed = top["seed"]
    try:
        if fam == "logistic":
            n = top.get("n")
            if n is None:
                raise ConfigError("objective 'logistic' needs 'n'")
            obj = objectives.make_logistic(n, seed)
            if not obj.has_minimizer():
                raise ConfigError(f"logistic data for seed {seed} is separable (no minimizer); "
                                  "choose another seed")
            return obj
        if fam == "huber_two_group":
            return objectives.make_huber_two_group(_need(top, "theta", fam), seed)
        if fam == "huber_pair":
            return objectives.make_huber_pair()
        if fam == "hard_nonsmooth":
            return objectives.make_hard_nonsmooth_pair(_need(top, "theta", fam))
        if fam == "hard_quadratic":
            return objectives.make_hard_quadratic_pair(_need(top, "theta", fam))
        if fam == "cubic_pair":
            return objectives.make_cubic_pair()
        if fam == "fair":
            anchors = _need(top, "anchors", fam)
            return objectives.make_fair_loss(len(anchors), _need(top, "b0", fam), anchors)
    except (ValueError, objectives.NonConvergenceError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot build objective {fam!r}: {exc}") from None
    raise ConfigError(f"unknown objective {fam!r}; choose from {sorted(objectives.FACTORIES)}")


def _need(top, key, fam):
    if key not in top:
        raise ConfigError(f"objective {fam!r} needs {key!r}")
    return top[key]


def _build_weights(top, n):
    if "network" in top:
        g, w = net.load_network(top["network"])
        if g.n != n:
            raise ConfigError(f"network has {g.n} nodes, objective has {n}")
        return w if w is not None else net.metropolis_weights(g)
    if n == 1:
        return net.custom_weights(1, [[1.0]])
    if "density" not in top:
        raise ConfigError("custom experiment needs 'density' or 'network' when n > 1")
    return net.metropolis_weights(net.generate_geometric(n, top["density"], top["seed"]))


def exp_custom(top, methods, out):
    if not methods:
        raise ConfigError("custom experiment needs at least one [method.<name>] section")
    if "k_max" not in top:
        raise ConfigError("missing required key 'k_max'")
    obj = _build_objective(top)
    if "n" in top and top["n"] != obj.n:
        raise ConfigError(f"'n' = {top['n']} but objective {obj.family!r} has {obj.n} nodes")
    try:
        W = _build_weights(top, obj.n)
    except net.InvariantError as exc:
        raise ConfigError(str(exc)) from None
    x0 = np.asarray(top.get("x0", np.zeros(obj.d)), dtype=float)
    if x0.size != obj.d:
        raise ConfigError(f"'x0' has {x0.size} entries, objective dimension is {obj.d}")
    K, seed = top["k_max"], top["seed"]
    sp = net.spectral(W)
    out.say(f"experiment custom seed={seed} k_max={K}")
    out.say(f"objective {obj.describe()} n={obj.n} d={obj.d} L={obj.L} G={obj.G}")
    out.say(f"mu(W)={sp.mu:.17g} lambda_min(W)={sp.lambda_min:.17g}")
    for name in sorted(methods):
        p = methods[name]
        if name == "dng":
            c = _step(name, "c", p["c"], obj.L)
            eta = None
            Wm = W
            if "eta" in p:
                eta = _step(name, "eta", p["eta"], obj.L)
                if not 0 < eta < 1:
                    raise ConfigError("dng.eta must lie in (0, 1)")
                Wm = net.safeguard_weights(W, eta)
            spm = net.spectral(Wm)
            if eta is None and spm.lambda_min > 0:
                eta = min(1.0, spm.lambda_min)
            tr = solvers.run_dng(obj, solvers.DngConfig(c, K, Wm), x0, seed)
            _write_trace(out, name, tr, obj)
            _write_bounds(out, name, tr, obj, spm.mu, eta)
            _write_progress(out, name, tr, obj)
        elif name == "dnc":
            a = _step(name, "alpha", p["alpha"], obj.L)
            tr = solvers.run_dnc(obj, solvers.DncConfig(a, K, W), x0, seed)
            _write_trace(out, name, tr, obj)
            _write_bounds(out, name, tr, obj, sp.mu, None)
            _write_progress(out, name, tr, obj)
        elif name == "dsg":
            cfg = solvers.DsgConfig(_step(name, "c", p["c"], obj.L),
                                    _step(name, "tau", p["tau"], obj.L), K, W)
            tr = solvers.run_dsg(obj, cfg, x0, seed)
            _write_trace(out, name, tr, obj)
        else:
            c = _step(name, "c", p["c"], obj.L)
            tr = solvers.run_centralized(obj, lambda k, c=c: c / (k + 1), K, x0)
            gaps = solvers.centralized_gaps(tr, obj)
            out.rows("centralized.csv", "centralized", ("k", "gap"), zip(range(tr.k_max + 1), gaps))
            rel = gaps / gaps[0] if gaps[0] > 0 else gaps
            for eps in _targets(top):
                hit = np.nonzero(rel <= eps)[0]
                out.say(f"centralized eps={eps:.0e} " + (f"k={int(hit[0])}" if hit.size else "not reached"))
            continue
        out.first_hits(name, solvers.metrics(tr, obj, _targets(top)))
        if tr.diverged:
            out.say(f"{name} diverged at k={tr.k_max}")


def _write_progress(out, name, trace, obj):
    if obj.L is None or trace.diverged:
        return
    rep = oracle.check_lemma2_progress(trace, obj)
    rep.to_csv(out.path(f"{name}_progress.csv", "progress"))
    out.say(f"{name} {rep.summary()}")


def exp_verify(top, methods, out=None):
    results = verify.run_suite()
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  detail"]
    lines += [f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail}" for r in results]
    print("\n".join(lines))
    if out is not None:
        out.lines.extend(lines)
    return all(r.passed for r in results)


RUNNERS = {
    "fig1_left": exp_fig1_left, "fig1_right": exp_fig1_right, "hard_nedic": exp_hard_nedic,
    "hard_unbounded": exp_hard_unbounded, "diverge_1b": exp_diverge_1b,
    "diverge_cubic": exp_diverge_cubic, "verify": exp_verify, "custom": exp_custom,
}


def execute(top, methods, out_dir=None):
    """Run one configured experiment; returns True unless a verification check failed."""
    exp = top["experiment"]
    out_dir = out_dir or top.get("out")
    if exp == "verify" and out_dir is None:
        return exp_verify(top, methods)
    out_dir = out_dir or f"out/{exp}"
    out = Output(out_dir)
    ok = RUNNERS[exp](top, methods, out)
    out.finish()
    return ok is not False


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="dnlab", description="Decentralized Nesterov gradient experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="config file (key = value, [method.X] sections)")
        p.add_argument("--seed", type=int, metavar="U64", help="random seed (overrides the config)")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--long", action="store_true", default=None,
                       help="full-size runs (n=100 logistic, k up to 1e4 on hard instances)")
        return p

    common(sub.add_parser("run", help="run the experiment named in --config"))
    common(sub.add_parser("fig1-left", help="logistic comparison of all methods"))
    common(sub.add_parser("fig1-right", help="Huber comparison for several scales"))
    p = common(sub.add_parser("hard", help="adversarial instances"))
    p.add_argument("--which", choices=("nedic", "unbounded_dnc", "unbounded_dng"), default="nedic")
    p = common(sub.add_parser("diverge", help="divergence demonstrations"))
    p.add_argument("--which", choices=("assumption_1b", "cubic"), default="assumption_1b")
    common(sub.add_parser("verify", help="run the self-verification suite"))
    return ap


_FIXED = {
    "fig1-left": "fig1_left", "fig1-right": "fig1_right", "verify": "verify",
    ("hard", "nedic"): "hard_nedic", ("hard", "unbounded_dnc"): "hard_unbounded",
    ("hard", "unbounded_dng"): "hard_unbounded",
    ("diverge", "assumption_1b"): "diverge_1b", ("diverge", "cubic"): "diverge_cubic",
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "long": args.long}
    key = (args.command, args.which) if hasattr(args, "which") else args.command
    if args.command != "run":
        overrides["experiment"] = _FIXED[key]
        if args.command == "hard" and args.which != "nedic":
            overrides["which"] = args.which.split("_")[1]
        if args.seed is None and args.config is None:
            overrides["seed"] = 0
    elif args.config is None:
        print("error: 'run' needs --config", file=sys.stderr)
        return 1
    try:
        top, methods = load_config(args.config, overrides)
        ok = execute(top, methods, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except schema.SchemaError as exc:
        print(f"schema check failed: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
