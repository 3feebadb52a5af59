import csv
import filecmp

import numpy as np
import pytest

from dnlab import bounds, cli, schema, solvers, verify

CUSTOM = """
experiment = custom
seed = 3
objective = logistic
n = 10
density = 0.4
k_max = 120

[method.dng]
c = 1
eta = 0.1

[method.dnc]
alpha = 0.5/L

[method.dsg]
c = 1
tau = 0.5
"""


def _write(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_parse_config_sections():
    top, methods = cli.parse_config(CUSTOM)
    assert top["experiment"] == "custom" and top["seed"] == 3 and top["density"] == 0.4
    assert methods["dnc"] == {"alpha": "0.5/L"}
    assert cli._step("dnc", "alpha", "0.5/L", 0.25) == 2.0


@pytest.mark.parametrize("text, needle", [
    ("experiment = custom\nseed = 1\nbogus = 2\n", "bogus"),
    ("experiment = custom\nseed = 1\n[method.adam]\nc = 1\n", "adam"),
    ("experiment = custom\nseed = 1\n[method.dng]\nstep = 1\n", "step"),
    ("experiment = custom\nseed = 1\n[method.dsg]\nc = 1\n", "tau"),
    ("experiment = custom\nseed = x\n", "seed"),
    ("experiment = nope\nseed = 1\n", "experiment"),
    ("experiment = custom\nk_max = 3\n", "seed"),
    ("experiment = custom\nseed = 1\n[other]\na = 1\n", "other"),
])
def test_invalid_config_names_offending_key(tmp_path, capsys, text, needle):
    assert cli.main(["run", "--config", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == 1
    assert needle in capsys.readouterr().err


def test_custom_run_writes_valid_files(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--config", _write(tmp_path, CUSTOM), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["dnc.csv", "dnc_bounds.csv", "dnc_progress.csv", "dng.csv", "dng_bounds.csv",
                     "dng_progress.csv", "dsg.csv", "summary.txt"]
    assert schema.validate_csv(out / "dng.csv", "trace") == 121
    summary = (out / "summary.txt").read_text()
    assert "dng eps=1e-01" in summary and "0 violations" in summary
    rows = _read(out / "dng_bounds.csv")
    assert list(rows[0]) == list(bounds.BOUND_COLUMNS)


def test_seed_flag_overrides_config(tmp_path):
    cfg = _write(tmp_path, CUSTOM)
    cli.main(["run", "--config", cfg, "--seed", "5", "--out", str(tmp_path / "o")])
    assert _read(tmp_path / "o" / "dng.csv")[0]["seed"] == "5"


def test_single_node_custom_matches_centralized(tmp_path):
    text = """
experiment = custom
seed = 0
objective = fair
anchors = 2.5
b0 = 1.5
k_max = 1000
[method.dng]
c = 0.5
[method.centralized]
c = 0.5
"""
    out = tmp_path / "o"
    assert cli.main(["run", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    a = np.array([float(r["max_gap"]) for r in _read(out / "dng.csv")])
    b = np.array([float(r["gap"]) for r in _read(out / "centralized.csv")])
    assert np.max(np.abs(a - b)) <= 1e-12


def test_fig1_left_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["fig1-left", "--seed", "7", "--out", str(tmp_path / d)]) == 0
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    assert len(cmp.same_files) == 8
    for name in ("dng", "dsg", "dnc_half", "dnc_full"):
        assert float(_read(tmp_path / "a" / f"{name}.csv")[0]["avg_rel_err"]) == 1.0


@pytest.mark.parametrize("args, files", [
    (["hard", "--which", "unbounded_dnc"], ["unbounded_dnc.csv"]),
    (["hard", "--which", "unbounded_dng"], ["unbounded_dng.csv"]),
    (["diverge", "--which", "assumption_1b"], ["dng.csv"]),
    (["diverge", "--which", "cubic"], ["dng.csv", "dnc.csv"]),
])
def test_demo_commands(tmp_path, args, files):
    out = tmp_path / "o"
    assert cli.main(args + ["--out", str(out)]) == 0
    for f in files:
        assert (out / f).exists()
    assert (out / "summary.txt").read_text()


def test_unbounded_dnc_reaches_target(tmp_path):
    cli.main(["hard", "--which", "unbounded_dnc", "--out", str(tmp_path)])
    rows = _read(tmp_path / "unbounded_dnc.csv")
    assert [r["reached_M"] for r in rows] == ["1", "1"]


def test_hard_nedic_short_run(tmp_path):
    text = "experiment = hard_nedic\nseed = 0\nk_max = 200\ntaus = 0 0.5\n"
    assert cli.main(["run", "--config", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == 0
    summary = (tmp_path / "o" / "summary.txt").read_text()
    assert summary.count("envelope_ok=1 in_region=1") == 2


def test_divergence_is_reported_in_band(tmp_path):
    cli.main(["diverge", "--which", "cubic", "--out", str(tmp_path)])
    rows = _read(tmp_path / "dng.csv")
    assert rows[-1]["diverged"] == "1" and all(r["diverged"] == "0" for r in rows[:-1])


def test_schema_validator_catches_bad_files(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(",".join(solvers.TRACE_COLUMNS) + "\ndng,1,0,0,0,1,1,0,0,2\n")
    with pytest.raises(schema.SchemaError, match="diverged"):
        schema.validate_csv(p, "trace")
    p.write_text("k,gap\n1\n")
    with pytest.raises(schema.SchemaError, match="fields"):
        schema.validate_csv(p, "centralized")
    p.write_text("k,residual\n")
    with pytest.raises(schema.SchemaError, match="header"):
        schema.validate_csv(p, "progress")


def test_verify_passes_on_clean_code(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == len(verify.SUITE)


def test_verify_catches_halved_consensus_constant(monkeypatch):
    real = bounds.c_cons
    monkeypatch.setattr(bounds, "c_cons", lambda mu, eta: 0.5 * real(mu, eta))
    res = verify.check_dng_consensus(count=3, k_max=100)
    assert not res.passed


def test_verify_catches_wrong_momentum(monkeypatch):
    monkeypatch.setattr(solvers, "beta", lambda k: 0.0 if k < 0 else k / (k + 2))
    res = verify.check_single_node()
    assert not res.passed


def test_verify_exit_status_on_failure(monkeypatch, capsys):
    monkeypatch.setattr(solvers, "beta", lambda k: 0.0 if k < 0 else k / (k + 2))
    monkeypatch.setattr(verify, "SUITE", (verify.check_single_node,))
    monkeypatch.setattr(verify.run_suite, "__defaults__", ((verify.check_single_node,),))
    assert cli.main(["verify"]) == 2
    assert "FAIL" in capsys.readouterr().out
