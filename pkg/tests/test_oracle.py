import numpy as np
import pytest

from dnlab import net, objectives as ob, oracle, solvers as sv


def test_consensus_point_is_exact():
    obj = ob.make_logistic(10, 2)
    v = np.array([0.3, -1.0, 2.0])
    s = oracle.inexact_oracle_at(obj, np.tile(v, (10, 1)))
    assert s.f_hat == pytest.approx(obj.f(v), rel=1e-14)
    np.testing.assert_allclose(s.g_hat, obj.grad_f(v), atol=1e-14)
    assert s.delta_k <= 1e-28        # averaging equal rows can round in the last bit
    lower, upper = oracle.check_definition1(s, obj, 200, 5.0)
    assert lower <= 1e-12 and upper <= 1e-12


def test_separated_quadratic_pair_hand_values():
    obj = ob.make_hard_quadratic_pair(1.0)
    s = oracle.inexact_oracle_at(obj, np.array([[1.0], [-1.0]]))
    assert s.f_hat == 0 and s.g_hat[0] == 0 and s.delta_k == 2
    lower, upper = oracle.definition1_violations(s, obj, np.array([[0.0]]))
    # lower slack f(0) - 0 = 1, upper slack (0 + L_y/2*0 + 2) - 1 = 1
    assert lower[0] == -1.0 and upper[0] == -1.0


def test_single_node_has_no_inexactness():
    obj = ob.make_logistic(1, 4)
    y = np.array([[0.5, 0.1, -0.2]])
    s = oracle.inexact_oracle_at(obj, y)
    assert s.delta_k == 0 and s.f_hat == pytest.approx(obj.f(y[0]))


def test_random_logistic_states():
    obj = ob.make_logistic(10, 2)
    rng = np.random.default_rng(0)
    for j in range(5):
        s = oracle.inexact_oracle_at(obj, rng.normal(size=(10, 3)) * 2)
        assert max(oracle.check_definition1(s, obj, 500, 5.0, seed=j)) <= 1e-9


def test_oracle_needs_finite_L():
    with pytest.raises(ValueError):
        oracle.inexact_oracle_at(ob.make_cubic_pair(), np.zeros((2, 1)))


def test_vbar_examples():
    v = np.array([1.0, 2.0])
    np.testing.assert_array_equal(oracle.vbar(v, v, 0), v)
    x, y = np.array([1.0]), np.array([3.0])
    np.testing.assert_allclose(oracle.vbar(x, y, 2), 2 * y - x)


def test_delta_matches_trace_disagreement():
    obj = ob.make_logistic(10, 2)
    W = net.metropolis_weights(net.generate_geometric(10, 0.4, 1))
    tr = sv.run_dng(obj, sv.DngConfig(1.0, 50, W), np.zeros(3))
    for k in range(0, 51, 7):
        s = oracle.inexact_oracle_at(obj, tr.y[k])
        assert s.delta_k == pytest.approx(obj.L * tr.dis_y[k] ** 2, rel=1e-12, abs=1e-300)


def test_progress_single_node_quadratic():
    obj = ob.make_quadratic([[1.5]])
    tr = sv.run_dng(obj, sv.DngConfig(0.5, 1000, net.custom_weights(1, [[1.0]])), [0.0])
    rep = oracle.check_lemma2_progress(tr, obj)
    assert rep.regime_ok.all()
    assert np.all(rep.residual >= -1e-12)


def test_progress_large_step_regime_flags():
    s = ob.solvable_logistic_seeds(10, 1, start=3)[0]
    obj = ob.make_logistic(10, s)
    W = net.metropolis_weights(net.generate_geometric(10, 0.4, 3))
    tr = sv.run_dng(obj, sv.DngConfig(2 / obj.L, 200, W), np.zeros(3))
    rep = oracle.check_lemma2_progress(tr, obj)
    assert not rep.regime_ok[rep.k < 4].any()
    assert rep.regime_ok[rep.k >= 4].all()
    assert len(rep.violations) == 0


def test_progress_report_csv(tmp_path):
    obj = ob.make_quadratic([[1.5], [0.5]])
    tr = sv.run_dng(obj, sv.DngConfig(0.25, 30, net.two_node_weights(0.25)), [0.0])
    rep = oracle.check_lemma2_progress(tr, obj)
    rep.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "k,residual,regime_ok" and len(lines) == 31
    assert "violations" in rep.summary()
