import json
import math

import numpy as np
import pytest

import sglab


def two_node():
    return np.array([[0.0, 1.0], [1.0, 0.0]])


def ring_graph(n):
    edges = [(u, (u + 1) % n) for u in range(n)] + [(u, u) for u in range(n)]
    return sglab.Graph(n, edges)


def test_attention_rows_are_stochastic():
    rng = np.random.default_rng(0)
    g = ring_graph(8)
    a = sglab.attention_matrix(g, rng.normal(size=(8, 3)), kernel="scaled_dot:2")
    assert a.shape == (8, 8)
    np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-12)
    assert (a >= 0).all()


def test_two_node_closed_form():
    f = np.array([[1.0], [0.0]])
    t = 0.7
    expected = 0.5 + 0.5 * math.exp(-2 * t)
    # Fixed-step RK4 carries its truncation error at the default step.
    for method, tol in (("rk4", 1e-6), ("adaptive", 1e-8), ("expm", 1e-12)):
        (h,) = sglab.solve(two_node(), f, [t], method=method)
        assert h[0, 0] == pytest.approx(expected, abs=tol)
        assert h[1, 0] == pytest.approx(1 - expected, abs=tol)
    np.testing.assert_allclose(sglab.propagator(two_node(), t) @ f, h, atol=1e-12)


def test_spectral_report_gap():
    report = sglab.spectral_report(two_node())
    assert report["spectral_gap"] == pytest.approx(2.0)
    assert report["is_ergodic"]
    np.testing.assert_allclose(sglab.invariant_measure(two_node()), [0.5, 0.5])


def test_breaking_term_prevents_collapse():
    a = sglab.attention_matrix(ring_graph(6), np.zeros((6, 1)), kernel="zero")
    c = sglab.breaking_term(a, kind="diagonal", diagonal=np.array([-0.2, 0.3, -0.1, 0.25, -0.15, 0.1]))
    assert not sglab.spectral_report(a, breaking=c)["is_ergodic"]


def test_feynman_kac_matches_propagator():
    rng = np.random.default_rng(1)
    a = sglab.attention_matrix(ring_graph(5), rng.normal(size=(5, 2)))
    f = rng.normal(size=(5, 2))
    killing = -rng.uniform(size=5)
    mean, se = sglab.feynman_kac(a, f, start=2, t=1.0, n_samples=20000, seed=3, killing=killing)
    exact = (sglab.propagator(a, 1.0, killing=killing) @ f)[2]
    assert np.all(np.abs(mean - exact) <= 5 * se)


def test_bad_killing_rate_is_rejected():
    with pytest.raises(ValueError):
        sglab.propagator(two_node(), 1.0, killing=np.array([0.1, 0.0]))


def test_run_diffuse(tmp_path):
    config = {
        "graph": {"generate": {"n": 12, "k": 2, "p_in": 0.6, "p_out": 0.1, "seed": 4}},
        "features": {"random": {"dim": 2, "seed": 5}},
        "attention": "dot",
        "t_end": 5.0,
        "points": 6,
    }
    summary = sglab.run("diffuse", config, tmp_path)
    assert summary["is_ergodic"]
    assert (tmp_path / "solution.csv").exists()
    assert json.loads((tmp_path / "summary.json").read_text())["final_time"] == pytest.approx(5.0)
