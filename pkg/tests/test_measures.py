import json
import math

import numpy as np
import pytest
from scipy import integrate, stats

from polarlab import (
    Ball,
    Configuration,
    QuadratureMeasure,
    Riesz,
    ShiftedLog,
    assumption_check,
    bl_distance,
    counting_measure,
    energy,
    equilibrium_measure,
    potential,
    sample,
)
from polarlab.measures import EquilibriumConvergenceError, project_simplex, solve_simplex_qp

from conftest import CIRCLE_W_HALF, equally_spaced


def test_counting_measure_examples():
    mu = counting_measure(Configuration([[1, 0], [-1, 0]]))
    np.testing.assert_array_equal(mu.weights, [0.5, 0.5])
    mu = counting_measure(Configuration([[0, 1], [0, 1]]))
    assert mu.n_nodes == 2
    np.testing.assert_array_equal(mu.weights, [0.5, 0.5])
    mu = counting_measure(Configuration(np.random.default_rng(0).normal(size=(5, 2))))
    np.testing.assert_allclose(mu.weights, 0.2)
    with pytest.raises(ValueError):
        counting_measure(Configuration(np.empty((0, 2))))


def test_quadrature_measure_validation():
    with pytest.raises(ValueError):
        QuadratureMeasure(np.zeros((2, 1)), np.array([0.5, 0.6]), "numerical")
    with pytest.raises(ValueError):
        QuadratureMeasure(np.zeros((2, 1)), np.array([1.5, -0.5]), "numerical")
    with pytest.raises(ValueError):
        QuadratureMeasure(np.zeros((2, 1)), np.array([0.25, 0.75]), "counting")


def test_potential_antipodal():
    mu = counting_measure(Configuration([[1, 0], [-1, 0]]))
    assert potential(mu, Riesz(1), np.array([[0.0, 1.0]]))[0] == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert potential(mu, Riesz(1), np.array([[1.0, 0.0]]))[0] == math.inf


def test_potential_uniform_circle_matches_oracle(circle_em):
    # oracle: adaptive quadrature of the rotation-invariant potential
    val, _ = integrate.quad(lambda t: (2 * math.sin(t / 2)) ** -0.5, 0, math.pi, limit=200)
    oracle = val / math.pi
    assert oracle == pytest.approx(CIRCLE_W_HALF, abs=1e-10)
    x = equally_spaced(37, phase=0.123)
    U = potential(circle_em.base, Riesz(0.5), x)
    assert np.max(np.abs(U - oracle)) < 1e-4
    # a node itself
    U0 = potential(circle_em.base, Riesz(0.5), circle_em.base.nodes[:1])
    assert abs(U0[0] - oracle) < 1e-4


def test_energy_examples(interval_log_em, sphere_em):
    mu = counting_measure(Configuration([[1, 0], [-1, 0]]))
    assert energy(mu, Riesz(1)) == math.inf
    assert energy(interval_log_em.base, ShiftedLog(0.25)) == pytest.approx(math.log(8), abs=1e-3)
    # 1-D oracle in t = cos(theta): (1/2) int_{-1}^{1} (2 - 2t)^{-1/2} dt
    oracle, _ = integrate.quad(lambda t: (2 - 2 * t) ** -0.5 / 2, -1, 1)
    assert oracle == pytest.approx(1.0, abs=1e-9)
    assert energy(sphere_em.base, Riesz(1)) == pytest.approx(oracle, abs=1e-3)


def test_equilibrium_constants(circle_em, sphere_em, interval_log_em):
    assert circle_em.kind == "uniform-circle"
    np.testing.assert_allclose(circle_em.base.weights, 1 / circle_em.base.n_nodes)
    assert circle_em.W_K == pytest.approx(CIRCLE_W_HALF, abs=1e-10)
    assert sphere_em.W_K == pytest.approx(2 ** (1 - 1) / (2 - 1), abs=1e-6)
    # Robin constant of [-1, 1] is log 2; shifting by -log(1/4) adds log 4
    assert interval_log_em.W_K == pytest.approx(math.log(8), abs=1e-4)


@pytest.mark.parametrize("s", [0.3, 1.5])
def test_sphere_constant_other_s(sphere, s):
    em = equilibrium_measure(sphere, Riesz(s), check=False)
    assert em.W_K == pytest.approx(2 ** (1 - s) / (2 - s), rel=1e-9)


def test_assumptions_sphere(sphere_em):
    rep = sphere_em.assumption_report
    assert rep.all_pass
    assert rep["A4"].evidence < 1e-3
    assert rep["A2"].detail["basis"] == "theory"
    data = json.loads(rep.to_json())
    assert {d["assumption"] for d in data} == {"A1", "A2", "A3", "A4"}
    assert all(set(d) >= {"assumption", "status", "evidence"} for d in data)


def test_assumptions_interval_log(interval_log_em):
    rep = interval_log_em.assumption_report
    assert rep["A4"].status == "pass"
    assert rep["A4"].evidence < 1e-3


@pytest.fixture(scope="module")
def ball_em():
    return equilibrium_measure(Ball((0.0, 0.0, 0.0), 1.0, 3), Riesz(1.0))


def test_ball_numerical_a3_fails(ball_em):
    rep = ball_em.assumption_report
    assert ball_em.provenance == "numerical"
    assert rep["A1"].status == "pass"
    assert rep["A2"].status == "unverified"
    assert rep["A3"].status == "fail"
    assert rep["A3"].detail["interior_mass"] < 1e-6
    assert [f.assumption for f in rep.failures()][0] == "A3"


def test_numerical_branch_uniform_on_circle(circle):
    em = equilibrium_measure(circle, Riesz(0.5), method="numerical", n_nodes=400, check=False)
    M = em.base.n_nodes
    assert em.provenance == "numerical"
    assert np.max(np.abs(em.base.weights - 1 / M)) < 10 / M
    assert em.W_K == pytest.approx(CIRCLE_W_HALF, rel=1e-3)


def test_numerical_branch_interval_riesz(interval):
    em = equilibrium_measure(interval, Riesz(0.5))
    rep = em.assumption_report
    assert rep["A1"].status == "pass" and rep["A3"].status == "pass"
    assert np.all(em.base.weights > 0)
    # the Riesz density on an interval grows towards the endpoints
    w, x = em.base.weights, em.base.nodes[:, 0]
    assert w[np.argmin(np.abs(x))] < w[np.argmin(np.abs(x - 0.9))]


def test_numerical_refuses_infinite_self_energy(circle):
    with pytest.raises(ValueError, match="A1"):
        equilibrium_measure(circle, Riesz(1.0))


def test_simplex_projection():
    rng = np.random.default_rng(0)
    for _ in range(50):
        v = rng.normal(size=20) * 3
        p = project_simplex(v)
        assert p.sum() == pytest.approx(1.0) and np.all(p >= 0)
        np.testing.assert_allclose(project_simplex(p), p, atol=1e-14)
        # optimality: no simplex vertex is closer than the projection
        assert np.linalg.norm(v - p) <= min(np.linalg.norm(v - e) for e in np.eye(20)) + 1e-12


def test_simplex_qp_small():
    K = np.array([[2.0, 0.5], [0.5, 1.0]])
    w, info = solve_simplex_qp(K)
    # analytic minimiser of w^T K w on the segment: w1 = (K22 - K12) / (K11 + K22 - 2 K12)
    w1 = (1.0 - 0.5) / (2.0 + 1.0 - 1.0)
    np.testing.assert_allclose(w, [w1, 1 - w1], atol=1e-8)
    with pytest.raises(EquilibriumConvergenceError):
        rng = np.random.default_rng(0)
        B = rng.normal(size=(300, 300))
        solve_simplex_qp(B @ B.T + np.eye(300), tol=1e-15, max_iter=3)


def test_sample_arcsine_ks(interval_log_em):
    x = sample(interval_log_em, 100_000, seed=3).points[:, 0]
    ks = stats.kstest(x, lambda t: 1 - np.arccos(np.clip(t, -1, 1)) / np.pi).statistic
    assert ks < 0.006


def test_sample_circle_mean_and_determinism(circle_em):
    pts = sample(circle_em, 100_000, seed=5).points
    assert np.linalg.norm(pts.mean(axis=0)) < 0.01
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(sample(circle_em, 50, 9).points, sample(circle_em, 50, 9).points)


def test_sample_numerical_branch(ball_em):
    cfg = sample(ball_em, 30, seed=1)
    assert cfg.N == 30
    assert all(any(np.array_equal(p, n) for n in ball_em.base.nodes) for p in cfg.points)


def test_bl_distance_examples(circle_em):
    mu = circle_em.base
    assert bl_distance(mu, mu) == 0.0
    eq = counting_measure(Configuration(equally_spaced(4096, phase=0.5)))
    assert bl_distance(mu, eq) < 1e-3
    delta = counting_measure(Configuration([[1.0, 0.0]]))
    assert bl_distance(mu, delta, probes=64) >= 0.3
    assert bl_distance(mu, delta, seed=4) == bl_distance(delta, mu, seed=4)
