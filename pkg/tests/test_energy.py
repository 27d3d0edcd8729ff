import math

import numpy as np
import pytest

from polarlab import (
    Configuration,
    Riesz,
    ShiftedLog,
    bl_distance,
    counting_measure,
    discrete_energy,
    energy_asymptote_probe,
    greedy_points,
    minimize_energy,
    polarization,
)

from conftest import CIRCLE_W_HALF, equally_spaced


def test_discrete_energy_examples():
    assert discrete_energy(Configuration([[1.0, 0.0], [-1.0, 0.0]]), Riesz(1)) == pytest.approx(1.0)
    assert discrete_energy(Configuration(equally_spaced(3)), Riesz(1)) == pytest.approx(2 * math.sqrt(3), abs=1e-12)
    assert discrete_energy(Configuration([[0.0, 1.0], [0.0, 1.0], [1.0, 0.0]]), Riesz(1)) == math.inf
    with pytest.raises(ValueError):
        discrete_energy(Configuration([[0.0, 1.0]]), Riesz(1))


def test_discrete_energy_permutation_and_pairs():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(12, 3))
    E = discrete_energy(Configuration(pts), Riesz(0.7))
    assert E == discrete_energy(Configuration(pts[rng.permutation(12)]), Riesz(0.7))
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    iu = np.triu_indices(12, 1)
    assert E == pytest.approx(2 * (d[iu] ** -0.7).sum(), rel=1e-13)


def test_minimize_energy_triangle(circle):
    cfg = minimize_energy(circle, Riesz(1), 3, seed=0)
    # one-parameter oracle: gaps (a, a, 2pi - 2a) with a brute-forced on a grid
    a = np.linspace(0.5, math.pi - 0.01, 200_001)
    chord = lambda t: 2 * np.abs(np.sin(t / 2))  # noqa: E731
    E = 2 * (2 / chord(a) + 1 / chord(2 * a))
    oracle = E.min()
    assert oracle == pytest.approx(2 * math.sqrt(3), abs=1e-8)
    assert discrete_energy(cfg, Riesz(1)) == pytest.approx(oracle, abs=1e-6)


def test_minimize_energy_pair(circle):
    cfg = minimize_energy(circle, Riesz(0.5), 2, seed=3)
    assert discrete_energy(cfg, Riesz(0.5)) == pytest.approx(math.sqrt(2), abs=1e-8)
    np.testing.assert_allclose(cfg.points[0], -cfg.points[1], atol=1e-4)


def test_minimize_energy_interval_log(interval):
    cfg = minimize_energy(interval, ShiftedLog(0.25), 2, seed=0)
    # grid oracle over (x, y) in [-1, 1]^2
    g = np.linspace(-1, 1, 801)
    X, Y = np.meshgrid(g, g)
    with np.errstate(divide="ignore"):
        Egrid = 2 * -np.log(0.25 * np.abs(X - Y))
    assert Egrid.min() == pytest.approx(2 * math.log(2), abs=1e-12)
    np.testing.assert_allclose(np.sort(cfg.points[:, 0]), [-1, 1], atol=1e-9)
    assert discrete_energy(cfg, ShiftedLog(0.25)) == pytest.approx(2 * math.log(2), abs=1e-9)


def test_descent_from_init(sphere, sphere_em):
    from polarlab import sample

    init = sample(sphere_em, 10, 0)
    out = minimize_energy(sphere, Riesz(1), 10, seed=0, em=sphere_em)
    assert discrete_energy(out, Riesz(1)) <= discrete_energy(init, Riesz(1))


def test_energy_probe_small(circle):
    rows = energy_asymptote_probe(circle, Riesz(1), [2], seed=0)
    assert rows[0].E_over_N2 == pytest.approx(0.25, abs=1e-9)
    assert rows[0].I_eq == math.inf


def test_energy_probe_sphere(sphere, sphere_em):
    rows = energy_asymptote_probe(sphere, Riesz(1), [16, 64], seed=0, em=sphere_em)
    assert all(r.E_over_N2 <= 1.0 for r in rows)
    assert rows[1].gap < rows[0].gap


def _equally_spaced_energy_ratio(N):
    return discrete_energy(Configuration(equally_spaced(N)), Riesz(0.5)) / N**2


def test_energy_probe_circle_trend(circle, circle_em):
    rows = energy_asymptote_probe(circle, Riesz(0.5), [4, 8, 16, 32], seed=0, em=circle_em)
    gaps = [r.gap for r in rows]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    for r in rows:
        # equally spaced points minimise Riesz energy on the circle
        assert r.E_over_N2 == pytest.approx(_equally_spaced_energy_ratio(r.N), rel=1e-6)


@pytest.mark.xfail(
    strict=True,
    reason="optimal (equally spaced) 32 points on the circle still leave a 17% relative gap",
)
def test_energy_probe_circle_final_gap(circle, circle_em):
    rows = energy_asymptote_probe(circle, Riesz(0.5), [4, 8, 16, 32], seed=0, em=circle_em)
    assert rows[-1].gap < 0.05 * rows[-1].I_eq


def test_gradient_matches_finite_differences():
    from polarlab import energy_gradient

    rng = np.random.default_rng(0)
    pts = rng.normal(size=(6, 2))
    for k in (Riesz(0.5), ShiftedLog(0.05)):
        g = energy_gradient(pts, k)
        fd = np.zeros_like(pts)
        for i in range(6):
            for j in range(2):
                e = np.zeros_like(pts)
                e[i, j] = 1e-6
                fd[i, j] = (discrete_energy(pts + e, k) - discrete_energy(pts - e, k)) / 2e-6
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)


@pytest.fixture(scope="module")
def greedy_circle(circle):
    return greedy_points(circle, Riesz(0.5), 60, a1=(1.0, 0.0))


def test_greedy_second_point(greedy_circle):
    np.testing.assert_allclose(greedy_circle.points[1], [-1.0, 0.0], atol=1e-6)


def test_greedy_single_point(circle):
    seq = greedy_points(circle, Riesz(0.5), 1, a1=(1.0, 0.0))
    assert len(seq) == 1
    assert np.all(np.isnan(seq.values))


def test_greedy_recursion(circle, greedy_circle):
    for n in (2, 5, 17, 60):
        prefix = greedy_circle.prefix(n - 1)
        direct = np.mean([Riesz(0.5)(greedy_circle.points[n - 1], p) for p in prefix.points])
        assert greedy_circle.values[n - 1] == pytest.approx(direct, rel=1e-12)
        P = polarization(prefix, Riesz(0.5), circle).value
        assert greedy_circle.values[n - 1] == pytest.approx(P, abs=1e-8)


def test_greedy_nesting(circle, greedy_circle):
    short = greedy_points(circle, Riesz(0.5), 20, a1=(1.0, 0.0))
    np.testing.assert_array_equal(short.points, greedy_circle.points[:20])
    np.testing.assert_array_equal(short.values[1:], greedy_circle.values[1:20])


def test_greedy_default_a1(circle):
    seq = greedy_points(circle, Riesz(0.5), 3)
    np.testing.assert_array_equal(seq.points[0], circle.mesh(circle.default_resolution()).nodes[0])


def test_greedy_values_below_constant(greedy_circle, circle_em):
    assert np.all(greedy_circle.values[1:] <= CIRCLE_W_HALF + 1e-6)
    bl = [bl_distance(counting_measure(greedy_circle.prefix(n)), circle_em.base) for n in (10, 60)]
    assert bl[1] < bl[0]
