"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import json
import math
import time

import numpy as np
import pytest
from scipy import integrate

from polarlab import (
    Ball,
    Circle,
    Configuration,
    Interval,
    Riesz,
    ShiftedLog,
    Sphere2,
    bl_distance,
    counting_measure,
    discrete_energy,
    energy_gradient,
    equilibrium_measure,
    greedy_points,
    l1_flatness,
    maximin_solve,
    minimize_energy,
    polarization,
    sample,
)
from polarlab.cli import main
from polarlab.experiments import ExperimentConfig, run_counterexample_ball


@pytest.fixture
def verdict(capsys):
    def record(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number:>2}: {'PASS' if ok else 'FAIL'} | {detail}")
        assert ok, detail

    return record


def _circle_constant_oracle(s):
    # W_K = (1/pi) int_0^pi (2 sin(t/2))^{-s} dt by adaptive quadrature
    val, _ = integrate.quad(lambda t: (2 * math.sin(t / 2)) ** -s, 0, math.pi, limit=200)
    return val / math.pi


def _equally_spaced(n):
    th = 2 * np.pi * np.arange(n) / n
    return np.c_[np.cos(th), np.sin(th)]


def test_criterion_01_sphere_constant(verdict):
    oracle = 2 ** (1 - 1) / (2 - 1)
    t0 = time.perf_counter()
    em = equilibrium_measure(Sphere2((0.0, 0.0, 0.0), 1.0), Riesz(1), n_nodes=4000)
    elapsed = time.perf_counter() - t0
    err = abs(em.W_K - oracle)
    verdict(1, err < 1e-3 and elapsed < 10 and em.base.n_nodes == 4000,
            f"W_K={em.W_K:.12f} |err|={err:.2e} (<1e-3) nodes={em.base.n_nodes} time={elapsed:.2f}s (<10s)")


def test_criterion_02_interval_log_constant(verdict):
    # Robin constant of [-1,1] is log 2 (capacity 1/2); -log(1/4) adds log 4
    oracle = math.log(2) + math.log(4)
    em = equilibrium_measure(Interval(-1.0, 1.0), ShiftedLog(0.25))
    err = abs(em.W_K - oracle)
    verdict(2, err < 1e-3 and em.kind == "arcsine", f"W_K={em.W_K:.10f} oracle={oracle:.10f} |err|={err:.2e} (<1e-3)")


def test_criterion_03_polarization_oracle(verdict):
    pts = np.array([[1.0, 0.0], [-1.0, 0.0]])
    th = 2 * np.pi * np.arange(10**6) / 10**6
    with np.errstate(divide="ignore"):
        U = 0.5 * (1 / np.hypot(np.cos(th) - 1, np.sin(th)) + 1 / np.hypot(np.cos(th) + 1, np.sin(th)))
    oracle = U.min()
    rep = polarization(Configuration(pts), Riesz(1), Circle((0.0, 0.0), 1.0))
    err = abs(rep.value - oracle)
    werr = min(np.linalg.norm(rep.witness - np.array([0.0, 1.0])), np.linalg.norm(rep.witness + np.array([0.0, 1.0])))
    verdict(3, err < 1e-6 and werr < 1e-3 and abs(oracle - math.sqrt(2) / 2) < 1e-9,
            f"P={rep.value:.12f} brute={oracle:.12f} |err|={err:.2e} (<1e-6) witness dist={werr:.2e} (<1e-3)")


def test_criterion_04_energy_oracle(verdict):
    # one-parameter family: gaps (a, a, 2pi - 2a); E = 2 (2/chord(a) + 1/chord(2a))
    a = np.linspace(0.5, math.pi - 0.01, 400_001)
    chord = lambda t: 2 * np.abs(np.sin(t / 2))  # noqa: E731
    oracle = float((2 * (2 / chord(a) + 1 / chord(2 * a))).min())
    cfg = minimize_energy(Circle((0.0, 0.0), 1.0), Riesz(1), 3, seed=0)
    E = discrete_energy(cfg, Riesz(1))
    err = abs(E - oracle)
    verdict(4, err < 1e-6 and abs(oracle - 2 * math.sqrt(3)) < 1e-8,
            f"E={E:.12f} oracle={oracle:.12f} 2*sqrt(3)={2 * math.sqrt(3):.12f} |err|={err:.2e} (<1e-6)")


def test_criterion_05_fubini_upper_bound(verdict):
    C = Circle((0.0, 0.0), 1.0)
    W = _circle_constant_oracle(0.5)
    em = equilibrium_measure(C, Riesz(0.5))
    rng = np.random.default_rng(2024)
    worst = -math.inf
    count = 0
    for trial in range(120):
        N = int(rng.integers(1, 64))
        pts = C.sample_uniform(N, rng) if trial % 2 else sample(em, N, trial).points
        P = polarization(Configuration(pts), Riesz(0.5), C).value
        worst = max(worst, P - W)
        count += 1
    verdict(5, count >= 100 and worst <= 1e-3,
            f"{count} configurations, max(P - W_K)={worst:.3e} (<=1e-3), W_K oracle={W:.10f}")


def test_criterion_06_theorem_bc_equally_spaced(verdict):
    C = Circle((0.0, 0.0), 1.0)
    W_oracle = _circle_constant_oracle(0.5)
    t0 = time.perf_counter()
    em = equilibrium_measure(C, Riesz(0.5))
    cfg = Configuration(_equally_spaced(128))
    P = polarization(cfg, Riesz(0.5), C).value
    c = l1_flatness(cfg, Riesz(0.5), em, P)
    elapsed = time.perf_counter() - t0
    # the minimum of U_N for equally spaced points sits midway between neighbours
    mid = np.array([[math.cos(math.pi / 128), math.sin(math.pi / 128)]])
    P_oracle = float(np.mean(np.linalg.norm(mid - cfg.points, axis=1) ** -0.5))
    b_rel = abs(P - em.W_K) / em.W_K
    c_rel = c / em.W_K
    verdict(6, b_rel < 0.01 and c_rel < 0.01 and elapsed < 60,
            f"P={P:.8f} (midpoint oracle {P_oracle:.8f}) W_K={em.W_K:.8f} (oracle {W_oracle:.8f}) "
            f"|P-W|/W={b_rel:.4f} (<0.01) L1/W={c_rel:.4f} (<0.01) time={elapsed:.1f}s")


def test_criterion_07_weak_convergence_maximin(verdict):
    C = Circle((0.0, 0.0), 1.0)
    em = equilibrium_measure(C, Riesz(0.5))
    bl = {}
    for N in (16, 32, 64, 128):
        cfg, _ = maximin_solve(C, Riesz(0.5), N, seed=0, em=em)
        bl[N] = bl_distance(counting_measure(cfg), em.base)
    ok = bl[128] < 0.05 and bl[128] < bl[16]
    verdict(7, ok, "bl=" + ", ".join(f"N={n}:{v:.2e}" for n, v in bl.items()) + " (final<0.05 and final<N=16)")


def _brute_circle_greedy_value(n_last, m=2**18):
    """Greedy recursion on ``m`` equally spaced angles, starting at angle 0."""
    th = 2 * np.pi * np.arange(m) / m
    X = np.c_[np.cos(th), np.sin(th)]
    with np.errstate(divide="ignore"):
        U = np.hypot(X[:, 0] - 1, X[:, 1]) ** -0.5
        for n in range(2, n_last + 1):
            i = int(np.argmin(U))
            value = U[i] / (n - 1)
            U = U + np.hypot(X[:, 0] - X[i, 0], X[:, 1] - X[i, 1]) ** -0.5
    return value


def _brute_circle_polarization(points, s, m=2**16):
    th = 2 * np.pi * np.arange(m) / m
    X = np.c_[np.cos(th), np.sin(th)]
    U = np.zeros(m)
    with np.errstate(divide="ignore"):
        for p in points:
            U += np.hypot(X[:, 0] - p[0], X[:, 1] - p[1]) ** -s
    return U.min() / len(points)


def test_criterion_08_greedy(verdict):
    C = Circle((0.0, 0.0), 1.0)
    em = equilibrium_measure(C, Riesz(0.5))
    W = _circle_constant_oracle(0.5)
    oracle = _brute_circle_greedy_value(200)
    seq = greedy_points(C, Riesz(0.5), 200, a1=(1.0, 0.0))
    rel = abs(seq.values[199] - W) / W
    bl = [bl_distance(counting_measure(seq.prefix(n)), em.base) for n in (25, 50, 100, 200)]
    decreasing = all(b < a for a, b in zip(bl, bl[1:]))
    verdict(8, rel < 0.03 and decreasing,
            f"values[199]={seq.values[199]:.6f} (brute-force greedy {oracle:.6f}) W_K={W:.6f} rel gap={rel:.4f} (<0.03); "
            f"bl over 25/50/100/200 = {', '.join(f'{b:.2e}' for b in bl)} decreasing={decreasing}")


def test_criterion_09_random_points(verdict):
    C = Circle((0.0, 0.0), 1.0)
    em = equilibrium_measure(C, Riesz(0.5))
    W = _circle_constant_oracle(0.5)
    cfg = sample(em, 500, seed=0)
    oracle = _brute_circle_polarization(cfg.points, 0.5)
    P = polarization(cfg, Riesz(0.5), C).value
    rel = abs(P - W) / W
    verdict(9, rel < 0.05, f"N=500 seed=0 P={P:.6f} (grid upper bound {oracle:.6f}) W_K={W:.6f} rel gap={rel:.4f} (<0.05)")


def test_criterion_10_ball_counterexample(verdict):
    cfg = ExperimentConfig.from_dict({
        "set": {"kind": "ball", "center": [0, 0, 0], "radius": 1},
        "kernel": {"kind": "riesz", "s": 1},
        "experiment": "counterexample-ball",
        "N_list": [1, 5, 20, 50],
        "seed": 0,
    })
    res = run_counterexample_ball(cfg)
    rows = res.tables["counterexample"][1]
    origin = [r for r in rows if r[0] == "origin"]
    others = [r for r in rows if r[0] != "origin"]
    exact = all(r[2] == 1.0 for r in origin)
    spread = max(r[2] for r in others)
    min_bl = min(r[3] for r in origin)
    a3 = res.summary["A3_fails"] and res.summary["interior_mass"] < 1e-6
    verdict(10, exact and spread <= 1.0 + 1e-6 and min_bl > 0.5 and a3,
            f"P(origin)=1.0 exactly: {exact}; max competitor P={spread:.6f} (<=1+1e-6); "
            f"min bl(origin, mu_eq)={min_bl:.3f} (>0.5); A3 fails with interior mass "
            f"{res.summary['interior_mass']:.1e} (<1e-6): {a3}")


def test_criterion_11_gradient_check(verdict):
    rng = np.random.default_rng(11)
    worst = 0.0
    kernels = (Riesz(0.5), Riesz(1.0), Riesz(2.0), ShiftedLog(0.1))
    for trial in range(100):
        N = int(rng.integers(2, 9))
        pts = rng.uniform(-1, 1, size=(N, int(rng.integers(1, 4))))
        for k in kernels:
            g = energy_gradient(pts, k)
            fd = np.zeros_like(pts)
            for idx in np.ndindex(pts.shape):
                e = np.zeros_like(pts)
                e[idx] = 1e-6
                fd[idx] = (discrete_energy(pts + e, k) - discrete_energy(pts - e, k)) / 2e-6
            worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(fd)))
    verdict(11, worst < 1e-5, f"100 configurations x {len(kernels)} kernels, max relative error={worst:.2e} (<1e-5)")


def test_criterion_12_determinism(verdict, tmp_path):
    configs = {
        "verify": {"set": {"kind": "circle", "center": [0, 0], "radius": 1}, "kernel": {"kind": "riesz", "s": 0.5},
                   "experiment": "theorem-abc", "N_list": [8, 16], "seed": 3},
        "greedy": {"set": {"kind": "sphere", "center": [0, 0, 0], "radius": 1}, "kernel": {"kind": "riesz", "s": 1},
                   "experiment": "greedy", "N_list": [5, 15], "seed": 1},
        "energy": {"set": {"kind": "interval", "a": -1, "b": 1}, "kernel": {"kind": "log", "c": 0.25},
                   "experiment": "energy-asymptote", "N_list": [3, 6], "seed": 2},
    }
    identical = []
    for verb, cfg in configs.items():
        path = tmp_path / f"{verb}.json"
        path.write_text(json.dumps(cfg))
        runs = []
        for rep in ("1", "2"):
            out = tmp_path / f"{verb}-{rep}"
            out.mkdir()
            main([verb, "--config", str(path), "--out", str(out)])
            runs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        identical.append(bool(runs[0]) and runs[0] == runs[1])
    verdict(12, all(identical), f"byte-identical CSVs across reruns: {dict(zip(configs, identical))}")
