"""Discrete energy, energy minimisation and greedy energy points."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.spatial.distance import cdist

from .kernels import ShiftedLog
from .polarization import Configuration, polarization

__all__ = [
    "discrete_energy",
    "energy_gradient",
    "minimize_energy",
    "energy_asymptote_probe",
    "EnergyProbeRow",
    "GreedySequence",
    "greedy_points",
]


def discrete_energy(cfg, k):
    """``sum_{i != j} K(a_i, a_j)``; ``+inf`` when two points coincide."""
    pts = getattr(cfg, "points", cfg)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if len(pts) < 2:
        raise ValueError("discrete energy needs at least two points")
    pts = pts[np.lexsort(pts.T[::-1])]
    D = cdist(pts, pts)
    iu = np.triu_indices(len(pts), k=1)
    vals = k.f(D[iu])
    if np.any(np.isinf(vals)):
        return math.inf
    return float(2.0 * vals.sum())


def energy_gradient(points, k):
    """Gradient of the discrete energy with respect to every point, shape (N, t)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    G = k.grad_x(pts, pts)
    # E counts every unordered pair twice
    return 2.0 * G.sum(axis=1)


def minimize_energy(A, k, N, seed=0, budget=2000, n_restarts=1, em=None, rel_tol=1e-10):
    """Projected gradient descent on the discrete energy.

    Starts from equilibrium samples; each iteration moves every point along
    its negative energy gradient, projects back to ``A`` and accepts the
    step only if the energy drops (backtracking by halving). The step starts
    at one mesh resolution. Stops when the relative improvement is below
    ``rel_tol`` or after ``budget`` iterations; the best of ``n_restarts``
    runs is returned.
    """
    from .measures import equilibrium_measure, sample

    N = int(N)
    if N < 2:
        raise ValueError("energy minimisation needs N >= 2")
    if isinstance(k, ShiftedLog):
        k = k.for_set(A)
    if em is None:
        try:
            em = equilibrium_measure(A, k, check=False)
        except ValueError:
            # no finite-energy equilibrium measure: start from uniform draws
            em = None
    best = None
    for r in range(max(int(n_restarts), 1)):
        rseed = int(seed) * 1000 + r
        if em is not None:
            init = sample(em, N, rseed).points
        else:
            init = A.sample_uniform(N, np.random.default_rng(rseed))
        pts, E, exhausted = _descend(init, k, A, budget, rel_tol)
        if best is None or E < best[1]:
            best = (pts, E, exhausted)
    return Configuration(best[0], budget_exhausted=best[2])


def _descend(pts, k, A, budget, rel_tol):
    pts = A.project(np.array(pts, dtype=float))
    E = discrete_energy(pts, k)
    if not math.isfinite(E):
        # separate coincident draws before descending
        pts = _separate(pts, A)
        E = discrete_energy(pts, k)
    step = A.default_resolution(len(pts))
    for it in range(int(budget)):
        g = energy_gradient(pts, k)
        gnorm = float(np.abs(g).max())
        if gnorm == 0.0:
            return pts, E, False
        direction = -g / gnorm
        accepted = False
        for _ in range(60):
            cand = A.project(pts + step * direction)
            E_new = discrete_energy(cand, k)
            if E_new < E:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return pts, E, False
        improvement = (E - E_new) / abs(E) if E != 0 else E - E_new
        pts, E = cand, E_new
        step *= 1.5
        if improvement < rel_tol:
            return pts, E, False
    return pts, E, True


def _separate(pts, A):
    pts = pts.copy()
    h = 1e-3 * A.diameter()
    for i in range(1, len(pts)):
        while np.any(np.all(pts[:i] == pts[i], axis=1)):
            offset = np.zeros(pts.shape[1])
            offset[i % pts.shape[1]] = h
            pts[i] = A.project(pts[i] + offset)
            h *= 1.5
    return pts


@dataclass(frozen=True)
class EnergyProbeRow:
    N: int
    E_min: float
    I_eq: float

    @property
    def E_over_N2(self):
        return self.E_min / self.N**2

    @property
    def gap(self):
        return self.I_eq - self.E_over_N2


def energy_asymptote_probe(A, k, N_list, seed=0, em=None, **kwargs):
    """Tabulate ``E_min / N^2`` against the equilibrium energy along ``N_list``."""
    from .measures import equilibrium_measure

    if isinstance(k, ShiftedLog):
        k = k.for_set(A)
    I_eq = math.inf
    if em is None:
        try:
            em = equilibrium_measure(A, k, check=False)
        except ValueError:
            # A1 fails: every measure has infinite energy, E/N^2 diverges
            em = None
    if em is not None:
        I_eq = em.W_K
    rows = []
    for N in N_list:
        cfg = minimize_energy(A, k, int(N), seed=seed, em=em, **kwargs)
        rows.append(EnergyProbeRow(int(N), discrete_energy(cfg, k), I_eq))
    return rows


@dataclass
class GreedySequence:
    """Nested greedy energy points ``a_1, a_2, ...``.

    ``values[n - 1]`` holds the mean interaction of ``a_n`` with its
    predecessors (``values[0]`` is undefined and stored as NaN).
    """

    points: np.ndarray
    values: np.ndarray
    reports: List = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.points)

    def prefix(self, m):
        return Configuration(self.points[:m])

    def to_rows(self):
        for n, (p, v) in enumerate(zip(self.points, self.values), start=1):
            yield n, p, v


def greedy_points(A, k, N, a1=None, tol=1e-9, n_basins=4, coarse_resolution=None):
    """Greedy energy points: ``a_n`` minimises the potential of ``a_1..a_{n-1}``.

    Each argmin is the witness of :func:`polarization` on the current
    prefix, so ties resolve exactly as there. ``a1`` defaults to the first
    node of the set's default mesh.
    """
    if isinstance(k, ShiftedLog):
        k = k.for_set(A)
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    if a1 is None:
        a1 = A.mesh(A.default_resolution(1)).nodes[0]
    a1 = np.asarray(a1, dtype=float).ravel()
    if not A.contains(a1)[0]:
        raise ValueError("a1 is not on the set")
    pts = np.empty((N, A.ambient_dim))
    pts[0] = a1
    values = np.full(N, np.nan)
    reports = []
    for n in range(2, N + 1):
        rep = polarization(
            Configuration(pts[: n - 1]),
            k,
            A,
            tol=tol,
            n_basins=n_basins,
            coarse_resolution=coarse_resolution,
            check=False,
        )
        pts[n - 1] = rep.witness
        values[n - 1] = rep.value
        reports.append(rep)
    return GreedySequence(pts, values, reports)
