"""Polarization of a configuration and the N-point maximin problem.

``polarization`` minimises the discrete potential ``U(x) = mean_y K(x, y)``
over the set by hierarchical mesh refinement; ``maximin_solve`` searches for
configurations with large polarization by exchange moves toward the current
witness. Neither is certified: the minimiser returns an upper estimate of
the true minimum, and the maximiser a lower bound on ``P(A, N)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .kernels import ShiftedLog

__all__ = [
    "Configuration",
    "PolarizationReport",
    "polarization",
    "discrete_potential",
    "maximin_solve",
    "polarization_limit_probe",
    "ProbeRow",
    "l1_flatness",
]

_CHUNK_ENTRIES = 2_000_000
MAX_BASINS = 64
_NEIGHBOURS = 32


@dataclass(frozen=True, eq=False)
class Configuration:
    """Ordered ``N``-point configuration; duplicates are allowed."""

    points: np.ndarray
    budget_exhausted: bool = False

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] == 0 or pts.size == 0:
            raise ValueError("configuration needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("configuration points must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def N(self):
        return len(self.points)

    def __len__(self):
        return len(self.points)

    def check_on(self, compact_set, rtol=1e-9):
        if self.points.shape[1] != compact_set.ambient_dim:
            raise ValueError("configuration and set live in different dimensions")
        if not np.all(compact_set.contains(self.points, rtol=rtol)):
            raise ValueError("configuration has points off the set")
        return self

    def sorted_points(self):
        """Points in lexicographic order (makes sums permutation invariant)."""
        order = np.lexsort(self.points.T[::-1])
        return self.points[order]


@dataclass(frozen=True)
class PolarizationReport:
    value: float
    witness: np.ndarray
    mesh_trace: Tuple[Tuple[float, float], ...]
    refined: bool

    def to_dict(self):
        return {
            "value": _json_float(self.value),
            "witness": [float(v) for v in self.witness],
            "levels": [{"resolution": r, "min": _json_float(m)} for r, m in self.mesh_trace],
            "refined": bool(self.refined),
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


def _json_float(v):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def discrete_potential(points, k, X):
    """``mean_y K(x, y)`` at each row of ``X``; ``points`` should be pre-sorted."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.empty(len(X))
    n = len(points)
    step = max(1, _CHUNK_ENTRIES // n)
    for start in range(0, len(X), step):
        Kmat = k.f(cdist(X[start : start + step], points))
        out[start : start + step] = Kmat.sum(axis=1) / n
    return out


def _select_basins(nodes, values, n_basins, separation, radius=None, cap=MAX_BASINS):
    """Indices of low mesh values at least ``separation`` apart.

    The ``n_basins`` best separated nodes are always kept. When ``radius``
    is given, every other local minimum whose lower-bound estimate (its value
    minus the rise to its highest neighbour within ``radius``) does not
    exceed the best value is kept too, up to ``cap`` basins: near-tied basins
    are ranked unreliably by a coarse grid. Candidates are scanned in
    (value, index) order so ties resolve to the lowest index.
    """
    order = np.lexsort((np.arange(len(values)), values))
    order = order[np.isfinite(values[order])]
    keep = np.zeros(len(values), dtype=bool)
    if radius is not None and len(order) > 1:
        nn = min(_NEIGHBOURS, len(values))
        dist, nbr = cKDTree(nodes).query(nodes, k=nn, distance_upper_bound=radius)
        present = np.isfinite(dist)
        nbr = np.where(present, nbr, 0)
        vn = values[nbr]
        lowest = np.where(present, vn, np.inf).min(axis=1)
        highest = np.where(present & np.isfinite(vn), vn, -np.inf).max(axis=1)
        local_min = values <= lowest
        keep = local_min & (2.0 * values - highest <= values[order[0]])
    free = np.ones(len(values), dtype=bool)
    chosen = []
    for idx in order:
        if not free[idx]:
            continue
        if len(chosen) >= n_basins and not keep[idx]:
            continue
        chosen.append(int(idx))
        if len(chosen) == cap:
            break
        free &= np.linalg.norm(nodes - nodes[idx], axis=1) >= separation
    return chosen


def polarization(
    cfg,
    k,
    A,
    tol=1e-9,
    coarse_resolution=None,
    n_basins=4,
    max_levels=40,
    check=True,
):
    """Polarization ``min_x mean_y K(x, y)`` of ``cfg`` over the set ``A``.

    Evaluates the potential on a coarse mesh, keeps the ``n_basins`` best
    separated minima plus any other basin that may still beat them, and refines around each (resolution halved per level)
    until the running minimum changes by less than ``tol`` and every grid
    neighbour of the witness is within ``tol`` of it. The second condition
    stops a level whose grid happens to be centred on the minimiser from
    ending the search early.
    """
    if not isinstance(cfg, Configuration):
        cfg = Configuration(cfg)
    if isinstance(k, ShiftedLog):
        k = k.for_set(A)
    if check:
        cfg.check_on(A)
    if not tol > 0:
        raise ValueError("tol must be positive")
    pts = cfg.sorted_points()
    h = float(coarse_resolution or A.default_resolution(cfg.N))
    nodes = A.mesh(h).nodes
    values = discrete_potential(pts, k, nodes)
    best = int(np.argmin(values))
    best_val = float(values[best])
    witness = nodes[best].copy()
    trace = [(h, best_val)]
    basins = [nodes[i] for i in _select_basins(nodes, values, n_basins, 2.0 * h, 1.5 * h)]
    refined = False
    for _ in range(max_levels):
        parent = h
        h = h / 2.0
        cand = np.vstack([A.local_nodes(c, 1.5 * parent, h) for c in basins])
        vals = discrete_potential(pts, k, cand)
        j = int(np.argmin(vals))
        prev = best_val
        if vals[j] < best_val:
            best_val = float(vals[j])
            witness = cand[j].copy()
        trace.append((h, best_val))
        dist = np.linalg.norm(cand - witness, axis=1)
        ring = (dist > 0) & (dist <= 2.05 * h)
        spread = float(vals[ring].max() - best_val) if ring.any() else math.inf
        if prev - best_val < tol and spread < tol:
            refined = True
            break
        basins = [cand[i] for i in _select_basins(cand, vals, n_basins, 2.0 * h, 1.5 * h)]
        # the incumbent is always refined, even when tied basins crowd it out
        if min(np.linalg.norm(b - witness) for b in basins) > 0.5 * h:
            basins.insert(0, witness)
    return PolarizationReport(best_val, witness, tuple(trace), refined)


# ---------------------------------------------------------------------------
# maximin search


def _candidate_moves(points, witness, A, fractions):
    """Configurations with one point moved toward the witness.

    Points are tried nearest-to-witness first plus the most crowded point;
    each at the given fractions of the way.
    """
    d = np.linalg.norm(points - witness, axis=1)
    movers = list(np.argsort(d, kind="stable")[: min(len(points), 4)])
    if len(points) > 1:
        nn = cdist(points, points)
        np.fill_diagonal(nn, np.inf)
        crowded = int(np.argmin(nn.min(axis=1)))
        if crowded not in movers:
            movers.append(crowded)
    for frac in fractions:
        for i in movers:
            new = points.copy()
            new[i] = A.project(points[i] + frac * (witness - points[i]))
            yield new


def _local_search(points, k, A, budget, pol_kwargs, fractions):
    report = polarization(Configuration(points), k, A, check=False, **pol_kwargs)
    evals = 1
    while evals < budget:
        improved = False
        for cand in _candidate_moves(points, report.witness, A, fractions):
            rep = polarization(Configuration(cand), k, A, check=False, **pol_kwargs)
            evals += 1
            if rep.value > report.value:
                points, report, improved = cand, rep, True
                break
            if evals >= budget:
                break
        if not improved:
            return points, report, evals, evals >= budget
    return points, report, evals, True


def maximin_solve(
    A,
    k,
    N,
    seed=0,
    budget=200,
    n_restarts=2,
    em=None,
    energy_budget=2000,
    pol_kwargs=None,
):
    """Best-of-restarts exchange search for a large-polarization ``N``-point set.

    Even restarts start from equilibrium samples, odd ones from low-energy
    configurations. Returns ``(configuration, report)``; the configuration's
    ``budget_exhausted`` flag is set when the last search hit ``budget``
    polarization evaluations without reaching a local optimum.
    """
    from .energy import minimize_energy
    from .measures import equilibrium_measure, sample

    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    if isinstance(k, ShiftedLog):
        k = k.for_set(A)
    if em is None:
        em = equilibrium_measure(A, k, check=False)
    pol_kwargs = dict({"tol": 1e-7}, **(pol_kwargs or {}))
    fractions = tuple(2.0**-j for j in range(0, 12))
    results = []
    for r in range(max(int(n_restarts), 1)):
        rseed = int(seed) * 1000 + r
        if r % 2 == 1 and N >= 2:
            init = minimize_energy(A, k, N, seed=rseed, budget=energy_budget, em=em).points
        else:
            init = sample(em, N, rseed).points
        pts, rep, _, exhausted = _local_search(init.copy(), k, A, budget, pol_kwargs, fractions)
        results.append((rep.value, r, pts, rep, exhausted))
    # best value, ties to the lowest restart index
    results.sort(key=lambda item: (-item[0], item[1]))
    value, _, pts, rep, exhausted = results[0]
    return Configuration(pts, budget_exhausted=exhausted), rep


@dataclass(frozen=True)
class ProbeRow:
    N: int
    P_best: float
    W_K: float

    @property
    def gap(self):
        return self.W_K - self.P_best


def polarization_limit_probe(A, k, N_list, seed=0, em=None, tolerance=1e-3, require_assumptions=True, **solve_kwargs):
    """Run :func:`maximin_solve` along ``N_list`` and tabulate ``W_K - P_best``."""
    from .measures import equilibrium_measure

    if isinstance(k, ShiftedLog):
        k = k.for_set(A)
    if em is None:
        em = equilibrium_measure(A, k, check=require_assumptions)
    if require_assumptions and em.assumption_report is not None and not em.assumption_report.all_pass:
        failed = ", ".join(item.assumption for item in em.assumption_report.failures())
        raise ValueError(f"assumptions fail for this set and kernel: {failed}")
    rows = []
    for N in N_list:
        _, rep = maximin_solve(A, k, int(N), seed=seed, em=em, **solve_kwargs)
        rows.append(ProbeRow(int(N), rep.value, em.W_K))
    return rows


def l1_flatness(cfg, k, em, P=None):
    """``int |U_N - P(omega_N)| d mu_eq`` for the equilibrium measure ``em``.

    The integral of ``U_N`` is taken with the order of integration swapped
    (the equilibrium potential averaged over the configuration), which
    avoids evaluating ``U_N`` on its singularities; the negative part, where
    the mesh estimate of ``P`` overshoots ``U_N``, is added from the
    quadrature nodes.
    """
    from .measures import potential

    if not isinstance(cfg, Configuration):
        cfg = Configuration(cfg)
    pts = cfg.sorted_points()
    if P is None:
        P = polarization(cfg, k, em.set, check=False).value
    mean_U = float(np.mean(potential(em.base, k, pts)))
    U_nodes = discrete_potential(pts, k, em.base.nodes)
    under = np.where(np.isfinite(U_nodes), np.clip(P - U_nodes, 0.0, None), 0.0)
    return (mean_U - P) + 2.0 * float((em.base.weights * under).sum())
