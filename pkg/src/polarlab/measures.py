"""Probability measures on compact sets.

A measure is a weighted node set. Continuous measures (closed-form or
numerical equilibrium measures) additionally carry a cell radius per node:
near the evaluation point each node is smeared over a flat ball of that
radius, which keeps potentials and energies accurate without ever touching
the kernel singularity. Counting measures carry no cells and are evaluated
as plain sums.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import integrate
from scipy.linalg import eigh
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .geometry import Ball, Circle, CompactSet, Interval, Sphere2, fibonacci_sphere
from .kernels import Kernel, Riesz, ShiftedLog

__all__ = [
    "QuadratureMeasure",
    "EquilibriumMeasure",
    "AssumptionStatus",
    "AssumptionReport",
    "EquilibriumConvergenceError",
    "counting_measure",
    "potential",
    "energy",
    "equilibrium_measure",
    "assumption_check",
    "sample",
    "bl_distance",
    "project_simplex",
    "solve_simplex_qp",
]

PROVENANCES = ("closed_form", "numerical", "counting")
NEAR_FIELD_CELLS = 6.0
ZONAL_CUTOFF_CELLS = 10.0
_CHUNK_ENTRIES = 2_000_000


class EquilibriumConvergenceError(RuntimeError):
    pass


def smooth_cutoff(u):
    """C-infinity step: 1 on ``u <= 0``, 0 on ``u >= 1``."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u < 1.0, np.exp(-1.0 / np.where(u < 1.0, 1.0 - u, 1.0)), 0.0)
        b = np.where(u > 0.0, np.exp(-1.0 / np.where(u > 0.0, u, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class ZonalNearField:
    """Near-field model for rotation-invariant measures on circles and spheres.

    Inside ``cutoff`` the kernel is blended out of the node sum with a
    smooth step and the removed part is added back as a constant computed
    by one-dimensional quadrature (it does not depend on the point because
    the measure is rotation invariant).
    """

    shape: str  # "circle" | "sphere"
    radius: float
    cutoff: float

    def blend(self, r):
        # 1 near the point, 0 beyond the cutoff
        return smooth_cutoff(2.0 * r / self.cutoff - 1.0)

    def near_integral(self, k):
        # integrate in the chord length r, which leaves only the kernel singularity
        R, f = self.radius, k.f
        r_max = min(self.cutoff, 2.0 * R)
        g = lambda r: float(f(np.array([r]))[0] * self.blend(np.array([r]))[0])  # noqa: E731
        opts = dict(limit=400, epsabs=1e-14, epsrel=1e-12)
        if self.shape == "circle":
            # theta = 2 asin(r / 2R); measure d theta / pi over [0, pi]
            jac = lambda r: 1.0 / (R * math.sqrt(max(1.0 - (r / (2 * R)) ** 2, 1e-300)))  # noqa: E731
            val, _ = integrate.quad(lambda r: g(r) * jac(r), 0.0, r_max, **opts)
            return val / math.pi
        # t = 1 - r^2 / 2R^2; measure dt / 2 over [-1, 1]
        val, _ = integrate.quad(lambda r: g(r) * r / (R * R), 0.0, r_max, **opts)
        return val / 2.0


@dataclass(frozen=True, eq=False)
class QuadratureMeasure:
    """Nodes with non-negative weights summing to one.

    Parameters
    ----------
    nodes : ndarray, shape (M, t)
    weights : ndarray, shape (M,)
    provenance : {"closed_form", "numerical", "counting"}
    cell_radius : ndarray, shape (M,), optional
        Radius of the flat cell each node stands for (continuous measures).
    cell_dim : int, optional
        Dimension of those cells.
    zonal : ZonalNearField, optional
        Replaces cell smearing for rotation-invariant closed forms.
    """

    nodes: np.ndarray
    weights: np.ndarray
    provenance: str
    cell_radius: Optional[np.ndarray] = None
    cell_dim: Optional[int] = None
    zonal: Optional[ZonalNearField] = None

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        if len(nodes) != len(weights):
            raise ValueError("nodes and weights differ in length")
        if len(nodes) == 0:
            raise ValueError("empty measure")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("nodes must be finite")
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance == "counting" and not np.all(weights == weights[0]):
            raise ValueError("counting measures have equal weights")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.cell_radius is not None:
            rho = np.broadcast_to(np.asarray(self.cell_radius, dtype=float), weights.shape).copy()
            if self.cell_dim not in (1, 2, 3):
                raise ValueError("cell_dim must be 1, 2 or 3 when cells are given")
            object.__setattr__(self, "cell_radius", rho)

    @property
    def n_nodes(self):
        return len(self.weights)

    @property
    def ambient_dim(self):
        return self.nodes.shape[1]

    @property
    def has_cells(self):
        return self.cell_radius is not None or self.zonal is not None

    def to_csv(self, path):
        from .io import write_measure_csv

        write_measure_csv(path, self.nodes, self.weights)


def counting_measure(cfg):
    """Mass ``1/N`` on every configuration point, multiplicities kept."""
    pts = getattr(cfg, "points", cfg)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n = len(pts)
    if n == 0:
        raise ValueError("empty configuration")
    return QuadratureMeasure(pts, np.full(n, 1.0 / n), "counting")


_NEAR_CACHE: dict = {}


def _zonal_constant_for(zonal, k):
    key = (zonal, k)
    if key not in _NEAR_CACHE:
        _NEAR_CACHE[key] = zonal.near_integral(k)
    return _NEAR_CACHE[key]


def _potential_rows(mu, k, X, near_field):
    nodes, weights = mu.nodes, mu.weights
    keep = weights > 0
    nodes, weights = nodes[keep], weights[keep]
    zonal = mu.zonal if near_field else None
    rho = mu.cell_radius[keep] if near_field and zonal is None else None
    out = np.empty(len(X))
    step = max(1, _CHUNK_ENTRIES // max(len(nodes), 1))
    for start in range(0, len(X), step):
        D = cdist(X[start : start + step], nodes)
        Kmat = k.f(D)
        if zonal is not None:
            mask = D < zonal.cutoff
            far = 1.0 - zonal.blend(D[mask])
            Kmat[mask] = np.where(far > 0, Kmat[mask], 0.0) * far
        elif near_field:
            reach = NEAR_FIELD_CELLS * rho[None, :]
            mask = D < reach
            if mask.any():
                rr = np.broadcast_to(rho[None, :], D.shape)[mask]
                Kmat[mask] = k.cell_average(D[mask], rr, mu.cell_dim)
        out[start : start + step] = (Kmat * weights[None, :]).sum(axis=1)
    if zonal is not None:
        out += _zonal_constant_for(zonal, k)
    return out


def potential(mu, k, x, near_field=None):
    """Potential ``U(x) = sum_i w_i K(x, node_i)``.

    ``x`` may be one point or an (n, t) array. ``near_field`` defaults to
    True for measures with cells; with it off, a point on a positive-weight
    node gives ``+inf``.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != mu.ambient_dim:
        raise ValueError("evaluation points and measure live in different dimensions")
    if near_field is None:
        near_field = mu.has_cells
    if near_field and not mu.has_cells:
        raise ValueError("near-field evaluation needs cell radii")
    out = _potential_rows(mu, k, X, near_field)
    return float(out[0]) if single else out


def energy(mu, k):
    """K-energy ``sum_ij w_i w_j K(x_i, x_j)``.

    The diagonal is always included. For measures without cells (counting
    measures) that makes the result ``+inf`` for singular kernels; the
    discrete energy lives in :func:`polarlab.energy.discrete_energy`.
    """
    U = potential(mu, k, mu.nodes, near_field=mu.has_cells)
    w = mu.weights
    pos = w > 0
    if np.any(np.isinf(U[pos])):
        return math.inf
    return float((w[pos] * U[pos]).sum())


# ---------------------------------------------------------------------------
# equilibrium measures


@dataclass(frozen=True)
class AssumptionStatus:
    assumption: str
    status: str  # pass | fail | unverified
    evidence: Optional[float]
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        d = {"assumption": self.assumption, "status": self.status, "evidence": self.evidence}
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass(frozen=True)
class AssumptionReport:
    items: tuple

    def __getitem__(self, name):
        for item in self.items:
            if item.assumption == name:
                return item
        raise KeyError(name)

    @property
    def all_pass(self):
        return all(item.status == "pass" for item in self.items if item.assumption != "A2") and (
            self["A2"].status != "fail"
        )

    def failures(self):
        return [item for item in self.items if item.status == "fail"]

    def to_json(self, indent=2):
        return json.dumps([item.to_dict() for item in self.items], indent=indent)


@dataclass(frozen=True, eq=False)
class EquilibriumMeasure:
    """Equilibrium measure of ``(set, kernel)`` with its constant ``W_K``."""

    base: QuadratureMeasure
    W_K: float
    kind: str
    set: CompactSet
    kernel: Kernel
    resolution: float
    assumption_report: Optional[AssumptionReport] = None
    solver_info: dict = field(default_factory=dict)

    @property
    def provenance(self):
        return self.base.provenance

    def potential(self, x):
        return potential(self.base, self.kernel, x)


def _closed_form_kind(A, k):
    if isinstance(A, Circle) and (
        (isinstance(k, Riesz) and 0 < k.s < 1) or isinstance(k, ShiftedLog)
    ):
        return "uniform-circle"
    if isinstance(A, Sphere2) and isinstance(k, Riesz) and 0 < k.s < 2:
        return "uniform-sphere"
    if isinstance(A, Interval) and isinstance(k, ShiftedLog):
        return "arcsine"
    return None


def _zonal_constant(A, k, kind):
    """Potential of the closed-form measure at a reference point, by adaptive quadrature."""
    f = lambda r: float(k.f(np.array([r]))[0])  # noqa: E731
    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-12)
    if kind == "uniform-circle":
        R = A.radius
        val, _ = integrate.quad(lambda th: f(2 * R * math.sin(th / 2)), 0.0, math.pi, **opts)
        return val / math.pi
    if kind == "uniform-sphere":
        R = A.radius
        val, _ = integrate.quad(lambda t: f(R * math.sqrt(max(2.0 - 2.0 * t, 0.0))), -1.0, 1.0, **opts)
        return val / 2.0
    if kind == "arcsine":
        h = 0.5 * (A.b - A.a)
        val, _ = integrate.quad(
            lambda p: f(h * abs(math.cos(p))), 0.0, math.pi, points=[math.pi / 2], **opts
        )
        return val / math.pi
    raise ValueError(kind)


def _closed_form_base(A, kind, n_nodes):
    if kind == "uniform-circle":
        theta = 2 * np.pi * np.arange(n_nodes) / n_nodes
        nodes = A.points_at(theta)
        rho = np.full(n_nodes, np.pi * A.radius / n_nodes)
        zonal = ZonalNearField("circle", A.radius, ZONAL_CUTOFF_CELLS * 2 * rho[0])
        base = QuadratureMeasure(nodes, np.full(n_nodes, 1.0 / n_nodes), "closed_form", rho, 1, zonal)
        return base, 2 * np.pi * A.radius / n_nodes
    if kind == "uniform-sphere":
        nodes = np.asarray(A.center) + A.radius * fibonacci_sphere(n_nodes)
        rho = np.full(n_nodes, 2.0 * A.radius / math.sqrt(n_nodes))
        zonal = ZonalNearField("sphere", A.radius, ZONAL_CUTOFF_CELLS * 2 * rho[0])
        base = QuadratureMeasure(nodes, np.full(n_nodes, 1.0 / n_nodes), "closed_form", rho, 2, zonal)
        return base, 3.0 * A.radius / math.sqrt(n_nodes)
    if kind == "arcsine":
        m, h = 0.5 * (A.a + A.b), 0.5 * (A.b - A.a)
        theta = (2 * np.arange(1, n_nodes + 1) - 1) * np.pi / (2 * n_nodes)
        nodes = (m + h * np.cos(theta))[:, None]
        rho = h * np.sin(theta) * np.pi / (2 * n_nodes)
        return QuadratureMeasure(nodes, np.full(n_nodes, 1.0 / n_nodes), "closed_form", rho, 1), np.pi * h / n_nodes
    raise ValueError(kind)


def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _polish(K, w, tol):
    """Solve the KKT system on the current support; None if it is not optimal."""
    S = np.nonzero(w > 0)[0]
    if len(S) == 0:
        return None
    KS = K[np.ix_(S, S)]
    try:
        z = np.linalg.solve(KS, np.ones(len(S)))
    except np.linalg.LinAlgError:
        return None
    if not np.all(z > 0):
        return None
    cand = np.zeros_like(w)
    cand[S] = z / z.sum()
    Kw = K @ cand
    obj = float(cand @ Kw)
    if float(Kw.min()) < obj * (1.0 - tol):
        return None
    return cand


def solve_simplex_qp(K, tol=1e-9, max_iter=50_000):
    """Minimise ``w^T K w`` over the probability simplex.

    Accelerated projected gradient with adaptive restart, plus an active-set
    solve on the current support every few hundred steps. Stops when the
    Frank-Wolfe gap ``2 (w^T K w - min_i (K w)_i)`` is below ``tol`` times
    the objective. Returns ``(w, info)``.
    """
    K = np.asarray(K, dtype=float)
    M = len(K)
    lam = eigh(K, eigvals_only=True, subset_by_index=[M - 1, M - 1])[0]
    L = 2.0 * max(lam, 1e-300)
    w = np.full(M, 1.0 / M)
    y = w.copy()
    t = 1.0
    gap = math.inf
    for it in range(1, max_iter + 1):
        w_new = project_simplex(y - 2.0 * (K @ y) / L)
        if (y - w_new) @ (w_new - w) > 0:
            t = 1.0
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, t = w_new, t_new
        if it % 10 == 0:
            Kw = K @ w
            obj = float(w @ Kw)
            gap = 2.0 * (obj - float(Kw.min()))
            if gap <= tol * abs(obj):
                return w, {"iterations": it, "gap": gap, "objective": obj}
        if it % 200 == 0:
            cand = _polish(K, w, tol)
            if cand is not None:
                Kw = K @ cand
                obj = float(cand @ Kw)
                gap = 2.0 * (obj - float(Kw.min()))
                return cand, {"iterations": it, "gap": max(gap, 0.0), "objective": obj, "polished": True}
    raise EquilibriumConvergenceError(
        f"simplex solver did not converge in {max_iter} iterations (gap {gap:.3e})"
    )


def _unit_ball_volume(d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _numerical_equilibrium(A, k, resolution, tol, max_iter):
    mesh = A.mesh(resolution)
    nodes = mesh.nodes
    M = len(nodes)
    d = A.intrinsic_dim
    rho = np.full(M, (A.measure() / M / _unit_ball_volume(d)) ** (1.0 / d))
    # same near-field smearing as potential(), so the QP objective is energy()
    D = cdist(nodes, nodes)
    K = k.f(D)
    near = D < NEAR_FIELD_CELLS * rho[None, :]
    K[near] = k.cell_average(D[near], np.broadcast_to(rho[None, :], D.shape)[near], d)
    K = 0.5 * (K + K.T)
    if not np.all(np.isfinite(K)):
        raise ValueError("kernel has infinite cell self-energy on this set (A1 fails)")
    w, info = solve_simplex_qp(K, tol=tol, max_iter=max_iter)
    w = np.clip(w, 0.0, None)
    w /= w.sum()
    base = QuadratureMeasure(nodes, w, "numerical", rho, d)
    info = dict(info, mesh_nodes=M, self_energy=float(K[0, 0]))
    return base, mesh.resolution, info


_DEFAULT_NODES = {"uniform-circle": 4096, "uniform-sphere": 4000, "arcsine": 4096}


def equilibrium_measure(
    A,
    k,
    n_nodes=None,
    resolution=None,
    tol=1e-3,
    check=True,
    solver_tol=1e-9,
    max_iter=50_000,
    method="auto",
):
    """Equilibrium measure of ``k`` on ``A``.

    Closed forms are used for the circle (Riesz ``0 < s < 1`` and log), the
    sphere (Riesz ``0 < s < 2``) and the interval (log, arcsine law); every
    other pair goes through the simplex-constrained quadratic program on a
    mesh. ``W_K`` is computed by quadrature in both branches. Pass
    ``method="numerical"`` to force the quadratic program.
    """
    if method not in ("auto", "numerical"):
        raise ValueError(f"method must be 'auto' or 'numerical', got {method!r}")
    if isinstance(k, ShiftedLog):
        k = k.for_set(A)
    if A.ambient_dim > 3:
        raise ValueError(f"unsupported ambient dimension {A.ambient_dim}")
    kind = _closed_form_kind(A, k) if method == "auto" else None
    info = {}
    if kind is not None:
        n = int(n_nodes or _DEFAULT_NODES[kind])
        base, res = _closed_form_base(A, kind, n)
        W = _zonal_constant(A, k, kind)
    else:
        kind = "numerical"
        if resolution is None:
            target = int(n_nodes or 600)
            resolution = (A.measure() / target) ** (1.0 / A.intrinsic_dim)
        base, res, info = _numerical_equilibrium(A, k, resolution, solver_tol, max_iter)
        W = energy(base, k)
    em = EquilibriumMeasure(base, float(W), kind, A, k, float(res), None, info)
    if check:
        report = assumption_check(em, k, A, tol=tol)
        em = EquilibriumMeasure(base, float(W), kind, A, k, float(res), report, info)
    return em


def _validation_points(A, res, factor):
    """Mesh with about ``factor`` times as many nodes as a ``res``-mesh."""
    fine = res / factor ** (1.0 / A.intrinsic_dim)
    return A.mesh(fine).nodes


def assumption_check(em, k, A, tol=1e-3, validation_factor=4.0, edge_margin=None):
    """Numeric evidence for the four standing assumptions.

    A1 finite energy; A2 uniqueness (theory for closed forms, unverified
    otherwise); A3 support is all of A (fraction of validation points near a
    positive-weight node); A4 constant potential ``W_K`` on A (max relative
    deviation on the validation mesh).
    """
    if isinstance(k, ShiftedLog):
        k = k.for_set(A)
    base = em.base
    items = []

    I = energy(base, k)
    a1_pass = math.isfinite(I)
    items.append(AssumptionStatus("A1", "pass" if a1_pass else "fail", I if a1_pass else None))

    if em.kind == "numerical":
        items.append(AssumptionStatus("A2", "unverified", None, {"basis": "not checked numerically"}))
    else:
        items.append(AssumptionStatus("A2", "pass", None, {"basis": "theory"}))

    V = _validation_points(A, em.resolution, validation_factor)
    tree_all = cKDTree(base.nodes)
    reach = float(tree_all.query(V)[0].max()) * (1.0 + 1e-9)
    floor = 1e-3 / base.n_nodes
    positive = base.weights >= floor
    dist = cKDTree(base.nodes[positive]).query(V)[0]
    frac = float(np.mean(dist <= reach))
    detail = {"reach": reach, "light_node_mass": float(base.weights[~positive].sum())}
    if isinstance(A, Ball):
        r = np.linalg.norm(base.nodes - np.asarray(A.center), axis=1)
        detail["interior_mass"] = float(base.weights[r < A.radius * (1 - 1e-9)].sum())
    items.append(AssumptionStatus("A3", "pass" if frac == 1.0 else "fail", frac, detail))

    if edge_margin is None and isinstance(A, Interval):
        edge_margin = 0.05 * A.diameter()
    if edge_margin and isinstance(A, Interval):
        x = V[:, 0]
        V = V[(x >= A.a + edge_margin) & (x <= A.b - edge_margin)]
    W = em.W_K
    if a1_pass and len(V):
        U = potential(base, k, V)
        dev = float(np.max(np.abs(U - W)) / abs(W)) if W != 0 else math.inf
        ok = W > 0 and dev <= tol
    else:
        dev, ok = math.inf, False
    items.append(
        AssumptionStatus("A4", "pass" if ok else "fail", dev if math.isfinite(dev) else None,
                         {"W_K": W, "tolerance": tol, "points": int(len(V))})
    )
    return AssumptionReport(tuple(items))


def sample(em, n, seed):
    """``n`` i.i.d. draws from the equilibrium measure; deterministic in ``seed``."""
    from .polarization import Configuration

    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    A = em.set
    if em.kind == "uniform-circle":
        pts = A.points_at(rng.uniform(0.0, 2 * np.pi, size=n))
    elif em.kind == "uniform-sphere":
        g = rng.standard_normal(size=(n, 3))
        g /= np.linalg.norm(g, axis=1)[:, None]
        pts = np.asarray(A.center) + A.radius * g
    elif em.kind == "arcsine":
        m, h = 0.5 * (A.a + A.b), 0.5 * (A.b - A.a)
        pts = (m + h * np.cos(np.pi * rng.uniform(size=n)))[:, None]
    else:
        idx = rng.choice(em.base.n_nodes, size=n, p=em.base.weights)
        pts = em.base.nodes[idx]
    return Configuration(pts)


def bl_distance(mu, nu, probes=64, seed=0):
    """Bounded-Lipschitz distance estimate over distance-to-anchor probes.

    Each probe is ``g_a(x) = min(|x - a|, D)`` with ``D`` the diameter of the
    joint bounding box and anchors drawn uniformly in that box. The result
    is a lower bound on the supremum over all 1-Lipschitz test functions.
    """
    if mu.ambient_dim != nu.ambient_dim:
        raise ValueError("measures live in different dimensions")
    both = np.vstack([mu.nodes, nu.nodes])
    lo, hi = both.min(axis=0), both.max(axis=0)
    D = float(np.linalg.norm(hi - lo))
    if D == 0.0:
        return 0.0
    rng = np.random.default_rng(seed)
    anchors = lo + (hi - lo) * rng.uniform(size=(int(probes), mu.ambient_dim))

    def integrals(m):
        g = np.minimum(cdist(anchors, m.nodes), D)
        return (g * m.weights[None, :]).sum(axis=1)

    return float(np.max(np.abs(integrals(mu) - integrals(nu))))
