"""Compact sets in R^t with meshing, projection, diameter and sampling.

Every set exposes the same small surface: ``mesh``, ``local_nodes`` (a patch
of nodes around a point, used by the hierarchical minimiser), ``project``,
``diameter``, ``sample_uniform`` and a few scalar descriptors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial.distance import cdist

__all__ = [
    "CompactSet",
    "Interval",
    "Circle",
    "Sphere2",
    "Ball",
    "CurveUnion",
    "ParametricCurve",
    "Mesh",
    "MeshCapacityError",
    "mesh",
    "project",
    "diameter",
    "fibonacci_sphere",
    "set_from_dict",
    "DEFAULT_MAX_NODES",
]

DEFAULT_MAX_NODES = 2_000_000
GOLDEN = (1.0 + 5.0**0.5) / 2.0


class MeshCapacityError(ValueError):
    """Requested resolution would exceed the configured node cap."""


def fibonacci_sphere(n):
    """``n`` near-uniform unit vectors in R^3 (offset Fibonacci lattice)."""
    i = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / n
    theta = 2.0 * np.pi * i / GOLDEN
    rxy = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.column_stack((rxy * np.cos(theta), rxy * np.sin(theta), z))


def _check_capacity(n, max_nodes):
    if n > max_nodes:
        raise MeshCapacityError(
            f"mesh would need {n} nodes, above the cap of {max_nodes}"
        )


def _clip_norm(v, radius):
    """Shrink rows of ``v`` by ulps until their computed norm is <= radius."""
    norms = np.linalg.norm(v, axis=-1)
    over = norms > radius
    while np.any(over):
        v[over] *= 1.0 - 2.0 ** -52
        norms = np.linalg.norm(v, axis=-1)
        over = norms > radius
    return v


@dataclass(frozen=True)
class Mesh:
    """Nodes of a compact set with a declared covering radius."""

    nodes: np.ndarray
    resolution: float
    set: "CompactSet" = field(repr=False)
    refine_factor: float = 2.0

    def __len__(self):
        return len(self.nodes)

    def refine(self, max_nodes=DEFAULT_MAX_NODES):
        return self.set.mesh(self.resolution / self.refine_factor, max_nodes=max_nodes)

    def to_csv(self, path):
        from .io import write_points_csv

        write_points_csv(path, self.nodes)


class CompactSet:
    """Common interface of the supported sets."""

    ambient_dim: int
    intrinsic_dim: int

    def diameter(self) -> float:
        raise NotImplementedError

    def measure(self) -> float:
        """Length/area/volume in the intrinsic dimension."""
        raise NotImplementedError

    def mesh(self, resolution, max_nodes=DEFAULT_MAX_NODES) -> Mesh:
        raise NotImplementedError

    def local_nodes(self, center, radius, resolution) -> np.ndarray:
        raise NotImplementedError

    def project(self, p) -> np.ndarray:
        raise NotImplementedError

    def sample_uniform(self, n, rng) -> np.ndarray:
        raise NotImplementedError

    def contains(self, p, rtol=1e-9):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        gap = np.linalg.norm(self.project(p) - p, axis=1)
        return gap <= rtol * self.diameter()

    def default_resolution(self, n_points=1):
        """Coarse resolution adapted to ``n_points`` spread over the set."""
        spacing = (self.measure() / max(int(n_points), 1)) ** (1.0 / self.intrinsic_dim)
        return min(self.diameter() / 8.0, spacing / 4.0)

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _as_points(self, p):
        arr = np.asarray(p, dtype=float)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if arr.shape[1] != self.ambient_dim:
            raise ValueError(
                f"points have dimension {arr.shape[1]}, set lives in R^{self.ambient_dim}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("points must be finite")
        return arr, single


@dataclass(frozen=True)
class Interval(CompactSet):
    a: float = -1.0
    b: float = 1.0

    ambient_dim = 1
    intrinsic_dim = 1

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"interval needs b > a, got [{self.a}, {self.b}]")

    def diameter(self):
        return float(self.b - self.a)

    def measure(self):
        return self.diameter()

    def mesh(self, resolution, max_nodes=DEFAULT_MAX_NODES):
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        n = int(math.ceil(self.diameter() / resolution - 1e-12)) + 1
        _check_capacity(n, max_nodes)
        x = np.linspace(self.a, self.b, n)
        return Mesh(x[:, None], float(resolution), self)

    def local_nodes(self, center, radius, resolution):
        c = float(np.asarray(center).ravel()[0])
        lo, hi = max(self.a, c - radius), min(self.b, c + radius)
        n = int(math.ceil((hi - lo) / resolution - 1e-12)) + 1
        return np.linspace(lo, hi, max(n, 2))[:, None]

    def project(self, p):
        arr, single = self._as_points(p)
        out = np.clip(arr, self.a, self.b)
        return out[0] if single else out

    def sample_uniform(self, n, rng):
        return rng.uniform(self.a, self.b, size=(n, 1))

    def to_dict(self):
        return {"kind": "interval", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Circle(CompactSet):
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    ambient_dim = 2
    intrinsic_dim = 1

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise ValueError("circle centre must have two coordinates")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def diameter(self):
        return 2.0 * self.radius

    def measure(self):
        return 2.0 * np.pi * self.radius

    def points_at(self, theta):
        theta = np.asarray(theta, dtype=float)
        c = np.asarray(self.center)
        return c + self.radius * np.column_stack((np.cos(theta), np.sin(theta)))

    def angle_of(self, p):
        p = np.atleast_2d(p) - np.asarray(self.center)
        return np.arctan2(p[:, 1], p[:, 0])

    def mesh(self, resolution, max_nodes=DEFAULT_MAX_NODES):
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        n = max(int(math.ceil(self.measure() / resolution - 1e-9)), 3)
        _check_capacity(n, max_nodes)
        theta = 2.0 * np.pi * np.arange(n) / n
        return Mesh(self.points_at(theta), float(resolution), self)

    def local_nodes(self, center, radius, resolution):
        t0 = self.angle_of(center)[0]
        half = min(radius / self.radius, np.pi)
        n = int(math.ceil(2 * half * self.radius / resolution)) + 1
        return self.points_at(t0 + np.linspace(-half, half, max(n, 3)))

    def project(self, p):
        arr, single = self._as_points(p)
        c = np.asarray(self.center)
        v = arr - c
        norms = np.linalg.norm(v, axis=1)
        # the centre is equidistant from every point; pick angle 0
        v = np.where(norms[:, None] > 0, v, np.array([1.0, 0.0]))
        norms = np.where(norms > 0, norms, 1.0)
        out = c + self.radius * v / norms[:, None]
        return out[0] if single else out

    def sample_uniform(self, n, rng):
        return self.points_at(rng.uniform(0.0, 2.0 * np.pi, size=n))

    def to_dict(self):
        return {"kind": "circle", "center": list(self.center), "radius": self.radius}


def _tangent_basis(n):
    """Two unit vectors orthogonal to unit vector ``n`` (R^3)."""
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v


def _sphere_count(radius, resolution):
    # Fibonacci cells are roughly hexagonal; a factor 2.25 over the disk-packing
    # count keeps the covering radius below the requested resolution
    return max(int(math.ceil(9.0 * radius**2 / resolution**2)), 4)


@dataclass(frozen=True)
class Sphere2(CompactSet):
    """Two-dimensional sphere in R^3."""

    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 1.0

    ambient_dim = 3
    intrinsic_dim = 2

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 3:
            raise ValueError("sphere centre must have three coordinates")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def diameter(self):
        return 2.0 * self.radius

    def measure(self):
        return 4.0 * np.pi * self.radius**2

    def mesh(self, resolution, max_nodes=DEFAULT_MAX_NODES):
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        n = _sphere_count(self.radius, resolution)
        _check_capacity(n, max_nodes)
        nodes = np.asarray(self.center) + self.radius * fibonacci_sphere(n)
        return Mesh(nodes, float(resolution), self)

    def local_nodes(self, center, radius, resolution):
        c = np.asarray(self.center)
        n = np.asarray(center, dtype=float).ravel() - c
        n /= np.linalg.norm(n)
        u, v = _tangent_basis(n)
        step = resolution * math.sqrt(2.0)
        k = int(math.ceil(radius / step))
        g = np.arange(-k, k + 1) * step / self.radius
        a, b = np.meshgrid(g, g, indexing="ij")
        pts = n + a.ravel()[:, None] * u + b.ravel()[:, None] * v
        pts /= np.linalg.norm(pts, axis=1)[:, None]
        return c + self.radius * pts

    def project(self, p):
        arr, single = self._as_points(p)
        c = np.asarray(self.center)
        v = arr - c
        norms = np.linalg.norm(v, axis=1)
        v = np.where(norms[:, None] > 0, v, np.array([0.0, 0.0, 1.0]))
        norms = np.where(norms > 0, norms, 1.0)
        out = c + self.radius * v / norms[:, None]
        return out[0] if single else out

    def sample_uniform(self, n, rng):
        g = rng.standard_normal(size=(n, 3))
        g /= np.linalg.norm(g, axis=1)[:, None]
        return np.asarray(self.center) + self.radius * g

    def to_dict(self):
        return {"kind": "sphere", "center": list(self.center), "radius": self.radius}


@lru_cache(maxsize=32)
def _integer_grid(t, k):
    g = np.arange(-k, k + 1, dtype=float)
    grids = np.meshgrid(*([g] * t), indexing="ij")
    out = np.column_stack([x.ravel() for x in grids])
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Ball(CompactSet):
    """Closed ball in R^t (t = 2 or 3 for meshing)."""

    center: Tuple[float, ...] = (0.0, 0.0, 0.0)
    radius: float = 1.0
    t: int = 3

    intrinsic_dim = property(lambda self: self.t)
    ambient_dim = property(lambda self: self.t)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != self.t:
            raise ValueError("ball centre length must equal t")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.t < 1:
            raise ValueError("t must be >= 1")

    def diameter(self):
        return 2.0 * self.radius

    def measure(self):
        return math.pi ** (self.t / 2) / math.gamma(self.t / 2 + 1) * self.radius**self.t

    def _shell(self, rho, resolution):
        if self.t == 2:
            n = max(int(math.ceil(2 * np.pi * rho / resolution)), 3)
            th = 2 * np.pi * np.arange(n) / n
            return rho * np.column_stack((np.cos(th), np.sin(th)))
        if self.t == 3:
            unit = fibonacci_sphere(_sphere_count(rho, resolution))
            return rho * unit
        raise ValueError(f"ball meshing supports t in (2, 3), got t={self.t}")

    def mesh(self, resolution, max_nodes=DEFAULT_MAX_NODES):
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        if self.t not in (2, 3):
            raise ValueError(f"ball meshing supports t in (2, 3), got t={self.t}")
        n_shells = max(int(math.ceil(self.radius / resolution)), 1)
        radii = self.radius * np.arange(1, n_shells + 1) / n_shells
        shell_res = 0.85 * resolution
        if self.t == 3:
            est = sum(_sphere_count(r, shell_res) for r in radii) + 1
        else:
            est = sum(max(int(math.ceil(2 * np.pi * r / shell_res)), 3) for r in radii) + 1
        _check_capacity(est, max_nodes)
        parts = [np.zeros((1, self.t))]
        for r in radii:
            parts.append(self._shell(r, shell_res))
        # exact axis points on the boundary shell
        axes = np.vstack([np.eye(self.t), -np.eye(self.t)]) * self.radius
        parts.append(axes)
        nodes = np.vstack(parts)
        nodes[1:-len(axes)] = _clip_norm(nodes[1:-len(axes)], self.radius)
        return Mesh(np.asarray(self.center) + nodes, float(resolution), self)

    def local_nodes(self, center, radius, resolution):
        c = np.asarray(center, dtype=float).ravel()
        step = 2.0 * resolution / math.sqrt(self.t)
        k = int(math.ceil(radius / step))
        return self.project(c + step * _integer_grid(self.t, k))

    def project(self, p):
        arr, single = self._as_points(p)
        c = np.asarray(self.center)
        v = arr - c
        norms = np.linalg.norm(v, axis=1)
        outside = norms > self.radius
        if np.any(outside):
            v[outside] = self.radius * v[outside] / norms[outside, None]
            v[outside] = _clip_norm(v[outside], self.radius)
        out = c + v
        return out[0] if single else out

    def sample_uniform(self, n, rng):
        g = rng.standard_normal(size=(n, self.t))
        g /= np.linalg.norm(g, axis=1)[:, None]
        r = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / self.t)
        return np.asarray(self.center) + r * g

    def to_dict(self):
        return {"kind": "ball", "center": list(self.center), "radius": self.radius, "t": self.t}


@dataclass(frozen=True)
class ParametricCurve:
    """Closed planar curve ``gamma: [0, 1) -> R^2`` (periodic)."""

    func: Callable[[np.ndarray], np.ndarray]
    descriptor: dict = field(default_factory=dict, compare=False)

    def __call__(self, t):
        return np.asarray(self.func(np.asarray(t, dtype=float)), dtype=float)

    @classmethod
    def ellipse(cls, center=(0.0, 0.0), axes=(1.0, 1.0), angle=0.0):
        cx, cy = (float(v) for v in center)
        a, b = (float(v) for v in axes)
        ca, sa = math.cos(angle), math.sin(angle)

        def gamma(t):
            u = 2 * np.pi * t
            x, y = a * np.cos(u), b * np.sin(u)
            return np.column_stack((cx + ca * x - sa * y, cy + sa * x + ca * y))

        return cls(gamma, {"type": "ellipse", "center": [cx, cy], "axes": [a, b], "angle": angle})

    @classmethod
    def circle(cls, center=(0.0, 0.0), radius=1.0):
        curve = cls.ellipse(center, (radius, radius))
        return cls(curve.func, {"type": "circle", "center": list(center), "radius": radius})


_CURVE_SAMPLES = 4096


@dataclass(frozen=True)
class CurveUnion(CompactSet):
    """Finite union of disjoint closed parametric curves in the plane."""

    curves: Tuple[ParametricCurve, ...]

    ambient_dim = 2
    intrinsic_dim = 1

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(self.curves))
        if not self.curves:
            raise ValueError("CurveUnion needs at least one curve")
        samples = self._samples()
        # polyline spacing: crossing curves come closer than this at some sample pair
        spacing = [np.linalg.norm(np.diff(s_, axis=0, append=s_[:1]), axis=1).max() for s_ in samples]
        for i in range(len(samples)):
            for j in range(i + 1, len(samples)):
                gap = cdist(samples[i], samples[j]).min()
                if not gap > max(spacing[i], spacing[j]):
                    raise ValueError(f"curves {i} and {j} intersect or touch (gap {gap:.3g})")
        if not self.diameter() > 0:
            raise ValueError("CurveUnion has zero diameter")

    def _samples(self, n=_CURVE_SAMPLES):
        t = np.arange(n) / n
        return [c(t) for c in self.curves]

    def _max_speed(self, curve):
        n = _CURVE_SAMPLES
        pts = curve(np.arange(n + 1) / n)
        return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).max() * n)

    def diameter(self):
        return self.diameter_with_error()[0]

    def diameter_with_error(self, n=1024):
        """Max pairwise distance on a parametric mesh and a covering-based error bound."""
        pts = np.vstack([c(np.arange(n) / n) for c in self.curves])
        best = 0.0
        for i in range(0, len(pts), 512):
            d = np.sqrt(((pts[i : i + 512, None, :] - pts[None, :, :]) ** 2).sum(-1))
            best = max(best, float(d.max()))
        err = max(self._max_speed(c) for c in self.curves) / n
        return best, err

    def measure(self):
        total = 0.0
        for pts in self._samples():
            closed = np.vstack([pts, pts[:1]])
            total += float(np.linalg.norm(np.diff(closed, axis=0), axis=1).sum())
        return total

    def mesh(self, resolution, max_nodes=DEFAULT_MAX_NODES):
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        counts = [max(int(math.ceil(self._max_speed(c) / resolution)), 3) for c in self.curves]
        _check_capacity(sum(counts), max_nodes)
        nodes = np.vstack([c(np.arange(n) / n) for c, n in zip(self.curves, counts)])
        return Mesh(nodes, float(resolution), self)

    def _locate(self, p):
        """Index of the nearest curve and parameter of the nearest point."""
        best = (np.inf, 0, 0.0)
        t = np.arange(_CURVE_SAMPLES) / _CURVE_SAMPLES
        for idx, c in enumerate(self.curves):
            pts = c(t)
            d = np.linalg.norm(pts - p, axis=1)
            j = int(np.argmin(d))
            if d[j] < best[0]:
                best = (d[j], idx, t[j])
        _, idx, t0 = best
        curve = self.curves[idx]
        h = 1.0 / _CURVE_SAMPLES
        res = minimize_scalar(
            lambda s: float(np.linalg.norm(curve(np.array([s]))[0] - p)),
            bounds=(t0 - h, t0 + h),
            method="bounded",
            options={"xatol": 1e-13},
        )
        return idx, float(res.x) % 1.0

    def local_nodes(self, center, radius, resolution):
        idx, t0 = self._locate(np.asarray(center, dtype=float).ravel())
        curve = self.curves[idx]
        speed = self._max_speed(curve)
        half = radius / speed
        n = int(math.ceil(2 * radius / resolution)) + 1
        return curve(t0 + np.linspace(-half, half, max(n, 3)))

    def project(self, p):
        arr, single = self._as_points(p)
        out = np.empty_like(arr)
        for i, q in enumerate(arr):
            idx, t = self._locate(q)
            out[i] = self.curves[idx](np.array([t]))[0]
        return out[0] if single else out

    def sample_uniform(self, n, rng):
        # uniform in arc length via the dense parametric sample
        pts = np.vstack(self._samples())
        return pts[rng.integers(0, len(pts), size=n)]

    def to_dict(self):
        return {"kind": "curves", "curves": [c.descriptor for c in self.curves]}


def mesh(compact_set, target_resolution, max_nodes=DEFAULT_MAX_NODES):
    return compact_set.mesh(target_resolution, max_nodes=max_nodes)


def project(compact_set, p):
    return compact_set.project(p)


def diameter(compact_set):
    return compact_set.diameter()


def set_from_dict(desc):
    """Parse a set descriptor from an experiment config."""
    kind = str(desc.get("kind", "")).lower()
    if kind == "interval":
        return Interval(float(desc.get("a", -1.0)), float(desc.get("b", 1.0)))
    if kind == "circle":
        return Circle(tuple(desc.get("center", (0.0, 0.0))), float(desc.get("radius", 1.0)))
    if kind in ("sphere", "sphere2"):
        return Sphere2(tuple(desc.get("center", (0.0, 0.0, 0.0))), float(desc.get("radius", 1.0)))
    if kind == "ball":
        t = int(desc.get("t", len(desc.get("center", (0.0, 0.0, 0.0)))))
        center = tuple(desc.get("center", (0.0,) * t))
        return Ball(center, float(desc.get("radius", 1.0)), t)
    if kind in ("curves", "curveunion", "curve_union"):
        curves = []
        for c in desc["curves"]:
            ctype = c.get("type", "ellipse")
            if ctype == "circle":
                curves.append(ParametricCurve.circle(tuple(c.get("center", (0, 0))), float(c["radius"])))
            elif ctype == "ellipse":
                curves.append(
                    ParametricCurve.ellipse(
                        tuple(c.get("center", (0, 0))),
                        tuple(c.get("axes", (1, 1))),
                        float(c.get("angle", 0.0)),
                    )
                )
            else:
                raise ValueError(f"unknown curve type {ctype!r}")
        return CurveUnion(tuple(curves))
    raise ValueError(f"unknown set kind {desc.get('kind')!r}")
