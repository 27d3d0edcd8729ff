"""Radial kernels ``K(x, y) = f(|x - y|)``.

Two families are supported: Riesz ``f(r) = r**-s`` and the shifted logarithm
``f(r) = -log(c r)``. Both return ``+inf`` at ``r = 0``; that value is never
replaced by a large float so coincident points stay detectable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "Kernel",
    "Riesz",
    "ShiftedLog",
    "TruncatedKernel",
    "kernel_from_dict",
    "pairwise_distances",
]


def pairwise_distances(X, Y):
    """Euclidean distance matrix between rows of ``X`` (n, t) and ``Y`` (m, t)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    diff = X[:, None, :] - Y[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


_GL_NODES, _GL_WEIGHTS = _gauss_legendre(48)


class Kernel:
    """Base class. Subclasses implement ``f``, ``df`` and ``radial_moment``."""

    name = "kernel"

    def f(self, r):
        raise NotImplementedError

    def df(self, r):
        raise NotImplementedError

    def radial_moment(self, r, dim):
        """``int_0^r f(u) u**(dim-1) du``; ``inf`` when the integral diverges."""
        raise NotImplementedError

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = float(np.sqrt(np.sum((x - y) ** 2)))
        return float(self.f(np.array([r]))[0])

    def matrix(self, X, Y):
        return self.f(pairwise_distances(X, Y))

    def grad_x(self, X, Y):
        """Gradient of ``K(x, y)`` with respect to ``x`` for paired rows.

        Returns an array of shape (n, m, t) with ``f'(r) (x - y) / r``;
        coincident pairs give zero (they are excluded from energies anyway).
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        diff = X[:, None, :] - Y[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, self.df(np.where(r > 0, r, 1.0)) / np.where(r > 0, r, 1.0), 0.0)
        return scale[:, :, None] * diff

    def cell_average(self, delta, rho, dim):
        """Mean of ``f(|x - y|)`` for ``y`` uniform on a flat ``dim``-ball.

        ``delta`` is the distance from ``x`` to the ball centre and ``rho`` its
        radius (broadcast together). Used to smear quadrature nodes that sit
        close to the evaluation point.
        """
        delta, rho = np.broadcast_arrays(
            np.asarray(delta, dtype=float), np.asarray(rho, dtype=float)
        )
        shape = delta.shape
        if not np.isfinite(self.radial_moment(np.array([1.0]), dim)[0]):
            return np.full(shape, np.inf)
        delta = delta.ravel()
        rho = rho.ravel()
        out = np.empty_like(delta)
        inside = delta < rho
        if dim == 1:
            H = lambda r: self.radial_moment(r, 1)  # noqa: E731
            d, p = delta[inside], rho[inside]
            out[inside] = (H(p + d) + H(p - d)) / (2 * p)
            d, p = delta[~inside], rho[~inside]
            out[~inside] = (H(d + p) - H(d - p)) / (2 * p)
            return out.reshape(shape)
        if dim not in (2, 3):
            raise ValueError(f"cell dimension must be 1, 2 or 3, got {dim}")
        volume = np.pi * rho**2 if dim == 2 else 4.0 / 3.0 * np.pi * rho**3
        u, w = _GL_NODES, _GL_WEIGHTS
        if inside.any():
            d = delta[inside][:, None]
            p = rho[inside][:, None]
            theta = np.pi * u[None, :]
            r_hi = -d * np.cos(theta) + np.sqrt(p**2 - (d * np.sin(theta)) ** 2)
            integrand = self.radial_moment(r_hi, dim)
            if dim == 2:
                total = 2 * np.pi * integrand @ w
            else:
                total = 2 * np.pi * np.pi * (integrand * np.sin(theta)) @ w
            out[inside] = total / volume[inside]
        if (~inside).any():
            d = delta[~inside][:, None]
            p = rho[~inside][:, None]
            theta_max = np.arcsin(np.clip(p / d, 0.0, 1.0))
            # theta = theta_max (1 - v^2) removes the square-root endpoint
            theta = theta_max * (1.0 - u[None, :] ** 2)
            jac = 2.0 * theta_max * u[None, :]
            root = np.sqrt(np.clip(p**2 - (d * np.sin(theta)) ** 2, 0.0, None))
            r_lo = d * np.cos(theta) - root
            r_hi = d * np.cos(theta) + root
            integrand = (self.radial_moment(r_hi, dim) - self.radial_moment(r_lo, dim)) * jac
            if dim == 2:
                total = 2.0 * integrand @ w
            else:
                total = 2 * np.pi * (integrand * np.sin(theta)) @ w
            out[~inside] = total / volume[~inside]
        return out.reshape(shape)

    def minorant(self, delta):
        return TruncatedKernel(self, delta)

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Riesz(Kernel):
    """Riesz kernel ``|x - y|**-s`` with ``s > 0``."""

    s: float
    name = "riesz"

    def __post_init__(self):
        if not (self.s > 0 and math.isfinite(self.s)):
            raise ValueError(f"Riesz exponent must be positive, got {self.s}")

    def f(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(r > 0, np.power(np.where(r > 0, r, 1.0), -self.s), np.inf)

    def df(self, r):
        r = np.asarray(r, dtype=float)
        return -self.s * np.power(r, -self.s - 1.0)

    def radial_moment(self, r, dim):
        r = np.asarray(r, dtype=float)
        if self.s >= dim:
            return np.full_like(r, np.inf)
        return np.power(np.clip(r, 0.0, None), dim - self.s) / (dim - self.s)

    def to_dict(self):
        return {"kind": "riesz", "s": self.s}


@dataclass(frozen=True)
class ShiftedLog(Kernel):
    """Logarithmic kernel ``-log(c |x - y|)``.

    ``c`` may be left as ``None`` and resolved against a set with
    :meth:`for_set`, which picks ``1 / (2 diam A)``.
    """

    c: Optional[float] = None
    name = "log"

    def __post_init__(self):
        if self.c is not None and not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"log kernel constant must be positive, got {self.c}")

    def _c(self):
        if self.c is None:
            raise ValueError("ShiftedLog.c is unresolved; call for_set() first")
        return self.c

    def for_set(self, compact_set):
        if self.c is not None:
            return self
        return ShiftedLog(1.0 / (2.0 * compact_set.diameter()))

    def f(self, r):
        r = np.asarray(r, dtype=float)
        c = self._c()
        with np.errstate(divide="ignore"):
            return np.where(r > 0, -np.log(c * np.where(r > 0, r, 1.0)), np.inf)

    def df(self, r):
        return -1.0 / np.asarray(r, dtype=float)

    def radial_moment(self, r, dim):
        r = np.clip(np.asarray(r, dtype=float), 0.0, None)
        c = self._c()
        with np.errstate(divide="ignore", invalid="ignore"):
            val = r**dim / dim * (-np.log(c * r) + 1.0 / dim)
        return np.where(r > 0, val, 0.0)

    def to_dict(self):
        return {"kind": "log", "c": self.c}


class TruncatedKernel(Kernel):
    """Continuous minorant ``f_delta(r) = min(f(r), f(delta))``.

    For decreasing ``f`` this is ``f(max(r, delta))``; it increases to ``f``
    pointwise as ``delta`` shrinks.
    """

    def __init__(self, base, delta):
        if not delta > 0:
            raise ValueError("delta must be positive")
        self.base = base
        self.delta = float(delta)
        self.name = f"{base.name}-truncated"

    def f(self, r):
        r = np.asarray(r, dtype=float)
        return np.minimum(self.base.f(r), self.base.f(np.full_like(r, self.delta)))

    def df(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r > self.delta, self.base.df(np.maximum(r, self.delta)), 0.0)

    def __repr__(self):
        return f"TruncatedKernel({self.base!r}, delta={self.delta})"


def kernel_from_dict(desc):
    """Build a kernel from ``{"kind": "riesz", "s": ...}`` or ``{"kind": "log", "c": ...}``."""
    kind = str(desc.get("kind", "")).lower()
    if kind == "riesz":
        return Riesz(float(desc["s"]))
    if kind in ("log", "shiftedlog", "shifted_log"):
        c = desc.get("c")
        return ShiftedLog(None if c is None else float(c))
    raise ValueError(f"unknown kernel kind {desc.get('kind')!r}")
