"""Scenario container and the catalog of manufactured solutions.

Every catalog entry carries a closed-form u together with the data it
induces: G = u_tt - div(A grad u), f = u on the boundary, u0, u1.
Sources are of the separable form g(x) * cos(omega t) (or zero), so their
time derivatives at t = 0 are available in closed form for the
compatibility hierarchy.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .coefficients import CoefficientField
from .fields import InitialData, sample_boundary
from .geometry import Domain, SpatialGrid

PI = np.pi


class ScenarioError(ValueError):
    pass


def _zero(*X):
    return np.zeros(np.broadcast(*X).shape)


@dataclass
class Scenario:
    """Complete data set for one initial/boundary value problem."""

    name: str
    params: dict
    grid: SpatialGrid
    A: CoefficientField
    initial: InitialData
    f: Callable  # f(*X, t) on the boundary
    G: Callable | None = None  # G(*X, t); None means zero source
    G_t0: Callable | None = None  # (k, *X) -> d^k G / dt^k at t = 0
    exact: Callable | None = None  # u(*X, t)
    exact_t: Callable | None = None
    exact_grad: Callable | None = None  # (*X, t) -> list of partials
    f_t: Callable | None = None
    zero_data: bool = field(default=False)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def T(self) -> float:
        return self.grid.T

    def source(self, t: float) -> np.ndarray:
        if self.G is None:
            return np.zeros(self.grid.shape)
        return np.broadcast_to(self.G(*self.grid.mesh(), t), self.grid.shape)

    def source_derivative_t0(self, k: int) -> np.ndarray:
        X = self.grid.mesh()
        if self.G is None:
            return np.zeros(self.grid.shape)
        if self.G_t0 is None:
            raise ScenarioError(f"scenario {self.name!r} has no closed-form source derivatives")
        return np.broadcast_to(self.G_t0(k, *X), self.grid.shape)

    def boundary_field(self, times):
        return sample_boundary(self.f, self.grid, times, self.f_t)

    @property
    def homogeneous(self) -> bool:
        """True when f = 0 and G = 0."""
        return self.zero_data

    def descriptor(self) -> dict:
        return {"name": self.name, "params": self.params,
                "bounds": [list(b) for b in self.grid.domain.bounds],
                "T": self.T, "cells": list(self.grid.cells)}

    def digest(self) -> str:
        blob = json.dumps(self.descriptor(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()

    def check_compatibility(self, tol: float = 1e-10) -> float:
        """Max |u0 - f(., 0)| on boundary nodes; raises above tol."""
        mask = self.grid.boundary_mask()
        X = self.grid.mesh()
        f0 = np.broadcast_to(self.f(*X, 0.0), self.grid.shape)
        gap = float(np.max(np.abs(self.initial.u0[mask] - f0[mask]), initial=0.0))
        scale = 1.0 + float(np.max(np.abs(self.initial.u0), initial=0.0))
        if gap > tol * scale:
            raise ScenarioError(f"order-zero compatibility violated: |u0 - f(.,0)| = {gap:.3e}")
        return gap


def _cos_derivs(omega: float):
    """k -> d^k/dt^k cos(omega t) at t = 0."""
    return lambda k: omega ** k * np.cos(k * PI / 2)


def _from_exact(name, params, grid, A, u, ut, grad, G=None, g_space=None, omega=0.0,
                zero_data=False):
    X = grid.mesh()
    initial = InitialData(np.asarray(np.broadcast_to(u(*X, 0.0), grid.shape), dtype=complex),
                          np.asarray(np.broadcast_to(ut(*X, 0.0), grid.shape), dtype=complex))
    G_t0 = None
    if g_space is not None:
        d = _cos_derivs(omega)
        G_t0 = lambda k, *Y: d(k) * g_space(*Y)
    return Scenario(name, params, grid, A, initial, f=u, G=G, G_t0=G_t0, exact=u,
                    exact_t=ut, exact_grad=grad, f_t=ut, zero_data=zero_data)


def _grid(dim, N, T, bounds=None):
    if bounds is None:
        bounds = ((0.0, 1.0),) * dim
    return SpatialGrid(Domain(tuple(bounds), float(T)), N)


def bump(r, width):
    """C-infinity bump exp(1 - 1/(1 - (r/width)^2)), peak 1, support |r| < width."""
    s = np.asarray(r, dtype=float) / width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def bump_prime(r, width):
    s = np.asarray(r, dtype=float) / width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si ** 2)) * (-2.0 * si / (1.0 - si ** 2) ** 2) / width
    return out


def _standing(dim, N, T, **_):
    grid = _grid(dim, N, T)
    A = CoefficientField.from_family(grid, "identity")
    if dim == 1:
        u = lambda x, t: np.sin(PI * x) * np.cos(PI * t)
        ut = lambda x, t: -PI * np.sin(PI * x) * np.sin(PI * t)
        grad = lambda x, t: [PI * np.cos(PI * x) * np.cos(PI * t)]
    else:
        w = np.sqrt(2.0) * PI
        u = lambda x, y, t: np.sin(PI * x) * np.sin(PI * y) * np.cos(w * t)
        ut = lambda x, y, t: -w * np.sin(PI * x) * np.sin(PI * y) * np.sin(w * t)
        grad = lambda x, y, t: [PI * np.cos(PI * x) * np.sin(PI * y) * np.cos(w * t),
                                PI * np.sin(PI * x) * np.cos(PI * y) * np.cos(w * t)]
    return _from_exact("standing", {"dim": dim, "N": N, "T": T}, grid, A, u, ut, grad,
                       zero_data=True)


def _variable_a(dim, N, T, amplitude=0.5, **_):
    if dim != 1:
        raise ScenarioError("variable-a is a 1D scenario")
    a = float(amplitude)
    grid = _grid(1, N, T)
    A = CoefficientField.from_family(grid, "sine-scalar", amplitude=a)
    u = lambda x, t: np.sin(PI * x) * np.cos(PI * t)
    ut = lambda x, t: -PI * np.sin(PI * x) * np.sin(PI * t)
    grad = lambda x, t: [PI * np.cos(PI * x) * np.cos(PI * t)]
    g = lambda x: -a * PI ** 2 * np.cos(2 * PI * x)
    G = lambda x, t: g(x) * np.cos(PI * t)
    return _from_exact("variable-a", {"N": N, "T": T, "amplitude": a}, grid, A, u, ut, grad,
                       G=G, g_space=g, omega=PI)


def _variable_a_boundary(dim, N, T, amplitude=0.5, phase=0.25, **_):
    """sin(pi x + phase*pi) cos(pi t): nonzero Dirichlet data and conormal trace."""
    if dim != 1:
        raise ScenarioError("variable-a-boundary is a 1D scenario")
    a = float(amplitude)
    p = PI * float(phase)
    grid = _grid(1, N, T)
    A = CoefficientField.from_family(grid, "sine-scalar", amplitude=a)
    u = lambda x, t: np.sin(PI * x + p) * np.cos(PI * t)
    ut = lambda x, t: -PI * np.sin(PI * x + p) * np.sin(PI * t)
    grad = lambda x, t: [PI * np.cos(PI * x + p) * np.cos(PI * t)]
    g = lambda x: -a * PI ** 2 * np.cos(2 * PI * x + p)
    G = lambda x, t: g(x) * np.cos(PI * t)
    return _from_exact("variable-a-boundary", {"N": N, "T": T, "amplitude": a,
                                               "phase": float(phase)},
                       grid, A, u, ut, grad, G=G, g_space=g, omega=PI)


def _traveling(dim, N, T, **_):
    if dim != 1:
        raise ScenarioError("traveling is a 1D scenario")
    grid = _grid(1, N, T)
    A = CoefficientField.from_family(grid, "identity")
    u = lambda x, t: np.exp(1j * PI * (x - t))
    ut = lambda x, t: -1j * PI * np.exp(1j * PI * (x - t))
    grad = lambda x, t: [1j * PI * np.exp(1j * PI * (x - t))]
    return _from_exact("traveling", {"N": N, "T": T}, grid, A, u, ut, grad)


def _gaussian_bump(dim, N, T, center=0.5, width=0.1, **_):
    """Compactly supported bump at rest, zero boundary data and source.

    In 1D the exact solution is d'Alembert's formula applied to the odd,
    2-periodic extension of the profile (reflections at x = 0, 1).
    """
    grid = _grid(dim, N, T)
    A = CoefficientField.from_family(grid, "identity")
    c, w = float(center), float(width)
    params = {"dim": dim, "N": N, "T": T, "center": c, "width": w}
    if dim == 1:
        shifts = range(-int(np.ceil(T)) - 2, int(np.ceil(T)) + 3)

        def F(x):
            out = np.zeros_like(np.asarray(x, dtype=float))
            for k in shifts:
                out = out + bump(x - c - 2 * k, w) - bump(-x - c - 2 * k, w)
            return out

        def Fp(x):
            out = np.zeros_like(np.asarray(x, dtype=float))
            for k in shifts:
                out = out + bump_prime(x - c - 2 * k, w) + bump_prime(-x - c - 2 * k, w)
            return out

        u = lambda x, t: 0.5 * (F(x - t) + F(x + t))
        ut = lambda x, t: 0.5 * (-Fp(x - t) + Fp(x + t))
        grad = lambda x, t: [0.5 * (Fp(x - t) + Fp(x + t))]
        return _from_exact("gaussian-bump", params, grid, A, u, ut, grad, zero_data=True)
    X = grid.mesh()
    r = np.sqrt((X[0] - c) ** 2 + (X[1] - c) ** 2)
    initial = InitialData(bump(r, w).astype(complex), np.zeros(grid.shape, dtype=complex))
    return Scenario("gaussian-bump", params, grid, A, initial, f=_zero, zero_data=True)


def _anisotropic_2d(dim, N, T, angle=0.4, values=(1.5, 0.75), **_):
    grid = _grid(2, N, T)
    A = CoefficientField.from_family(grid, "rotated-diag", angle=angle, values=values)
    M = A.at((0, 0))
    a11, a12, a22 = M[0, 0], M[0, 1], M[1, 1]
    w = PI * np.sqrt(a11 + a22)
    u = lambda x, y, t: np.sin(PI * x) * np.sin(PI * y) * np.cos(w * t)
    ut = lambda x, y, t: -w * np.sin(PI * x) * np.sin(PI * y) * np.sin(w * t)
    grad = lambda x, y, t: [PI * np.cos(PI * x) * np.sin(PI * y) * np.cos(w * t),
                            PI * np.sin(PI * x) * np.cos(PI * y) * np.cos(w * t)]
    g = lambda x, y: -2 * a12 * PI ** 2 * np.cos(PI * x) * np.cos(PI * y)
    G = lambda x, y, t: g(x, y) * np.cos(w * t)
    return _from_exact("anisotropic-2d", {"N": N, "T": T, "angle": float(angle),
                                          "values": [float(v) for v in values]},
                       grid, A, u, ut, grad, G=G, g_space=g, omega=w)


def _zero_scenario(dim, N, T, **_):
    grid = _grid(dim, N, T)
    A = CoefficientField.from_family(grid, "identity")
    z = np.zeros(grid.shape, dtype=complex)
    zg = lambda *X: [_zero(*X)] * dim
    return Scenario("zero", {"dim": dim, "N": N, "T": T}, grid, A, InitialData(z, z.copy()),
                    f=_zero, G=None, G_t0=lambda k, *X: _zero(*X), exact=_zero,
                    exact_t=_zero, exact_grad=zg, f_t=_zero, zero_data=True)


CATALOG = {
    "zero": _zero_scenario,
    "standing": _standing,
    "variable-a": _variable_a,
    "variable-a-boundary": _variable_a_boundary,
    "traveling": _traveling,
    "gaussian-bump": _gaussian_bump,
    "anisotropic-2d": _anisotropic_2d,
}


def manufactured(name: str, N=256, T: float = 1.0, dim: int = 1, **params) -> Scenario:
    """Build a catalog scenario on a uniform grid with N cells per axis."""
    try:
        builder = CATALOG[name]
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}; known: {sorted(CATALOG)}") from None
    s = builder(dim, N, T, **params)
    s.check_compatibility()
    return s


def linear_combination(alpha, s1: Scenario, beta, s2: Scenario) -> Scenario:
    """Scenario whose data are alpha * data(s1) + beta * data(s2) (same grid)."""
    if s1.grid.shape != s2.grid.shape or s1.grid.domain != s2.grid.domain:
        raise ScenarioError("scenarios must share a grid")
    if not np.array_equal(s1.A.matrices, s2.A.matrices):
        raise ScenarioError("scenarios must share the coefficient field")

    def comb(p, q):
        if p is None and q is None:
            return None
        p = p or _zero
        q = q or _zero
        return lambda *X: alpha * p(*X) + beta * q(*X)

    init = InitialData(alpha * s1.initial.u0 + beta * s2.initial.u0,
                       alpha * s1.initial.u1 + beta * s2.initial.u1)
    G_t0 = None
    if s1.G_t0 is not None and s2.G_t0 is not None:
        G_t0 = lambda k, *X: alpha * s1.G_t0(k, *X) + beta * s2.G_t0(k, *X)
    return Scenario(f"{alpha}*{s1.name}+{beta}*{s2.name}",
                    {"alpha": complex(alpha).__repr__(), "beta": complex(beta).__repr__(),
                     "s1": s1.descriptor(), "s2": s2.descriptor()},
                    s1.grid, s1.A, init, f=comb(s1.f, s2.f), G=comb(s1.G, s2.G), G_t0=G_t0,
                    exact=comb(s1.exact, s2.exact), exact_t=comb(s1.exact_t, s2.exact_t),
                    f_t=comb(s1.f_t, s2.f_t), zero_data=s1.zero_data and s2.zero_data)
