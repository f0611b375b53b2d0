"""Traces on graph surfaces, generalized and horizontal energies, the
conormal derivative on the lateral boundary, and a-priori bound reports.

Energies are integrated cell by cell: on every cell the traced profile is
differenced across the cell (second order at the cell centre), while |u_t|^2,
A and grad S are taken per cell.  A cell contributes with the fraction of
its area lying above the cut level tau, so kinks of S (which sit on cell
interfaces) never need a gradient.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientField, a_norm_sq
from .fields import SpaceTimeField, column_integral, sample_columns, slice_at_time, time_derivative
from .geometry import (CAUSAL_TOL, Hypersurface, cell_average, cell_fraction_above,
                       cell_gradient, classify)

log = logging.getLogger(__name__)


class EnergyError(ValueError):
    pass


@dataclass
class TraceData:
    """(u, u_t, bulk grad u, surface grad u(x, S(x))) at every node x_i."""

    surface: Hypersurface
    tau: float
    u: np.ndarray
    ut: np.ndarray
    bulk_grad: np.ndarray  # (*shape, dim)
    surface_grad: np.ndarray  # (*shape, dim)
    mask: np.ndarray  # nodes with S(x) >= tau

    def chain_rule_discrepancy(self) -> float:
        """max |surface grad - (bulk grad + grad S u_t)| away from kinks."""
        gS = self.surface.nodal_gradients()
        diff = self.surface_grad - (self.bulk_grad + gS * self.ut[..., None])
        ok = np.ones(self.u.shape, dtype=bool)
        for k in self.surface.kink_set:
            ok[k] = False
        return float(np.max(np.abs(diff[ok]), initial=0.0))


def _column_index(shape, axis, offset):
    """Flat index of the node shifted by `offset` along `axis` (clipped)."""
    idx = np.indices(shape)
    idx[axis] = np.clip(idx[axis] + offset, 0, shape[axis] - 1)
    return np.ravel_multi_index(tuple(idx), shape)


def _check_range(u: SpaceTimeField, S: Hypersurface):
    if S.grid.shape != u.grid.shape:
        raise EnergyError("surface and field live on different grids")
    if S.values.max() > u.grid.T + 1e-12 or S.values.min() < -1e-12:
        raise EnergyError("S(x) outside [0, T]")


def trace(u: SpaceTimeField, S: Hypersurface, tau: float = 0.0, order: int = 3) -> TraceData:
    grid = u.grid
    _check_range(u, S)
    t = S.values
    U, Ut = sample_columns(u.values, u.dt, t, order=order)
    bulk = np.zeros(grid.shape + (grid.dim,), dtype=complex)
    for k, h in enumerate(grid.h):
        P = {m: sample_columns(u.values, u.dt, t, _column_index(grid.shape, k, m), order)[0]
             for m in (-2, -1, 1, 2)}
        P[0] = U
        d = (P[1] - P[-1]) / (2 * h)
        lo = [slice(None)] * grid.dim
        lo[k] = 0
        hi = list(lo)
        hi[k] = -1
        d[tuple(lo)] = ((-3 * P[0] + 4 * P[1] - P[2]) / (2 * h))[tuple(lo)]
        d[tuple(hi)] = ((3 * P[0] - 4 * P[-1] + P[-2]) / (2 * h))[tuple(hi)]
        bulk[..., k] = d
    surf = np.stack([np.gradient(U, h, axis=k, edge_order=2) for k, h in enumerate(grid.h)],
                    axis=-1)
    return TraceData(S, float(tau), U, Ut, bulk, surf, S.values >= tau - 1e-12)


def _u_t_weight(S: Hypersurface, A: CoefficientField, tol: float = CAUSAL_TOL) -> np.ndarray:
    """Per-cell 1 - |grad S|_A^2; exactly 0 on lightlike cells."""
    g = S.cell_gradients
    slope2 = a_norm_sq(A.cell_matrices(), g)
    w = 1.0 - slope2
    w[np.abs(1.0 - np.sqrt(slope2)) <= tol] = 0.0
    return w


def energy_density_cells(U, Ut, S: Hypersurface, A: CoefficientField) -> np.ndarray:
    """Per-cell |grad(U)|_A^2 + (1 - |grad S|_A^2)|u_t|^2 (times nothing)."""
    grid = S.grid
    gU = cell_gradient(U, grid.h)
    grad_part = a_norm_sq(A.cell_matrices(), gU)
    ut2 = cell_average(np.abs(Ut) ** 2, grid.dim)
    return grad_part + _u_t_weight(S, A) * ut2


def _require_non_timelike(S, A):
    cls = classify(S, A)
    if not cls.non_timelike:
        raise EnergyError("energy undefined for timelike Γ_S")
    return cls


def surface_energy(tr: TraceData, S: Hypersurface, A: CoefficientField,
                   tau: float | None = None) -> float:
    """Generalized energy over the part of the surface at height >= tau (all if None)."""
    _require_non_timelike(S, A)
    dens = energy_density_cells(tr.u, tr.ut, S, A)
    vol = S.grid.cell_volume
    if tau is None:
        return float(np.sum(dens) * vol)
    frac = cell_fraction_above(S.values, tau, S.grid.dim)
    if not frac.any():
        log.warning("empty surface region above tau=%g", tau)
    return float(np.sum(dens * frac) * vol)


def partial_energy(u: SpaceTimeField, S: Hypersurface, A: CoefficientField, tau: float) -> float:
    if not -1e-12 <= tau <= u.grid.T + 1e-12:
        raise EnergyError("tau outside [0, T]")
    return surface_energy(trace(u, S, tau), S, A, tau)


def generalized_energy(u: SpaceTimeField, S: Hypersurface, A: CoefficientField) -> float:
    return surface_energy(trace(u, S), S, A)


def classical_energy(u0, u1, A: CoefficientField, region_fraction=None) -> float:
    """Integral of |grad u0|_A^2 + |u1|^2 with the same cell quadrature."""
    grid = A.grid
    flat = Hypersurface.constant(grid, 0.0)
    dens = energy_density_cells(u0, u1, flat, A)
    if region_fraction is not None:
        dens = dens * region_fraction
    return float(np.sum(dens) * grid.cell_volume)


def horizontal_energy(u: SpaceTimeField, A: CoefficientField, S: Hypersurface, tau: float) -> float:
    """Classical energy on the slice t = tau restricted to {S >= tau}."""
    if not -1e-12 <= tau <= u.grid.T + 1e-12:
        raise EnergyError("tau outside [0, T]")
    U, Ut = slice_at_time(u.values, u.dt, tau, order=3)
    frac = cell_fraction_above(S.values, tau, S.grid.dim)
    if not frac.any():
        log.warning("empty horizontal region at tau=%g", tau)
    return classical_energy(U, Ut, A, frac)


def h1_surface_norm(tr: TraceData, S: Hypersurface, A: CoefficientField | None = None):
    """Squared H1 seminorm of the trace, measured on the surface.

    Returns (value, bound, ok) where bound = max(1, c2)/c1 * E when A is
    given (None otherwise).
    """
    g = cell_gradient(tr.u, S.grid.h)
    jac = np.sqrt(1.0 + np.sum(S.cell_gradients ** 2, axis=-1))
    value = float(np.sum(np.sum(np.abs(g) ** 2, axis=-1) / jac) * S.grid.cell_volume)
    if A is None:
        return value, None, True
    b = A.ellipticity_bounds()
    bound = max(1.0, b.c2) / b.c1 * surface_energy(tr, S, A)
    return value, bound, value <= bound * (1 + 1e-12) + 1e-14


# -- lateral boundary -----------------------------------------------------------


@dataclass
class ConormalTrace:
    """nu . A grad u on each boundary face, shape (levels, face nodes)."""

    faces: list
    values: list
    norm_sq: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq))


def _normal_derivative(vals, face, h):
    """One-sided second-order derivative along the face's axis (positive axis direction)."""
    ax = face.axis + 1  # levels first
    take = lambda i: np.take(vals, i, axis=ax)
    if face.side < 0:
        d = (-3 * take(0) + 4 * take(1) - take(2)) / (2 * h)
    else:
        d = (3 * take(-1) - 4 * take(-2) + take(-3)) / (2 * h)
    return d


def face_gradients(u: SpaceTimeField, face):
    """Full gradient of u on a face, (levels, face nodes, dim)."""
    grid = u.grid
    comps = []
    for k in range(grid.dim):
        if k == face.axis:
            d = _normal_derivative(u.values, face, grid.h[k])
        else:
            onface = u.values[(slice(None),) + face.index]
            tk = [j for j in range(grid.dim) if j != face.axis].index(k) + 1
            d = np.gradient(onface, grid.h[k], axis=tk, edge_order=2)
        comps.append(d)
    return np.stack(comps, axis=-1)


def conormal(u: SpaceTimeField, A: CoefficientField, S: Hypersurface | None = None,
             tau: float = 0.0) -> ConormalTrace:
    """u_{nu,A} on every face and its squared L2 norm over Sigma_tau (below S)."""
    grid = u.grid
    faces, values = grid.faces(), []
    total = 0.0
    for face in faces:
        gu = face_gradients(u, face)
        Aface = A.matrices[face.index]
        q = np.einsum("i,...ij,t...j->t...", face.normal, Aface, gu)
        values.append(q)
        if S is not None:
            col = column_integral(np.abs(q) ** 2, u.dt, tau, S.values[face.index])
            total += float(np.sum(grid.face_weights(face) * col))
    return ConormalTrace(faces, values, total)


def sigma_integral(u: SpaceTimeField, S: Hypersurface, tau: float, integrand) -> float:
    """Sum over faces of the integral over boundary columns [tau, S(x_b)] of integrand(face, vals)."""
    grid = u.grid
    total = 0.0
    for face in grid.faces():
        g = integrand(face)
        col = column_integral(g, u.dt, tau, S.values[face.index])
        total += float(np.sum(grid.face_weights(face) * col))
    return total


def boundary_h1_sq(u: SpaceTimeField, S: Hypersurface, tau: float = 0.0) -> float:
    """||f||^2_{H1(Sigma_tau)} from the Dirichlet rows of the solved field."""
    grid = u.grid

    def integrand(face):
        f = u.values[(slice(None),) + face.index]
        total = np.abs(f) ** 2 + np.abs(time_derivative(f, u.dt)) ** 2
        for j, k in enumerate(face.tangent_axes):
            total = total + np.abs(np.gradient(f, grid.h[k], axis=j + 1, edge_order=2)) ** 2
        return total

    return sigma_integral(u, S, tau, integrand)


def q_integral(values: np.ndarray, dt: float, S: Hypersurface, tau: float) -> float:
    """Integral over Q_tau of a (levels, nodes) array."""
    col = column_integral(values, dt, tau, S.values)
    return float(np.sum(S.grid.trapezoid_weights() * col))


def source_array(scenario, times) -> np.ndarray:
    return np.stack([np.asarray(scenario.source(t), dtype=complex) for t in times])


# -- a-priori bound reports -------------------------------------------------------


@dataclass
class EnergyReport:
    """Bound reports with C = 1.

    gap: |E - e0| against the data norms; bound: E itself against initial
    energy plus data; conormal: ||u_{nu,A}||^2 on Sigma_0 against the same.
    """

    E_surface: float
    e0: float
    lhs: float
    rhs_gap: float
    ratio_gap: float
    lhs_bound: float
    rhs_bound: float
    ratio_bound: float
    lhs_conormal: float
    rhs_conormal: float
    ratio_conormal: float
    norms: dict = field(default_factory=dict)
    conservation_residual: float | None = None

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items()}
        return d


def _ratio(lhs, rhs):
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else float("inf")


def theorem_reports(scenario, result, S: Hypersurface) -> EnergyReport:
    """Left- and right-hand sides of the surface-energy bounds with C = 1.

    Data norms are taken on the parts of the boundary and cylinder below S.
    """
    u = result.u
    A = scenario.A
    E = generalized_energy(u, S, A)
    u0, u1 = scenario.initial.u0, scenario.initial.u1
    e0 = classical_energy(u0, u1, A)
    grid = scenario.grid
    vol = grid.cell_volume
    grad_u0_sq = float(np.sum(np.sum(np.abs(cell_gradient(u0, grid.h)) ** 2, axis=-1)) * vol)
    u1_sq = float(np.sum(cell_average(np.abs(u1) ** 2, grid.dim)) * vol)
    f_sq = boundary_h1_sq(u, S, 0.0)
    G = source_array(scenario, u.times)
    G_sq = q_integral(np.abs(G) ** 2, u.dt, S, 0.0)
    T2 = S.T2
    jT = np.sqrt(1.0 + T2 ** 2)
    data = np.sqrt(f_sq) + np.sqrt(G_sq)
    lhs = abs(E - e0)
    rhs_gap = np.sqrt(jT) * (np.sqrt(grad_u0_sq) + np.sqrt(u1_sq) + np.sqrt(jT) * data) * data
    rhs_bound = grad_u0_sq + u1_sq + jT * (f_sq + G_sq)
    cn = conormal(u, A, S, 0.0).norm_sq
    rhs_conormal = jT * (grad_u0_sq + u1_sq) + jT ** 2 * (G_sq + f_sq)
    norms = {"grad_u0_sq": grad_u0_sq, "u1_sq": u1_sq, "f_H1_Sigma0_sq": f_sq,
             "G_L2_Q0_sq": G_sq, "T2": T2, "bracket_T2": jT}
    return EnergyReport(
        E_surface=E, e0=e0, lhs=lhs, rhs_gap=float(rhs_gap), ratio_gap=_ratio(lhs, rhs_gap),
        lhs_bound=E, rhs_bound=float(rhs_bound), ratio_bound=_ratio(E, rhs_bound),
        lhs_conormal=cn, rhs_conormal=float(rhs_conormal), ratio_conormal=_ratio(cn, rhs_conormal),
        norms=norms, conservation_residual=lhs if scenario.homogeneous else None,
    )
