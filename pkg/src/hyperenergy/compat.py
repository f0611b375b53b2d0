"""Compatibility hierarchy, smooth cutoff and mollified Dirichlet data."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import BoundaryField, DivAGrad, boundary_nodes, time_derivative


class CompatError(ValueError):
    pass


def default_order(dim: int) -> int:
    """K = ceil(n/2) + 2."""
    return math.ceil(dim / 2) + 2


# -- cutoff ---------------------------------------------------------------------


def _psi(z):
    z = np.asarray(z, dtype=float)
    pos = z > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, z, 1.0)), 0.0)


def _psi_prime(z):
    z = np.asarray(z, dtype=float)
    pos = z > 0
    zz = np.where(pos, z, 1.0)
    return np.where(pos, np.exp(-1.0 / zz) / zz ** 2, 0.0)


class Cutoff:
    """chi(t) = step(2 - |t|) with step(s) = psi(s) / (psi(s) + psi(1 - s)),
    psi(s) = exp(-1/s) for s > 0.  chi = 1 on |t| <= 1 and 0 on |t| >= 2."""

    def __call__(self, t):
        s = 2.0 - np.abs(np.asarray(t, dtype=float))
        a, b = _psi(s), _psi(1.0 - s)
        return a / (a + b)

    def derivative(self, t, order: int = 1):
        """Derivatives of chi; exact zeros off the transition bands 1 < |t| < 2."""
        t = np.asarray(t, dtype=float)
        if order == 0:
            return self(t)
        band = (np.abs(t) > 1) & (np.abs(t) < 2)
        if order == 1:
            s = 2.0 - np.abs(t)
            a, b = _psi(s), _psi(1.0 - s)
            da, db = _psi_prime(s), -_psi_prime(1.0 - s)
            with np.errstate(invalid="ignore", divide="ignore"):
                dstep = (da * b - a * db) / (a + b) ** 2
            return np.where(band, -np.sign(t) * dstep, 0.0)
        # higher orders: centred differences inside the band, exact zeros outside
        h = 1e-3
        k = order
        coeffs = [(-1) ** j * math.comb(k, j) for j in range(k + 1)]
        vals = sum(c * self.derivative(t + (k / 2 - j) * h, 0) for j, c in enumerate(coeffs))
        return np.where(band, vals / h ** k, 0.0)

    def derivative_at_zero(self, order: int) -> float:
        """chi^{(j)}(0): 1 for j = 0 and exactly 0 otherwise (plateau)."""
        return 1.0 if order == 0 else float(self.derivative(np.array(0.0), order))


CHI = Cutoff()


# -- hierarchy --------------------------------------------------------------------


@dataclass
class CompatHierarchy:
    terms: list  # u_0 ... u_K, nodal arrays

    @property
    def K(self) -> int:
        return len(self.terms) - 1

    def boundary_values(self, grid) -> np.ndarray:
        """(K+1, boundary nodes)."""
        mask = grid.boundary_mask()
        return np.array([u[mask] for u in self.terms])

    def perturbed(self, k: int, delta) -> "CompatHierarchy":
        terms = [np.array(u, dtype=complex) for u in self.terms]
        terms[k] = terms[k] + delta
        return CompatHierarchy(terms)


def build_hierarchy(u0, u1, source_t0, A, K: int | None = None) -> CompatHierarchy:
    """u_k = d_t^{k-2} G(., 0) + div(A grad u_{k-2}) for k >= 2.

    `source_t0(j)` returns the j-th time derivative of G at t = 0 on the grid
    (None means G = 0).  Boundary values of the discrete operator are filled
    by cubic extrapolation from the interior.
    """
    if K is None:
        K = default_order(A.grid.dim)
    if K < 0:
        raise CompatError("order K must be non-negative")
    op = DivAGrad(A)
    terms = [np.asarray(u0, dtype=complex), np.asarray(u1, dtype=complex)][: K + 1]
    for k in range(2, K + 1):
        g = 0.0 if source_t0 is None else np.asarray(source_t0(k - 2), dtype=complex)
        terms.append(g + op(terms[k - 2], boundary="extrapolate"))
    return CompatHierarchy(terms)


# -- mollified data -------------------------------------------------------------------


@dataclass
class MollifiedData:
    """f_eps sampled on the boundary together with the data that defined it."""

    field: BoundaryField
    eps: float
    hierarchy: CompatHierarchy | None
    grid: object
    kind: str

    def derivative_at_zero(self, k: int) -> np.ndarray:
        """d^k f_eps / dt^k at t = 0 on the boundary, from the closed form (Leibniz rule).

        The (1 - chi) f part contributes only through chi's derivatives at 0,
        which vanish exactly on the plateau, so f itself is never needed.
        """
        if self.hierarchy is None:
            raise CompatError("first-order mollification carries no hierarchy")
        if k > self.hierarchy.K:
            raise CompatError(f"k={k} exceeds the hierarchy order K={self.hierarchy.K}")
        ub = self.hierarchy.boundary_values(self.grid)
        out = np.zeros(ub.shape[1], dtype=complex)
        for j in range(k + 1):
            c = CHI.derivative_at_zero(j) / self.eps ** j
            if c != 0.0:
                out = out + math.comb(k, j) * c * ub[k - j]
            cf = (1.0 if j == 0 else 0.0) - c
            if cf != 0.0:
                raise CompatError("cutoff derivative at 0 is not on the plateau")
        return out


def _check_eps(times, eps):
    if not eps > 0:
        raise CompatError("eps must be positive")
    T = times[-1]
    if not 2 * eps < T:
        raise CompatError("need 2*eps < T")
    if np.count_nonzero(times <= 2 * eps) < 4:
        raise CompatError("eps too small for the level grid (fewer than 4 levels in [0, 2 eps])")


def taylor_sum(hier: CompatHierarchy, grid, times) -> np.ndarray:
    """sum_k t^k / k! u_k on the boundary, shape (levels, boundary nodes)."""
    ub = hier.boundary_values(grid)
    t = np.asarray(times)[:, None]
    return sum(t ** k / math.factorial(k) * ub[k][None, :] for k in range(hier.K + 1))


def _blend(chi, inner, outer):
    out = chi * inner + (1.0 - chi) * outer
    return np.where(chi == 0.0, outer, out)


def mollify_high_order(f: BoundaryField, hier: CompatHierarchy, eps: float, grid) -> MollifiedData:
    """f_eps = chi(t/eps) * Taylor sum of the hierarchy + (1 - chi(t/eps)) f."""
    _check_eps(f.times, eps)
    chi = CHI(f.times / eps)[:, None]
    vals = _blend(chi, taylor_sum(hier, grid, f.times), f.values)
    return MollifiedData(BoundaryField(vals, f.times, f.nodes), eps, hier, grid, "high-order")


def mollify_first_order(f: BoundaryField, u0, eps: float, grid) -> MollifiedData:
    """f_eps = chi(t/eps) u0 + (1 - chi(t/eps)) f, so that f_eps(., 0) = u0 on the boundary."""
    _check_eps(f.times, eps)
    chi = CHI(f.times / eps)[:, None]
    u0b = np.asarray(u0)[grid.boundary_mask()][None, :]
    vals = _blend(chi, u0b, f.values)
    return MollifiedData(BoundaryField(vals, f.times, f.nodes), eps, None, grid, "first-order")


def compatibility_residual(f_eps: MollifiedData, hier: CompatHierarchy, k: int) -> float:
    """max over boundary nodes of |d_t^k f_eps(., 0) - u_k|."""
    if k > hier.K:
        raise CompatError(f"k={k} exceeds K={hier.K}")
    d = f_eps.derivative_at_zero(k)
    return float(np.max(np.abs(d - hier.boundary_values(f_eps.grid)[k]), initial=0.0))


def hierarchy_scale(hier: CompatHierarchy, grid) -> float:
    return max(1.0, float(np.max(np.abs(hier.boundary_values(grid)))))


# -- norms on the lateral boundary ----------------------------------------------------------


def boundary_h1_norm_sq(values: np.ndarray, times, grid) -> float:
    """||g||^2_{H1(Sigma)} for boundary samples g (levels, boundary nodes) over [0, T]."""
    times = np.asarray(times)
    dt = times[1] - times[0]
    index = {node: i for i, node in enumerate(boundary_nodes(grid))}
    wt = np.full(len(times), dt)
    wt[0] = wt[-1] = 0.5 * dt
    total = 0.0
    for face in grid.faces():
        idx = np.indices(grid.shape)
        sel = tuple(i[face.index].ravel() for i in idx)
        cols = [index[tuple(int(s[m]) for s in sel)] for m in range(sel[0].size)]
        g = values[:, cols]
        dens = np.abs(g) ** 2 + np.abs(time_derivative(g, dt)) ** 2
        if face.tangent_axes:
            (k,) = face.tangent_axes
            dens = dens + np.abs(np.gradient(g, grid.h[k], axis=1, edge_order=2)) ** 2
        total += float(np.sum(wt[:, None] * dens * grid.face_weights(face)))
    return total


def h1_distance(a: BoundaryField, b: BoundaryField, grid) -> float:
    return math.sqrt(boundary_h1_norm_sq(a.values - b.values, a.times, grid))


# -- sweeps -------------------------------------------------------------------------------


def perturbed_boundary(f: BoundaryField, delta: float = 0.5) -> BoundaryField:
    """f + delta * t * exp(-t): keeps f(., 0) but breaks higher-order compatibility."""
    t = f.times[:, None]
    return BoundaryField(f.values + delta * t * np.exp(-t), f.times, f.nodes)


@dataclass
class SweepRow:
    eps: float
    h1_distance: float
    residuals: list
    tail_exact: bool


def high_order_sweep(scenario, times, eps_values, K=None, delta: float = 0.5):
    """Mollify a perturbed version of the scenario's f for each eps."""
    grid = scenario.grid
    f = perturbed_boundary(scenario.boundary_field(times), delta)
    hier = build_hierarchy(scenario.initial.u0, scenario.initial.u1,
                           None if scenario.G is None else scenario.source_derivative_t0,
                           scenario.A, K)
    rows = []
    for eps in eps_values:
        fe = mollify_high_order(f, hier, eps, grid)
        tail = f.times >= 2 * eps
        exact = bool(np.array_equal(fe.field.values[tail], f.values[tail]))
        res = [compatibility_residual(fe, hier, k) for k in range(hier.K + 1)]
        rows.append(SweepRow(float(eps), h1_distance(fe.field, f, grid), res, exact))
    return hier, rows


def first_order_sweep(scenario, times, eps_values, jitter: float = 0.5, seed: int = 0):
    """Mollify towards an initial profile whose boundary values are jittered by jitter*eps."""
    grid = scenario.grid
    f = scenario.boundary_field(times)
    rng = np.random.default_rng(seed)
    mask = grid.boundary_mask()
    direction = rng.uniform(-1, 1, size=int(mask.sum()))
    rows = []
    for eps in eps_values:
        u0 = np.array(scenario.initial.u0, dtype=complex)
        u0[mask] = u0[mask] + jitter * eps * direction
        fe = mollify_first_order(f, u0, eps, grid)
        tail = f.times >= 2 * eps
        exact = bool(np.array_equal(fe.field.values[tail], f.values[tail]))
        res0 = float(np.max(np.abs(fe.field.values[0] - u0[mask])))
        rows.append(SweepRow(float(eps), h1_distance(fe.field, f, grid), [res0], exact))
    return rows


def non_increasing(values, slack: float = 0.0) -> bool:
    return all(b <= a * (1 + slack) + 1e-300 for a, b in zip(values[:-1], values[1:]))
