"""Complex space-time grid functions, finite-difference stencils, time
interpolation and region-restricted quadrature."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import RegionMasks, SpatialGrid

log = logging.getLogger(__name__)


class FieldError(ValueError):
    pass


@dataclass
class SpaceTimeField:
    """Values over (time level, node...) with uniform time step dt from t = 0."""

    values: np.ndarray
    dt: float
    grid: SpatialGrid

    def __post_init__(self):
        if self.values.shape[1:] != self.grid.shape:
            raise FieldError("field values do not match the grid")
        span = (self.values.shape[0] - 1) * self.dt
        if abs(span - self.grid.T) > 1e-9 * self.grid.T:
            raise FieldError(f"time levels span {span}, expected T={self.grid.T}")

    @property
    def n_levels(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_levels) * self.dt

    def freeze(self) -> "SpaceTimeField":
        self.values.setflags(write=False)
        return self

    def time_derivative(self) -> np.ndarray:
        return time_derivative(self.values, self.dt)


@dataclass
class BoundaryField:
    """Dirichlet data f sampled on boundary nodes x time levels.

    `nodes` holds the grid index tuple of each boundary column; `values`
    has shape (levels, len(nodes)).
    """

    values: np.ndarray
    times: np.ndarray
    nodes: list
    dt_values: np.ndarray | None = None

    def __post_init__(self):
        if self.values.shape != (len(self.times), len(self.nodes)):
            raise FieldError("boundary field must be defined on every boundary node and level")


@dataclass
class InitialData:
    u0: np.ndarray
    u1: np.ndarray


def boundary_nodes(grid: SpatialGrid) -> list:
    return [tuple(int(k) for k in idx) for idx in zip(*np.nonzero(grid.boundary_mask()))]


def sample_boundary(f, grid: SpatialGrid, times, f_t=None) -> BoundaryField:
    """Evaluate a callable f(X..., t) on the boundary nodes at every level."""
    nodes = boundary_nodes(grid)
    mask = grid.boundary_mask()
    X = grid.mesh()
    Xb = tuple(x[mask] for x in X)
    vals = np.array([np.broadcast_to(f(*Xb, t), Xb[0].shape) for t in times], dtype=complex)
    dvals = None
    if f_t is not None:
        dvals = np.array([np.broadcast_to(f_t(*Xb, t), Xb[0].shape) for t in times],
                         dtype=complex)
    return BoundaryField(vals, np.asarray(times, dtype=float), nodes, dvals)


# -- spatial stencils ----------------------------------------------------------


def grad(u: np.ndarray, grid: SpatialGrid, time_axis: bool = False) -> list[np.ndarray]:
    """Second-order gradient: central inside, one-sided second order on the boundary."""
    offset = 1 if time_axis else 0
    return [np.gradient(u, h, axis=k + offset, edge_order=2) for k, h in enumerate(grid.h)]


def _shift(a: np.ndarray, axis: int, lo: int, hi: int) -> np.ndarray:
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(lo, a.shape[axis] + hi if hi <= 0 else hi)
    return a[tuple(idx)]


class DivAGrad:
    """Flux-form discretisation of div(A grad u) with face-averaged coefficients.

    Diagonal entries use [a_{+}(u_+ - u_0) - a_{-}(u_0 - u_-)] / h^2 per axis;
    off-diagonal entries (2D) use centred differences of a_12 d_k u.
    Operates on arrays with optional leading batch axes.
    """

    def __init__(self, A, periodic: bool = False):
        self.grid = A.grid
        self.periodic = periodic
        M = A.matrices
        dim = self.grid.dim
        self.diag_faces = []
        for k in range(dim):
            a = M[..., k, k]
            if periodic:
                self.diag_faces.append(0.5 * (a + np.roll(a, -1, axis=k)))
            else:
                self.diag_faces.append(0.5 * (_shift(a, k, 0, -1) + _shift(a, k, 1, 0)))
        self.cross = M[..., 0, 1].copy() if dim == 2 else None
        if self.cross is not None and not np.any(self.cross):
            self.cross = None

    def __call__(self, u: np.ndarray, boundary: str | None = None) -> np.ndarray:
        g = self.grid
        dim = g.dim
        lead = u.ndim - dim
        out = np.zeros(u.shape, dtype=np.result_type(u, float))
        if self.periodic:
            for k in range(dim):
                ax = lead + k
                flux = self.diag_faces[k] * (np.roll(u, -1, axis=ax) - u) / g.h[k]
                out += (flux - np.roll(flux, 1, axis=ax)) / g.h[k]
            if self.cross is not None:
                for j, k in ((0, 1), (1, 0)):
                    dk = (np.roll(u, -1, axis=lead + k) - np.roll(u, 1, axis=lead + k)) / (2 * g.h[k])
                    q = self.cross * dk
                    out += (np.roll(q, -1, axis=lead + j) - np.roll(q, 1, axis=lead + j)) / (2 * g.h[j])
            return out
        inner = (Ellipsis,) + g.interior_slice()
        for k in range(dim):
            ax = lead + k
            flux = self.diag_faces[k] * (_shift(u, ax, 1, 0) - _shift(u, ax, 0, -1)) / g.h[k]
            d = (_shift(flux, ax, 1, 0) - _shift(flux, ax, 0, -1)) / g.h[k]
            idx = [slice(None)] * u.ndim
            for j in range(dim):
                if j != k:
                    idx[lead + j] = slice(1, -1)
            out[inner] += d[tuple(idx)]
        if self.cross is not None:
            for j, k in ((0, 1), (1, 0)):
                dk = (_shift(u, lead + k, 2, 0) - _shift(u, lead + k, 0, -2)) / (2 * g.h[k])
                a = _shift(self.cross, k, 1, -1)
                q = a * dk
                d = (_shift(q, lead + j, 2, 0) - _shift(q, lead + j, 0, -2)) / (2 * g.h[j])
                out[inner] += d
        if boundary == "extrapolate":
            _extrapolate_boundary(out, dim, lead)
        elif boundary is not None:
            raise FieldError(f"unknown boundary treatment {boundary!r}")
        return out


def _extrapolate_boundary(out: np.ndarray, dim: int, lead: int) -> None:
    """Fill boundary entries by cubic extrapolation from the interior, axis by axis."""
    for k in range(dim):
        ax = lead + k
        base = [slice(None)] * out.ndim
        for j in range(k + 1, dim):
            base[lead + j] = slice(1, -1)

        def at(i):
            idx = list(base)
            idx[ax] = i
            return tuple(idx)

        out[at(0)] = 3 * out[at(1)] - 3 * out[at(2)] + out[at(3)]
        out[at(-1)] = 3 * out[at(-2)] - 3 * out[at(-3)] + out[at(-4)]


def div_a_grad(A, u: np.ndarray, boundary: str | None = None, periodic: bool = False) -> np.ndarray:
    return DivAGrad(A, periodic=periodic)(u, boundary=boundary)


# -- time direction -------------------------------------------------------------


def time_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    return np.gradient(values, dt, axis=0, edge_order=2)


def _quadratic_stencil(n_levels: int, dt: float, t):
    t = np.asarray(t, dtype=float)
    T = (n_levels - 1) * dt
    if np.any(t < -1e-12 * max(T, 1)) or np.any(t > T * (1 + 1e-12)):
        raise FieldError(f"query time outside stored span [0, {T}]")
    s = t / dt
    m = np.clip(np.rint(s), 1, n_levels - 2).astype(int)
    r = s - m
    w_u = (0.5 * r * (r - 1), 1.0 - r * r, 0.5 * r * (r + 1))
    w_t = ((r - 0.5) / dt, -2.0 * r / dt, (r + 0.5) / dt)
    return m, w_u, w_t


def interp_time(field: SpaceTimeField, node, t: float) -> tuple[complex, complex]:
    """Quadratic interpolation through the three nearest levels: (u, u_t)."""
    col = field.values[(slice(None),) + tuple(np.atleast_1d(node))]
    m, w_u, w_t = _quadratic_stencil(field.n_levels, field.dt, t)
    vals = col[m - 1], col[m], col[m + 1]
    u = sum(w * v for w, v in zip(w_u, vals))
    ut = sum(w * v for w, v in zip(w_t, vals))
    return complex(u), complex(ut)


def _cubic_stencil(n_levels: int, dt: float, t):
    t = np.asarray(t, dtype=float)
    T = (n_levels - 1) * dt
    if np.any(t < -1e-12 * max(T, 1)) or np.any(t > T * (1 + 1e-12)):
        raise FieldError(f"query time outside stored span [0, {T}]")
    s = t / dt
    m = np.clip(np.floor(s), 1, n_levels - 3).astype(int)
    r = s - m
    w_u = (-r * (r - 1) * (r - 2) / 6, (r + 1) * (r - 1) * (r - 2) / 2,
           -(r + 1) * r * (r - 2) / 2, (r + 1) * r * (r - 1) / 6)
    w_t = (-(3 * r * r - 6 * r + 2) / (6 * dt), (3 * r * r - 4 * r - 1) / (2 * dt),
           -(3 * r * r - 2 * r - 2) / (2 * dt), (3 * r * r - 1) / (6 * dt))
    return m, w_u, w_t


def sample_columns(values: np.ndarray, dt: float, t: np.ndarray, columns=None, order: int = 2):
    """u(x_c, t) for per-output query times t.

    `t` has the spatial shape of the output; `columns` (same shape, flat
    column indices) selects which column each output reads, default itself.
    order=2 interpolates through the three nearest levels, order=3 through
    the four surrounding levels. Returns (u, u_t).
    """
    L = values.shape[0]
    flat = values.reshape(L, -1)
    t = np.asarray(t, dtype=float)
    if columns is None:
        columns = np.arange(flat.shape[1]).reshape(t.shape)
    if order == 2:
        m, w_u, w_t = _quadratic_stencil(L, dt, t)
        offsets = (-1, 0, 1)
    elif order == 3:
        if L < 4:
            raise FieldError("cubic interpolation needs at least 4 levels")
        m, w_u, w_t = _cubic_stencil(L, dt, t)
        offsets = (-1, 0, 1, 2)
    else:
        raise FieldError(f"unsupported interpolation order {order}")
    u = 0
    ut = 0
    for o, a, b in zip(offsets, w_u, w_t):
        v = flat[m + o, columns]
        u = u + a * v
        ut = ut + b * v
    return u, ut


def slice_at_time(values: np.ndarray, dt: float, t: float, order: int = 2):
    """The whole spatial profile (u, u_t) at a single time t."""
    shape = values.shape[1:]
    return sample_columns(values, dt, np.full(shape, float(t)), order=order)


# -- quadrature -----------------------------------------------------------------


def column_integral(g: np.ndarray, dt: float, t_lo, t_hi) -> np.ndarray:
    """Integral over [t_lo, t_hi] of every column of g (levels first).

    Composite trapezoid on whole steps, linear interpolation on partial
    steps; zero where t_hi <= t_lo.
    """
    L = g.shape[0]
    C = np.zeros_like(g)
    C[1:] = np.cumsum(0.5 * dt * (g[1:] + g[:-1]), axis=0)
    cols = g.shape[1:]
    t_lo = np.broadcast_to(np.asarray(t_lo, dtype=float), cols)
    t_hi = np.broadcast_to(np.asarray(t_hi, dtype=float), cols)

    def F(t):
        s = np.clip(t / dt, 0.0, L - 1)
        m = np.clip(np.floor(s).astype(int), 0, L - 2)
        r = s - m
        take = lambda a, k: np.take_along_axis(a, k[None], axis=0)[0]
        gm, gp = take(g, m), take(g, m + 1)
        return take(C, m) + dt * (gm * r + 0.5 * (gp - gm) * r * r)

    out = F(t_hi) - F(t_lo)
    return np.where(t_hi > t_lo, out, 0.0)


def integrate_region(values: np.ndarray, masks: RegionMasks, region: str, grid: SpatialGrid):
    """Integral of a scalar quantity over one of the regions Q, H, Sigma, Gamma.

    Q and Sigma take space-time arrays (levels first); H and Gamma take
    nodal arrays. Surface quantities on Gamma are integrated in x (no
    Jacobian), Sigma carries the boundary surface measure times dt.
    """
    if masks.empty:
        log.warning("empty region %s at tau=%g", region, masks.tau)
        return 0.0
    dt = masks.dt
    if region == "Q":
        col = column_integral(values, dt, masks.tau, masks.surface)
        return np.sum(grid.trapezoid_weights() * col)
    if region == "H":
        return np.sum(grid.trapezoid_weights() * np.where(masks.h_mask, values, 0.0))
    if region == "Gamma":
        return np.sum(grid.trapezoid_weights() * np.where(masks.gamma_nodes, values, 0.0))
    if region == "Sigma":
        total = 0.0
        for face in grid.faces():
            col = column_integral(values[(slice(None),) + face.index], dt, masks.tau,
                                  masks.surface[face.index])
            total = total + np.sum(grid.face_weights(face) * col)
        return total
    raise FieldError(f"unknown region {region!r}")


def l2_region(values: np.ndarray, masks: RegionMasks, region: str, grid: SpatialGrid) -> float:
    """L2 norm (not squared) of values over a region."""
    return float(np.sqrt(max(integrate_region(np.abs(values) ** 2, masks, region, grid), 0.0)))


def export_csv(field: SpaceTimeField, path) -> None:
    X = field.grid.mesh()
    L = field.n_levels
    cols = [np.tile(x.ravel(), L) for x in X]
    t = np.repeat(field.times, field.grid.size)
    v = field.values.reshape(L, -1).ravel()
    names = ["x", "y"][: field.grid.dim] + ["t", "re", "im"]
    data = np.column_stack(cols + [t, v.real, v.imag])
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def load_csv(path, grid: SpatialGrid, dt: float) -> SpaceTimeField:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    vals = (data[:, -2] + 1j * data[:, -1]).reshape((-1,) + grid.shape)
    return SpaceTimeField(vals, dt, grid)
