"""Spatial domains, uniform grids, graph hypersurfaces t = S(x), causal
classification and the space-time regions lying underneath a surface."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

#: Relative tolerance separating lightlike cells from rounding noise.
CAUSAL_TOL = 1e-10
#: Slack allowed when checking 0 <= S <= T on nodal values.
RANGE_TOL = 1e-12


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    """Axis-aligned interval or rectangle together with a time horizon."""

    bounds: tuple[tuple[float, float], ...]
    T: float

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) not in (1, 2):
            raise GeometryError("only 1D intervals and 2D rectangles are supported")
        for a, b in bounds:
            if not b > a:
                raise GeometryError(f"empty interval ({a}, {b})")
        if not self.T > 0:
            raise GeometryError("time horizon T must be positive")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def kind(self) -> str:
        return "interval" if self.dim == 1 else "rectangle"

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in self.bounds)


class SpatialGrid:
    """Uniform tensor grid whose outermost nodes sit on the boundary."""

    def __init__(self, domain: Domain, cells):
        if np.isscalar(cells):
            cells = (int(cells),) * domain.dim
        cells = tuple(int(c) for c in cells)
        if len(cells) != domain.dim or min(cells) < 2:
            raise GeometryError(f"need at least 2 cells per axis, got {cells}")
        self.domain = domain
        self.cells = cells
        self.shape = tuple(c + 1 for c in cells)
        self.h = tuple(L / c for L, c in zip(domain.lengths, cells))
        self.coords = tuple(
            np.linspace(a, b, c + 1) for (a, b), c in zip(domain.bounds, cells)
        )

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def T(self) -> float:
        return self.domain.T

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.coords, indexing="ij"))

    def cell_centers(self) -> tuple[np.ndarray, ...]:
        mids = [0.5 * (c[1:] + c[:-1]) for c in self.coords]
        return tuple(np.meshgrid(*mids, indexing="ij"))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def trapezoid_weights(self) -> np.ndarray:
        w = np.ones(self.shape)
        for axis, h in enumerate(self.h):
            wa = np.full(self.shape[axis], h)
            wa[0] = wa[-1] = 0.5 * h
            w = w * wa.reshape([-1 if k == axis else 1 for k in range(self.dim)])
        return w

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[axis] = 0
            mask[tuple(idx)] = True
            idx[axis] = -1
            mask[tuple(idx)] = True
        return mask

    def interior_slice(self, margin: int = 1) -> tuple[slice, ...]:
        return tuple(slice(margin, n - margin) for n in self.shape)

    def faces(self) -> list["Face"]:
        """Flat boundary faces, each with its outward unit normal."""
        out = []
        for axis in range(self.dim):
            for side, index in ((-1, 0), (1, self.shape[axis] - 1)):
                idx = [slice(None)] * self.dim
                idx[axis] = index
                normal = np.zeros(self.dim)
                normal[axis] = side
                tangent_axes = tuple(k for k in range(self.dim) if k != axis)
                out.append(Face(axis, side, tuple(idx), normal, tangent_axes))
        return out

    def face_weights(self, face: "Face") -> np.ndarray:
        """Trapezoid surface-measure weights along one face (1 in 1D)."""
        if self.dim == 1:
            return np.ones(())
        (k,) = face.tangent_axes
        w = np.full(self.shape[k], self.h[k])
        w[0] = w[-1] = 0.5 * self.h[k]
        return w

    def nearest_node(self, point) -> tuple[int, ...]:
        point = np.atleast_1d(point)
        return tuple(
            int(np.clip(round((p - a) / h), 0, n - 1))
            for p, (a, _), h, n in zip(point, self.domain.bounds, self.h, self.shape)
        )

    def __repr__(self):
        return f"SpatialGrid(bounds={self.domain.bounds}, cells={self.cells}, T={self.T})"


@dataclass(frozen=True)
class Face:
    axis: int
    side: int
    index: tuple
    normal: np.ndarray
    tangent_axes: tuple[int, ...]


def cell_average(values: np.ndarray, dim: int) -> np.ndarray:
    """Average nodal data (leading `dim` axes) onto cells."""
    out = values
    for axis in range(dim):
        lo = [slice(None)] * out.ndim
        hi = [slice(None)] * out.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        out = 0.5 * (out[tuple(lo)] + out[tuple(hi)])
    return out


def cell_gradient(values: np.ndarray, h: tuple[float, ...]) -> np.ndarray:
    """Per-cell gradient of nodal data; exact for data multilinear on each cell.

    Returns an array of shape (*cells, dim).
    """
    dim = len(h)
    comps = []
    for axis in range(dim):
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        d = (values[tuple(hi)] - values[tuple(lo)]) / h[axis]
        for other in range(dim):
            if other == axis:
                continue
            a = [slice(None)] * d.ndim
            b = [slice(None)] * d.ndim
            a[other] = slice(None, -1)
            b[other] = slice(1, None)
            d = 0.5 * (d[tuple(a)] + d[tuple(b)])
        comps.append(d)
    return np.stack(comps, axis=-1)


class Hypersurface:
    """Graph t = S(x) stored as nodal values plus per-cell constant gradients.

    Kinks (jumps of the gradient) live on cell interfaces and are recorded
    as node indices in `kink_set`.
    """

    def __init__(self, grid: SpatialGrid, values, cell_gradients=None, kinks=None,
                 name: str = "nodal"):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise GeometryError(f"surface values have shape {values.shape}, grid {grid.shape}")
        if values.min() < -RANGE_TOL or values.max() > grid.T + RANGE_TOL:
            raise GeometryError(
                f"S must take values in [0, T={grid.T}], got [{values.min()}, {values.max()}]"
            )
        self.grid = grid
        self.values = np.clip(values, 0.0, grid.T)
        self.values.setflags(write=False)
        if cell_gradients is None:
            cell_gradients = cell_gradient(self.values, grid.h)
        self.cell_gradients = np.asarray(cell_gradients, dtype=float)
        self.cell_gradients.setflags(write=False)
        self.kink_set = sorted(set(kinks)) if kinks is not None else self._detect_kinks()
        self.name = name

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, float(c)), name=f"constant({c})")

    @classmethod
    def affine(cls, grid, offset, slope):
        slope = np.atleast_1d(np.asarray(slope, dtype=float))
        if slope.size != grid.dim:
            raise GeometryError("slope must have one entry per spatial axis")
        X = grid.mesh()
        values = float(offset) + sum(s * x for s, x in zip(slope, X))
        grads = np.broadcast_to(slope, tuple(grid.cells) + (grid.dim,)).copy()
        return cls(grid, values, cell_gradients=grads, kinks=[],
                   name=f"affine({offset}, {list(slope)})")

    @classmethod
    def from_function(cls, grid, func, kinks=None, name="function"):
        return cls(grid, func(*grid.mesh()), kinks=kinks, name=name)

    @property
    def T1(self) -> float:
        return float(self.values.min())

    @property
    def T2(self) -> float:
        return float(self.values.max())

    def _detect_kinks(self):
        g = self.cell_gradients
        scale = 1.0 + np.abs(g).max()
        kinks = set()
        if self.grid.dim == 1:
            jump = np.abs(np.diff(g[:, 0]))
            for i in np.nonzero(jump > 1e-9 * scale)[0]:
                kinks.add((int(i) + 1,))
            return sorted(kinks)
        # 2D: a node is a kink if its surrounding cells disagree
        nx, ny = self.grid.cells
        cells = []
        for di, dj in itertools.product((0, 1), repeat=2):
            pad = np.full((nx + 2, ny + 2, 2), np.nan)
            pad[1:-1, 1:-1] = g
            cells.append(pad[di:di + nx + 1, dj:dj + ny + 1])
        stack = np.stack(cells)
        spread = np.nanmax(stack, axis=0) - np.nanmin(stack, axis=0)
        bad = np.nanmax(spread, axis=-1) > 1e-9 * scale
        for idx in zip(*np.nonzero(bad)):
            kinks.add(tuple(int(k) for k in idx))
        return sorted(kinks)

    def node_gradient(self, node) -> np.ndarray:
        """Gradient at a node, defined only away from kinks."""
        node = tuple(int(k) for k in np.atleast_1d(node))
        if node in self.kink_set:
            raise GeometryError("normal undefined at kink")
        adjacent = []
        for offs in itertools.product((-1, 0), repeat=self.grid.dim):
            c = tuple(n + o for n, o in zip(node, offs))
            if all(0 <= ci < nc for ci, nc in zip(c, self.grid.cells)):
                adjacent.append(self.cell_gradients[c])
        return np.mean(adjacent, axis=0)

    def nodal_gradients(self) -> np.ndarray:
        """Average of adjacent cell gradients at every node, shape (*shape, dim)."""
        g = self.cell_gradients
        dim = self.grid.dim
        total = np.zeros(self.grid.shape + (dim,))
        count = np.zeros(self.grid.shape + (1,))
        for offs in itertools.product((0, 1), repeat=dim):
            idx = tuple(slice(o, o + c) for o, c in zip(offs, self.grid.cells))
            total[idx] += g
            count[idx] += 1
        return total / count

    def __repr__(self):
        return f"Hypersurface({self.name}, T1={self.T1:.6g}, T2={self.T2:.6g})"


def surface_normal(S: Hypersurface, cell=None, node=None) -> tuple[np.ndarray, float]:
    """Upward unit normal (nu_x, nu_t) of the graph of S.

    Query either a cell (always defined) or a node (undefined at kinks).
    """
    if (cell is None) == (node is None):
        raise GeometryError("give exactly one of cell or node")
    if cell is not None:
        grad = S.cell_gradients[tuple(np.atleast_1d(cell))]
    else:
        grad = S.node_gradient(node)
    norm = np.sqrt(1.0 + grad @ grad)
    return -grad / norm, 1.0 / norm


class CausalKind(enum.Enum):
    SPACELIKE = "spacelike"
    LIGHTLIKE = "lightlike"
    TIMELIKE = "timelike"


@dataclass(frozen=True)
class CausalClass:
    kind: CausalKind
    max_slope: float
    cell_slopes: np.ndarray = field(repr=False)

    @property
    def non_timelike(self) -> bool:
        return self.kind is not CausalKind.TIMELIKE


def a_slopes(S: Hypersurface, A) -> np.ndarray:
    """Per-cell |grad S|_A using the cell-averaged coefficient matrix."""
    Ac = A.cell_matrices()
    g = S.cell_gradients
    return np.sqrt(np.einsum("...i,...ij,...j->...", g, Ac, g))


def classify(S: Hypersurface, A, tol: float = CAUSAL_TOL) -> CausalClass:
    if A.grid.shape != S.grid.shape:
        raise GeometryError("surface and coefficient field live on different grids")
    slopes = a_slopes(S, A)
    top = float(slopes.max())
    if top > 1.0 + tol:
        kind = CausalKind.TIMELIKE
    elif abs(top - 1.0) <= tol:
        kind = CausalKind.LIGHTLIKE
    else:
        kind = CausalKind.SPACELIKE
    return CausalClass(kind, top, slopes)


def time_levels(T: float, dt: float) -> np.ndarray:
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * T:
        raise GeometryError("dt must divide T")
    return np.arange(n + 1) * dt


@dataclass
class RegionMasks:
    """Discrete description of Q_tau, H_tau, Sigma_tau and Gamma_{S,tau}.

    The masks select grid points; quadratures additionally use the exact
    nodal heights `surface` and `tau` to integrate partial time intervals.
    """

    tau: float
    times: np.ndarray
    surface: np.ndarray
    q_mask: np.ndarray
    h_mask: np.ndarray
    gamma_nodes: np.ndarray
    sigma_levels: dict
    T1: float
    T2: float
    empty: bool

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def region_masks(S: Hypersurface, tau: float, times) -> RegionMasks:
    times = np.asarray(times, dtype=float)
    grid = S.grid
    if not (-RANGE_TOL <= tau <= grid.T + RANGE_TOL):
        raise GeometryError(f"tau={tau} outside [0, T]")
    eps = 1e-12 * max(1.0, grid.T)
    s = S.values
    t = times.reshape((-1,) + (1,) * grid.dim)
    q_mask = (t >= tau - eps) & (t <= s + eps)
    h_mask = s >= tau - eps
    sigma = {}
    bmask = grid.boundary_mask()
    for idx in zip(*np.nonzero(bmask)):
        sb = s[idx]
        levels = np.nonzero((times >= tau - eps) & (times <= sb + eps))[0]
        sigma[tuple(int(k) for k in idx)] = (
            (int(levels[0]), int(levels[-1])) if levels.size else None
        )
    empty = tau > S.T2 + eps
    if empty:
        q_mask[:] = False
        h_mask[:] = False
    return RegionMasks(
        tau=float(tau), times=times, surface=s, q_mask=q_mask, h_mask=h_mask,
        gamma_nodes=h_mask.copy(), sigma_levels=sigma, T1=S.T1, T2=S.T2, empty=empty,
    )


@dataclass(frozen=True)
class FoliationReport:
    ok: bool
    tau_pair: tuple[int, int] | None = None
    node: tuple[int, ...] | None = None
    violation: float = 0.0


def validate_foliation(family, tol: float = 1e-12) -> FoliationReport:
    """Check S_{tau_1} <= S_{tau_2} pointwise for consecutive family members."""
    family = list(family)
    if not family:
        return FoliationReport(True)
    shape = family[0].grid.shape
    for k, (lo, hi) in enumerate(zip(family[:-1], family[1:])):
        if lo.grid.shape != shape or hi.grid.shape != shape:
            raise GeometryError("foliation members live on different grids")
        diff = lo.values - hi.values
        if diff.max() > tol:
            node = np.unravel_index(int(np.argmax(diff > tol)), shape)
            return FoliationReport(False, (k, k + 1), tuple(int(i) for i in node),
                                   float(diff.max()))
    return FoliationReport(True)


def cell_fraction_above(S_nodal: np.ndarray, tau: float, dim: int, samples: int = 8) -> np.ndarray:
    """Fraction of each cell where the (multi)linear interpolant of S is >= tau."""
    if dim == 1:
        a, b = S_nodal[:-1], S_nodal[1:]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        span = hi - lo
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(span > 0, (hi - tau) / span, (lo >= tau).astype(float))
        return np.clip(frac, 0.0, 1.0)
    corners = [S_nodal[:-1, :-1], S_nodal[1:, :-1], S_nodal[:-1, 1:], S_nodal[1:, 1:]]
    cmin = np.minimum.reduce(corners)
    cmax = np.maximum.reduce(corners)
    frac = np.where(cmin >= tau, 1.0, 0.0)
    mixed = (cmin < tau) & (cmax >= tau)
    if mixed.any():
        r = (np.arange(samples) + 0.5) / samples
        p, q = np.meshgrid(r, r, indexing="ij")
        s00, s10, s01, s11 = (c[mixed][:, None, None] for c in corners)
        vals = (s00 * (1 - p) * (1 - q) + s10 * p * (1 - q)
                + s01 * (1 - p) * q + s11 * p * q)
        frac[mixed] = (vals >= tau).mean(axis=(1, 2))
    return frac
