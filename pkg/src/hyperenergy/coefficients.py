"""Symmetric coefficient fields A(x), the induced norm |xi|_A and ellipticity bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SpatialGrid, cell_average


class CoefficientError(ValueError):
    pass


@dataclass(frozen=True)
class EllipticityBounds:
    c1: float
    c2: float


def sym_eigvals_2x2(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigenvalues (smallest, largest) of stacked symmetric 2x2 matrices."""
    a, b, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 1]
    mean = 0.5 * (a + d)
    rad = np.hypot(0.5 * (a - d), b)
    return mean - rad, mean + rad


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


class CoefficientField:
    """Per-node symmetric positive definite matrices on a spatial grid.

    When built from an analytic family the field can also be evaluated off
    the grid (`evaluate`) and differentiated exactly (`gradient`).
    """

    def __init__(self, grid: SpatialGrid, matrices, descriptor=None, func=None, grad_func=None):
        n = grid.dim
        matrices = np.array(matrices, dtype=float)
        if matrices.shape != grid.shape + (n, n):
            raise CoefficientError(
                f"expected matrices of shape {grid.shape + (n, n)}, got {matrices.shape}"
            )
        if not np.array_equal(matrices, np.swapaxes(matrices, -1, -2)):
            raise CoefficientError("coefficient matrices must be symmetric")
        self.grid = grid
        self.matrices = matrices
        self.matrices.setflags(write=False)
        self.descriptor = descriptor or {"family": "array"}
        self._func = func
        self._grad_func = grad_func
        lo, _ = self._eigen_extremes()
        if lo.min() <= 0:
            node = np.unravel_index(int(np.argmin(lo)), grid.shape)
            raise CoefficientError(
                f"coefficient matrix not positive definite at node {tuple(int(i) for i in node)}"
            )

    # -- construction ----------------------------------------------------------

    @classmethod
    def from_family(cls, grid: SpatialGrid, family: str = "identity", **params):
        n = grid.dim
        eye = np.eye(n)
        if family == "identity":
            return cls._constant(grid, eye, {"family": "identity"})
        if family == "scalar":
            c = float(params.get("value", 1.0))
            return cls._constant(grid, c * eye, {"family": "scalar", "value": c})
        if family == "diag":
            d = np.asarray(params["values"], dtype=float)
            return cls._constant(grid, np.diag(d), {"family": "diag", "values": d.tolist()})
        if family == "rotated-diag":
            if n != 2:
                raise CoefficientError("rotated-diag needs a 2D grid")
            theta = float(params.get("angle", 0.0))
            d = np.asarray(params.get("values", (1.0, 1.0)), dtype=float)
            R = _rotation(theta)
            M = R @ np.diag(d) @ R.T
            M = 0.5 * (M + M.T)
            return cls._constant(grid, M, {"family": "rotated-diag", "angle": theta,
                                           "values": d.tolist()})
        if family == "sine-scalar":
            amp = float(params.get("amplitude", 0.5))
            if not abs(amp) < 1:
                raise CoefficientError("sine-scalar amplitude must satisfy |amp| < 1")

            def func(*X):
                return (1.0 + amp * np.sin(np.pi * X[0]))[..., None, None] * eye

            def grad_func(*X):
                out = np.zeros(X[0].shape + (n, n, n))
                out[..., 0, :, :] = (amp * np.pi * np.cos(np.pi * X[0]))[..., None, None] * eye
                return out

            return cls(grid, func(*grid.mesh()), {"family": "sine-scalar", "amplitude": amp},
                       func, grad_func)
        raise CoefficientError(f"unknown coefficient family {family!r}")

    @classmethod
    def _constant(cls, grid, M, descriptor):
        n = grid.dim
        M = np.asarray(M, dtype=float)

        def func(*X):
            return np.broadcast_to(M, X[0].shape + (n, n)).copy()

        def grad_func(*X):
            return np.zeros(X[0].shape + (n, n, n))

        return cls(grid, func(*grid.mesh()), descriptor, func, grad_func)

    @classmethod
    def from_array(cls, grid: SpatialGrid, path_or_array):
        """Arbitrary per-node matrices, e.g. loaded from a ``.npy`` file."""
        data = path_or_array
        if not isinstance(data, np.ndarray):
            data = np.load(data)
        return cls(grid, data, {"family": "array"})

    # -- evaluation ------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def analytic(self) -> bool:
        return self._grad_func is not None

    def at(self, node) -> np.ndarray:
        return self.matrices[tuple(np.atleast_1d(node))]

    def evaluate(self, *X) -> np.ndarray:
        if self._func is None:
            raise CoefficientError("array-backed coefficients cannot be evaluated off-grid")
        return self._func(*X)

    def gradient(self, *X) -> np.ndarray:
        """dA/dx_k with shape (..., k, i, j); only for analytic families."""
        if self._grad_func is None:
            raise CoefficientError("grad A is only available for analytic coefficient families")
        if not X:
            X = self.grid.mesh()
        return self._grad_func(*X)

    def cell_matrices(self) -> np.ndarray:
        return cell_average(self.matrices, self.dim)

    def scaled(self, factor: float) -> "CoefficientField":
        f = float(factor)
        func = (lambda *X: f * self._func(*X)) if self._func else None
        grad = (lambda *X: f * self._grad_func(*X)) if self._grad_func else None
        desc = dict(self.descriptor, scale=f * self.descriptor.get("scale", 1.0))
        return CoefficientField(self.grid, f * self.matrices, desc, func, grad)

    def on_grid(self, grid: SpatialGrid) -> "CoefficientField":
        """Re-sample an analytic family on another grid."""
        if self._func is None:
            raise CoefficientError("array-backed coefficients cannot be re-sampled")
        return CoefficientField(grid, self._func(*grid.mesh()), self.descriptor,
                                self._func, self._grad_func)

    def a_norm_sq(self, node, xi) -> float:
        xi = np.atleast_1d(np.asarray(xi, dtype=complex))
        if xi.shape != (self.dim,):
            raise CoefficientError(f"vector of dimension {xi.shape} for a {self.dim}D field")
        return a_norm_sq(self.at(node), xi)

    def _eigen_extremes(self):
        if self.dim == 1:
            v = self.matrices[..., 0, 0]
            return v, v
        return sym_eigvals_2x2(self.matrices)

    def ellipticity_bounds(self) -> EllipticityBounds:
        lo, hi = self._eigen_extremes()
        return EllipticityBounds(float(lo.min()), float(hi.max()))


def a_norm_sq(A: np.ndarray, xi) -> float | np.ndarray:
    """Re(conj(xi)^T A xi), vectorised over leading axes."""
    xi = np.asarray(xi)
    return np.real(np.einsum("...i,...ij,...j->...", np.conj(xi), A, xi))


def ellipticity_bounds(A: CoefficientField) -> EllipticityBounds:
    return A.ellipticity_bounds()
