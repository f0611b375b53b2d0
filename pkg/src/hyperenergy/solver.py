"""Explicit leapfrog integration of u_tt - div(A grad u) = G with Dirichlet data."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .fields import BoundaryField, DivAGrad, SpaceTimeField
from .scenarios import Scenario, linear_combination, manufactured  # noqa: F401 (re-export)

log = logging.getLogger(__name__)

CFL_SAFETY = 0.9


class SolverError(RuntimeError):
    pass


@dataclass
class SolveResult:
    u: SpaceTimeField
    dt: float
    steps: int
    scenario: Scenario
    max_error: float | None = None

    @property
    def grid(self):
        return self.u.grid


def stable_dt(grid, c2: float, safety: float = CFL_SAFETY) -> float:
    """Largest admissible step: safety / sqrt(c2 * sum 1/h_k^2).

    In 1D this is safety * h / sqrt(c2).
    """
    return safety / math.sqrt(c2 * sum(1.0 / h ** 2 for h in grid.h))


def choose_dt(grid, c2: float, safety: float = CFL_SAFETY) -> float:
    """Largest step below the stability limit that divides T evenly."""
    dt_max = stable_dt(grid, c2, safety)
    n = math.ceil(grid.T / dt_max - 1e-12)
    return grid.T / n


def solve(s: Scenario, dt: float | None = None, boundary: BoundaryField | None = None,
          source=None, check_nan: bool = True) -> SolveResult:
    """Leapfrog with Taylor first step and Dirichlet rows overwritten each level.

    `boundary` overrides the scenario's f (e.g. mollified data) and
    `source` (levels x nodes array) overrides its G.
    """
    grid = s.grid
    c2 = s.A.ellipticity_bounds().c2
    dt_max = stable_dt(grid, c2)
    if dt is None:
        dt = choose_dt(grid, c2)
    elif dt > dt_max * (1 + 1e-12):
        raise SolverError(f"CFL violation: dt={dt:.6g} exceeds {dt_max:.6g}; refusing to run")
    n = int(round(grid.T / dt))
    if abs(n * dt - grid.T) > 1e-9 * grid.T:
        raise SolverError("dt must divide T")
    times = np.arange(n + 1) * dt
    if boundary is None:
        boundary = s.boundary_field(times)
    elif boundary.values.shape[0] != n + 1:
        raise SolverError("boundary field has the wrong number of levels")

    def G(level):
        if source is not None:
            return source[level]
        return s.source(times[level])

    bmask = grid.boundary_mask()
    op = DivAGrad(s.A)
    u = np.zeros((n + 1,) + grid.shape, dtype=complex)
    u[0] = s.initial.u0
    u[0][bmask] = boundary.values[0]
    u[1] = u[0] + dt * s.initial.u1 + 0.5 * dt ** 2 * (op(u[0]) + G(0))
    u[1][bmask] = boundary.values[1]
    for k in range(1, n):
        u[k + 1] = 2 * u[k] - u[k - 1] + dt ** 2 * (op(u[k]) + G(k))
        u[k + 1][bmask] = boundary.values[k + 1]
        if check_nan and not np.all(np.isfinite(u[k + 1])):
            raise SolverError(f"non-finite values at level {k + 1}")
    field = SpaceTimeField(u, dt, grid).freeze()
    err = None
    if s.exact is not None:
        X = grid.mesh()
        err = 0.0
        for k in range(n + 1):
            exact = np.broadcast_to(s.exact(*X, times[k]), grid.shape)
            err = max(err, float(np.max(np.abs(u[k] - exact))))
    log.debug("solved %s: %d steps, dt=%g", s.name, n, dt)
    return SolveResult(field, dt, n, s, err)
