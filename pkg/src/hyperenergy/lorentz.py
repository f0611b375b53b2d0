"""Lorentz-boost scenario in one space dimension.

A free-space pulse is solved on a window wide enough that the boundary
never matters, then re-expressed in boosted coordinates

    t~ = gamma (t - v x),   x~ = gamma (x - v t),   gamma = (1 - v^2)^(-1/2)

by spline resampling.  The boosted field is tested against the same
discrete wave operator the solver uses, on a boosted lattice with the
solver's own spacings, so the identity boost reproduces the solver's
update equation exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .coefficients import CoefficientField
from .fields import InitialData
from .geometry import Domain, SpatialGrid
from .scenarios import Scenario
from .solver import SolveResult, solve

HALF_WIDTH = 3.0
HORIZON = 2.5
# boosted observation window (x~, t~); its preimage lies inside the solve window for |v| <= 0.5
WINDOW_X = (-1.0, 1.0)
WINDOW_T = (0.6, 1.4)


class LorentzError(ValueError):
    pass


def lorentz_factor(v: float) -> float:
    if not -1.0 < v < 1.0:
        raise LorentzError(f"boost velocity must satisfy |v| < 1, got {v}")
    return 1.0 / math.sqrt(1.0 - v * v)


def boost(v, t, x):
    """(t, x) -> (t~, x~)."""
    g = lorentz_factor(v)
    return g * (t - v * x), g * (x - v * t)


def unboost(v, tt, xt):
    """(t~, x~) -> (t, x)."""
    g = lorentz_factor(v)
    return g * (tt + v * xt), g * (xt + v * tt)


def pulse_scenario(N: int, width: float = 0.2, center: float = 0.0) -> Scenario:
    """Gaussian pulse at rest on [-3, 3]; Dirichlet data from d'Alembert's formula."""
    grid = SpatialGrid(Domain(((-HALF_WIDTH, HALF_WIDTH),), HORIZON), N)
    A = CoefficientField.from_family(grid, "identity")
    g = lambda x: np.exp(-((x - center) / width) ** 2)
    gp = lambda x: -2 * (x - center) / width ** 2 * g(x)
    u = lambda x, t: 0.5 * (g(x - t) + g(x + t))
    ut = lambda x, t: 0.5 * (-gp(x - t) + gp(x + t))
    grad = lambda x, t: [0.5 * (gp(x - t) + gp(x + t))]
    x = grid.coords[0]
    init = InitialData(u(x, 0.0).astype(complex), ut(x, 0.0).astype(complex))
    return Scenario("lorentz-pulse", {"N": N, "width": width, "center": center}, grid, A, init,
                    f=u, exact=u, exact_t=ut, exact_grad=grad, f_t=ut)


def plane_wave_scenario(N: int) -> Scenario:
    """u = sin(pi (x - t)) on [-3, 3] with matching boundary data."""
    grid = SpatialGrid(Domain(((-HALF_WIDTH, HALF_WIDTH),), HORIZON), N)
    A = CoefficientField.from_family(grid, "identity")
    u = lambda x, t: np.sin(np.pi * (x - t))
    ut = lambda x, t: -np.pi * np.cos(np.pi * (x - t))
    grad = lambda x, t: [np.pi * np.cos(np.pi * (x - t))]
    x = grid.coords[0]
    init = InitialData(u(x, 0.0).astype(complex), ut(x, 0.0).astype(complex))
    return Scenario("lorentz-plane-wave", {"N": N}, grid, A, init, f=u, exact=u, exact_t=ut,
                    exact_grad=grad, f_t=ut)


@dataclass
class BoostedField:
    v: float
    values: np.ndarray  # (t~ levels, x~ nodes), complex
    t: np.ndarray
    x: np.ndarray
    dt: float
    h: float


def _lattice(result: SolveResult):
    x = result.grid.coords[0]
    t = result.u.times
    xs = np.flatnonzero((x >= WINDOW_X[0] - 1e-12) & (x <= WINDOW_X[1] + 1e-12))
    ts = np.flatnonzero((t >= WINDOW_T[0] - 1e-12) & (t <= WINDOW_T[1] + 1e-12))
    return ts, xs


def _splines(result: SolveResult):
    x = result.grid.coords[0]
    t = result.u.times
    vals = result.u.values
    return (RectBivariateSpline(t, x, vals.real, kx=3, ky=3, s=0),
            RectBivariateSpline(t, x, vals.imag, kx=3, ky=3, s=0))


def boosted_field(result: SolveResult, v: float) -> BoostedField:
    """u~(x~, t~) := u(x, t) on the boosted lattice (window nodes, solver spacings)."""
    lorentz_factor(v)
    ts, xs = _lattice(result)
    tt = result.u.times[ts]
    xt = result.grid.coords[0][xs]
    dt, h = result.dt, result.grid.h[0]
    if v == 0.0:
        vals = np.array(result.u.values[np.ix_(ts, xs)])
        return BoostedField(v, vals, tt, xt, dt, h)
    TT, XT = np.meshgrid(tt, xt, indexing="ij")
    t, x = unboost(v, TT, XT)
    if t.min() < 0 or t.max() > result.grid.T or np.abs(x).max() > HALF_WIDTH:
        raise LorentzError("boosted window leaves the solved region; reduce |v|")
    re, im = _splines(result)
    vals = re.ev(t, x) + 1j * im.ev(t, x)
    return BoostedField(v, vals, tt, xt, dt, h)


def wave_residual(b: BoostedField) -> np.ndarray:
    """D_tt u~ - D_xx u~ with the solver's second differences, interior of the lattice."""
    u = b.values
    utt = (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / b.dt ** 2
    uxx = (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / b.h ** 2
    return utt - uxx


@dataclass
class LorentzReport:
    v: float
    gamma: float
    grids: list
    residuals: list  # max |residual| per grid
    order: float | None
    plane_wave_error: float | None = None
    seminorm_ratio: float | None = None  # boosted / slanted-profile H1 seminorm^2, expect gamma
    identity_residual: float | None = None

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def residual_sweep(v: float, grids=(300, 600, 1200)):
    res = []
    for N in grids:
        r = solve(pulse_scenario(N))
        res.append(float(np.max(np.abs(wave_residual(boosted_field(r, v))))))
    return res


def plane_wave_error(v: float, N: int = 600) -> float:
    """max |u~ - sin(pi gamma (1 - v)(x~ - t~))| over the boosted window."""
    g = lorentz_factor(v)
    b = boosted_field(solve(plane_wave_scenario(N)), v)
    TT, XT = np.meshgrid(b.t, b.x, indexing="ij")
    return float(np.max(np.abs(b.values - np.sin(np.pi * g * (1 - v) * (XT - TT)))))


def seminorm_ratio(result: SolveResult, v: float, t0: float = 1.0) -> float:
    """Compare int |d/dx~ u~(., t0)|^2 dx~ with the profile p(x) = u(x, t0/gamma + v x).

    Along the simultaneity line the two parametrisations differ by dx = gamma dx~,
    so the ratio of the two squared seminorms is gamma.
    """
    g = lorentz_factor(v)
    re, im = _splines(result)
    x = result.grid.coords[0]
    xt = x[(x >= WINDOW_X[0]) & (x <= WINDOW_X[1])]
    # boosted horizontal line t~ = t0
    tb, xb = unboost(v, np.full_like(xt, t0), xt)
    ub = re.ev(tb, xb) + 1j * im.ev(tb, xb)
    sb = np.trapezoid(np.abs(np.gradient(ub, xt, edge_order=2)) ** 2, xt)
    # slanted profile on native nodes covering the same segment
    lo, hi = xb.min(), xb.max()
    xs = x[(x >= lo) & (x <= hi)]
    xs = np.concatenate([[lo], xs[(xs > lo) & (xs < hi)], [hi]])
    S = t0 / g + v * xs
    p = re.ev(S, xs) + 1j * im.ev(S, xs)
    sp = np.trapezoid(np.abs(np.gradient(p, xs, edge_order=2)) ** 2, xs)
    return float(sb / sp)


def lorentz_scenario(v: float = 0.5, grids=(300, 600, 1200)) -> LorentzReport:
    from .identities import measured_order

    g = lorentz_factor(v)
    res = residual_sweep(v, grids)
    h = [2 * HALF_WIDTH / N for N in grids]
    order = measured_order(h, res) if all(r > 0 for r in res) else None
    ident = float(np.max(np.abs(wave_residual(boosted_field(solve(pulse_scenario(grids[0])), 0.0)))))
    ratio = seminorm_ratio(solve(pulse_scenario(grids[-1])), v)
    return LorentzReport(v, g, list(grids), res, order, plane_wave_error(v, grids[1]), ratio, ident)
