"""Acceptance runners.

Each ``criterion_k`` runs one numbered acceptance check end to end and
returns a :class:`CheckResult`; tolerances come from :data:`TOLERANCES`
unless overridden.  The CLI verb ``accept`` and the pytest acceptance suite
both call these functions, so the numbers in the report and the test
verdicts come from the same code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import compat, lorentz
from .coefficients import CoefficientField
from .energy import generalized_energy, theorem_reports
from .fields import SpaceTimeField
from .geometry import Domain, Hypersurface, SpatialGrid
from .identities import (
    MultiplierField,
    decomposition_suite,
    extend_multiplier,
    flux_balance,
    gronwall_coefficient_min,
    measured_order,
    polynomial_field,
    residual_energy_identity,
    residual_multiplier_identity,
)
from .scenarios import linear_combination, manufactured
from .solver import choose_dt, solve

# Defaults; every entry can be overridden from the CLI with --tol.<name>=<value>.
TOLERANCES = {
    "conservation_rel": 1e-3,         # 1: |E - e0| / e0 at the finest grid
    "conservation_order": 1.0,        # 1: refinement order
    "flux_rel": 1e-2,                 # 2: residual / e(0) at the finest grid
    "flux_order": 1.0,                # 2
    "identity_order": 1.0,            # 3: variable-a refinement order
    "identity_exact": 1e-10,          # 3: polynomial residual / scale
    "decomp_product": 1e-10,          # 4: | |nu|_A^2 M11 - 1 |
    "decomp_expansion": 1e-10,        # 4: expansion vs direct quadratic form
    "gronwall_lo": 3.5,               # 5
    "gronwall_hi": 4.0,               # 5
    "gronwall_invariance": 1e-8,      # 5
    "ratio_spread": 0.20,             # 6: max/min - 1 of LHS/RHS across grids
    "homogeneous_order": 1.0,         # 6: order of |E - e0| for f = G = 0
    "triangle_slack": 1e-12,          # 7: slack >= -tol * scale
    "compat_residual": 1e-10,         # 8: residual / scale
    "lorentz_order": 1.5,             # 9
    "lorentz_identity": 1e-12,        # 9: v = 0 residual, scaled by dt^2 / max|u|
    "solver_order_lo": 1.9,           # 10
    "solver_order_hi": 2.1,           # 10
    "linearity": 1e-12,               # 10: relative
    "propagation": 1e-15,             # 10: outside t + r + 2h, relative to max|u0|
}

EPS_SWEEP = (0.1, 0.05, 0.025)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"criterion": self.number, "name": self.name, "passed": self.passed,
                "failures": self.failures, "details": _jsonable(self.details)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


class _Checker:
    """Collects named pass/fail conditions for one criterion."""

    def __init__(self):
        self.failures = []

    def require(self, ok, label: str):
        if not bool(ok):
            self.failures.append(label)
        return bool(ok)


def _tol(tol):
    merged = dict(TOLERANCES)
    if tol:
        unknown = set(tol) - set(TOLERANCES)
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        merged.update(tol)
    return merged


def _finish(number, name, chk, details):
    return CheckResult(number, name, not chk.failures, details, chk.failures)


# -- 1 ----------------------------------------------------------------------------------


def standing_surfaces(grid):
    return {
        "constant-0.5": Hypersurface.constant(grid, 0.5),
        "affine-0.3+0.4x": Hypersurface.affine(grid, 0.3, 0.4),
        "lightlike-x": Hypersurface.affine(grid, 0.0, 1.0),
    }


def criterion_1(tol=None, grids=(512, 1024, 2048)) -> CheckResult:
    """Conservation of the surface energy for the standing wave."""
    t = _tol(tol)
    chk = _Checker()
    e0 = math.pi ** 2 / 2
    errors = {}
    hs = []
    for N in grids:
        s = manufactured("standing", N=N)
        r = solve(s)
        hs.append(s.grid.h[0])
        for name, S in standing_surfaces(s.grid).items():
            errors.setdefault(name, []).append(abs(generalized_energy(r.u, S, s.A) - e0) / e0)
    details = {"grids": list(grids), "e0": e0, "relative_error": errors, "order": {}}
    for name, errs in errors.items():
        order = measured_order(hs, errs)
        details["order"][name] = order
        chk.require(errs[-1] <= t["conservation_rel"], f"{name}: relative error at N={grids[-1]}")
        chk.require(order >= t["conservation_order"], f"{name}: refinement order")
    return _finish(1, "conservation", chk, details)


# -- 2 ----------------------------------------------------------------------------------


def criterion_2(tol=None, grids=(256, 512, 1024),
                scenarios=("standing", "variable-a", "variable-a-boundary")):
    """Flux balance on Q_0 normalised by e(0)."""
    t = _tol(tol)
    chk = _Checker()
    details = {"grids": list(grids)}
    for name in scenarios:
        rel, hs = [], []
        for N in grids:
            s = manufactured(name, N=N)
            r = solve(s)
            S = Hypersurface.affine(s.grid, 0.3, 0.4)
            b = flux_balance(r.u, s, S, 0.0)
            rel.append(abs(b.residual) / b.terms["e_tau"])
            hs.append(s.grid.h[0])
        order = measured_order(hs, rel)
        details[name] = {"relative_residual": rel, "order": order}
        chk.require(order >= t["flux_order"], f"{name}: flux residual order")
        chk.require(rel[-1] <= t["flux_rel"], f"{name}: flux residual at finest grid")
    return _finish(2, "flux balance", chk, details)


# -- 3 ----------------------------------------------------------------------------------


def polynomial_cases():
    """(values, dt, A, phi) with degree <= 2 space-time polynomials and linear phi."""
    g1 = SpatialGrid(Domain(((0.0, 1.0),), 1.0), 20)
    A1 = CoefficientField.from_family(g1, "identity")
    phi1 = MultiplierField(g1.coords[0][:, None], np.ones(g1.shape + (1, 1)), g1)
    cases = []
    for coeffs in ({(0, 0): 5.0}, {(1, 1): 1.0},
                   {(2, 0): 1.0, (0, 2): 1.0, (1, 1): 2 - 1j, (0, 1): 3.0, (0, 0): 1.0}):
        cases.append((polynomial_field(g1, 0.05, 21, coeffs), 0.05, A1, phi1))
    g2 = SpatialGrid(Domain(((0.0, 1.0), (0.0, 2.0)), 1.0), (10, 12))
    A2 = CoefficientField.from_family(g2, "rotated-diag", angle=0.3, values=(2.0, 1.0))
    X, Y = g2.mesh()
    jac = np.broadcast_to(np.array([[1.0, -1.0], [0.0, 2.0]]), g2.shape + (2, 2))
    phi2 = MultiplierField(np.stack([X, 2 * Y - X], -1), jac, g2)
    coeffs = {(2, 0, 0): 1.0, (0, 1, 1): 1j, (1, 0, 1): 2.0, (0, 2, 0): -1.0, (1, 1, 0): 0.5}
    cases.append((polynomial_field(g2, 0.1, 11, coeffs), 0.1, A2, phi2))
    return cases


def criterion_3(tol=None, grids=(128, 256, 512)) -> CheckResult:
    """Pointwise identities: refinement order on variable-a, exactness on polynomials."""
    t = _tol(tol)
    chk = _Checker()
    hs, e_energy, e_mult = [], [], []
    for N in grids:
        s = manufactured("variable-a", N=N)
        r = solve(s)
        phi = extend_multiplier(s.A)
        hs.append(s.grid.h[0])
        e_energy.append(float(np.max(np.abs(residual_energy_identity(r.u.values, r.dt, s.A)))))
        e_mult.append(float(np.max(np.abs(
            residual_multiplier_identity(r.u.values, r.dt, s.A, phi)))))
    o1, o2 = measured_order(hs, e_energy), measured_order(hs, e_mult)
    chk.require(o1 >= t["identity_order"], "energy identity order on variable-a")
    chk.require(o2 >= t["identity_order"], "multiplier identity order on variable-a")
    poly = []
    for values, dt, A, phi in polynomial_cases():
        scale = max(1.0, float(np.max(np.abs(values))))
        r1 = float(np.max(np.abs(residual_energy_identity(values, dt, A)))) / scale
        r2 = float(np.max(np.abs(residual_multiplier_identity(values, dt, A, phi)))) / scale
        poly.append([r1, r2])
        chk.require(max(r1, r2) <= t["identity_exact"], "polynomial exactness")
    details = {"grids": list(grids), "energy_identity": e_energy, "multiplier_identity": e_mult,
               "order_energy": o1, "order_multiplier": o2, "polynomial_relative": poly}
    return _finish(3, "pointwise identities", chk, details)


# -- 4, 5 ---------------------------------------------------------------------------------


def criterion_4(tol=None, seed: int = 0, samples: int = 100) -> CheckResult:
    t = _tol(tol)
    chk = _Checker()
    details = {}
    for n in (2, 3):
        p, e = decomposition_suite(np.random.default_rng(seed + n), samples=samples, n=n)
        details[f"n={n}"] = {"product_error": p, "expansion_error": e}
        chk.require(p <= t["decomp_product"], f"n={n}: product")
        chk.require(e <= t["decomp_expansion"], f"n={n}: expansion")
    return _finish(4, "gradient decomposition", chk, details)


def criterion_5(tol=None, Ds=(0.1, 1.0, 10.0)) -> CheckResult:
    t = _tol(tol)
    chk = _Checker()
    vals = {}
    for D in Ds:
        K, v = gronwall_coefficient_min(D)
        vals[str(D)] = {"K_star": K, "value": v}
        chk.require(t["gronwall_lo"] < v < t["gronwall_hi"], f"D={D}: value in range")
    values = [d["value"] for d in vals.values()]
    spread = max(values) - min(values)
    chk.require(spread <= t["gronwall_invariance"], "D-invariance")
    return _finish(5, "Gronwall coefficient", chk, {"minima": vals, "spread": spread})


# -- 6 ----------------------------------------------------------------------------------


RATIO_KEYS = ("ratio_gap", "ratio_bound", "ratio_conormal")


def criterion_6(tol=None, grids=(256, 512, 1024),
                scenarios=("variable-a", "variable-a-boundary")) -> CheckResult:
    """Implied constants stay put under refinement; homogeneous LHS vanishes."""
    t = _tol(tol)
    chk = _Checker()
    details = {"grids": list(grids)}
    for name in scenarios:
        ratios = {k: [] for k in RATIO_KEYS}
        for N in grids:
            s = manufactured(name, N=N)
            rep = theorem_reports(s, solve(s), Hypersurface.affine(s.grid, 0.3, 0.4))
            for k in RATIO_KEYS:
                ratios[k].append(getattr(rep, k))
        spread = {}
        for k, v in ratios.items():
            finite = all(math.isfinite(x) and x > 0 for x in v)
            chk.require(finite, f"{name}: {k} finite and positive")
            spread[k] = max(v) / min(v) - 1 if finite else float("inf")
            chk.require(spread[k] <= t["ratio_spread"], f"{name}: {k} spread")
        details[name] = {"ratios": ratios, "spread": spread}
    lhs, hs = [], []
    for N in grids:
        s = manufactured("standing", N=N)
        rep = theorem_reports(s, solve(s), Hypersurface.affine(s.grid, 0.3, 0.4))
        lhs.append(rep.lhs)
        hs.append(s.grid.h[0])
    order = measured_order(hs, lhs)
    chk.require(order >= t["homogeneous_order"], "homogeneous LHS order")
    details["standing"] = {"lhs": lhs, "order": order}
    return _finish(6, "theorem structure", chk, details)


# -- 7 ----------------------------------------------------------------------------------


def random_smooth_field(rng, grid, dt, n_levels, modes: int = 3) -> np.ndarray:
    """Random complex trigonometric polynomial in (t, x) sampled on the lattice."""
    t = np.arange(n_levels) * dt
    x = grid.coords[0]
    T, X = np.meshgrid(t, x, indexing="ij")
    out = np.zeros(T.shape, dtype=complex)
    for _ in range(modes):
        k, w = rng.uniform(-3, 3, size=2)
        c = rng.normal() + 1j * rng.normal()
        out += c * np.exp(1j * math.pi * (k * X + w * T))
    return out


def triangle_slacks(u1, u2, S, A):
    """Slack of |E1 - E2| <= E(u1-u2) + 2 sqrt(E(u1-u2) E_j) for j = 1, 2, with scale."""
    E1 = generalized_energy(u1, S, A)
    E2 = generalized_energy(u2, S, A)
    d = SpaceTimeField(u1.values - u2.values, u1.dt, u1.grid)
    Ed = generalized_energy(d, S, A)
    lhs = abs(E1 - E2)
    slacks = [Ed + 2 * math.sqrt(Ed * Ej) - lhs for Ej in (E1, E2)]
    return slacks, max(E1, E2, Ed)


def criterion_7(tol=None, seed: int = 0, pairs: int = 100, N: int = 64) -> CheckResult:
    t = _tol(tol)
    chk = _Checker()
    rng = np.random.default_rng(seed)
    grid = SpatialGrid(Domain(((0.0, 1.0),), 1.0), N)
    A = CoefficientField.from_family(grid, "sine-scalar", amplitude=0.5)
    dt = choose_dt(grid, A.ellipticity_bounds().c2)
    L = int(round(1.0 / dt)) + 1
    surfaces = {"constant-0.5": Hypersurface.constant(grid, 0.5),
                "affine-0.3+0.4x": Hypersurface.affine(grid, 0.3, 0.4),
                "affine-0.2+0.5x": Hypersurface.affine(grid, 0.2, 0.5)}
    worst = {}
    for name, S in surfaces.items():
        w = float("inf")
        for i in range(pairs):
            v1 = random_smooth_field(rng, grid, dt, L)
            # odd pairs are real multiples, for which the j = 1 bound is an equality
            v2 = rng.uniform(1.0, 3.0) * v1 if i % 2 else random_smooth_field(rng, grid, dt, L)
            u1 = SpaceTimeField(v1, dt, grid)
            u2 = SpaceTimeField(v2, dt, grid)
            slacks, scale = triangle_slacks(u1, u2, S, A)
            w = min(w, min(slacks) / scale)
        worst[name] = w
        chk.require(w >= -t["triangle_slack"], f"{name}: triangle slack")
    return _finish(7, "energy triangle inequality", chk, {"worst_relative_slack": worst})


# -- 8 ----------------------------------------------------------------------------------


def criterion_8(tol=None, scenarios=("standing", "variable-a", "variable-a-boundary",
                                     "traveling", "zero"), N: int = 128,
                eps=EPS_SWEEP) -> CheckResult:
    t = _tol(tol)
    chk = _Checker()
    details = {"eps": list(eps)}
    for name in scenarios:
        s = manufactured(name, N=N)
        times = np.arange(int(round(s.T / choose_dt(s.grid, s.A.ellipticity_bounds().c2))) + 1)
        times = times * (s.T / times[-1])
        hier, rows = compat.high_order_sweep(s, times, eps)
        scale = compat.hierarchy_scale(hier, s.grid)
        res = max(max(r.residuals) for r in rows) / scale
        dist = [r.h1_distance for r in rows]
        first = compat.first_order_sweep(s, times, eps)
        fdist = [r.h1_distance for r in first]
        details[name] = {"K": hier.K, "max_residual_relative": res, "h1_distance": dist,
                         "first_order_h1_distance": fdist,
                         "first_order_residual": max(r.residuals[0] for r in first)}
        chk.require(res <= t["compat_residual"], f"{name}: order-k residuals")
        chk.require(compat.non_increasing(dist), f"{name}: H1 distance non-increasing")
        chk.require(compat.non_increasing(fdist), f"{name}: first-order H1 distance")
        chk.require(all(r.tail_exact for r in rows + first), f"{name}: f_eps = f for t >= 2 eps")
        chk.require(all(r.residuals[0] == 0.0 for r in first), f"{name}: u0 = f_eps(., 0)")
    return _finish(8, "compatibility pipeline", chk, details)


# -- 9 ----------------------------------------------------------------------------------


def criterion_9(tol=None, v: float = 0.5, grids=(300, 600, 1200)) -> CheckResult:
    t = _tol(tol)
    chk = _Checker()
    res = lorentz.residual_sweep(v, grids)
    hs = [2 * lorentz.HALF_WIDTH / N for N in grids]
    order = measured_order(hs, res)
    r0 = solve(lorentz.pulse_scenario(grids[0]))
    b0 = lorentz.boosted_field(r0, 0.0)
    ident = float(np.max(np.abs(lorentz.wave_residual(b0)))) * r0.dt ** 2 / float(
        np.max(np.abs(b0.values)))
    pw = lorentz.plane_wave_error(v, grids[1])
    chk.require(order >= t["lorentz_order"], "boosted residual order")
    chk.require(ident <= t["lorentz_identity"], "identity boost residual")
    details = {"v": v, "gamma": lorentz.lorentz_factor(v), "grids": list(grids),
               "residual": res, "order": order, "identity_residual_scaled": ident,
               "plane_wave_error": pw}
    return _finish(9, "Lorentz boost", chk, details)


# -- 10 ---------------------------------------------------------------------------------


def propagation_leak(N: int = 256, width: float = 0.1, T: float = 0.3, margin: float = 2.0):
    """Largest |u| outside the physical cone (r + t + margin*h) and the numerical cone (r + n h)."""
    s = manufactured("gaussian-bump", N=N, T=T, width=width)
    r = solve(s)
    u = r.u.values
    x = s.grid.coords[0]
    h = s.grid.h[0]
    d = np.abs(x - s.params["center"])
    physical = numerical = 0.0
    for n, tn in enumerate(r.u.times):
        physical = max(physical, float(np.abs(u[n][d > width + tn + margin * h]).max(initial=0)))
        numerical = max(numerical, float(np.abs(u[n][d > width + n * h + 1e-12]).max(initial=0)))
    amp = float(np.max(np.abs(s.initial.u0)))
    return physical / amp, numerical / amp


def criterion_10(tol=None, grids=(128, 256, 512), seed: int = 0) -> CheckResult:
    t = _tol(tol)
    chk = _Checker()
    errs, hs = [], []
    for N in grids:
        r = solve(manufactured("standing", N=N))
        errs.append(r.max_error)
        hs.append(r.grid.h[0])
    order = measured_order(hs, errs)
    chk.require(t["solver_order_lo"] <= order <= t["solver_order_hi"], "standing order")
    z = solve(manufactured("zero", N=grids[0]))
    chk.require(not np.any(z.u.values), "zero data gives the zero field")
    rng = np.random.default_rng(seed)
    alpha, beta = rng.normal(size=2) + 1j * rng.normal(size=2)
    s1 = manufactured("variable-a", N=grids[0])
    s2 = manufactured("variable-a-boundary", N=grids[0])
    lin = solve(linear_combination(alpha, s1, beta, s2)).u.values
    ref = alpha * solve(s1).u.values + beta * solve(s2).u.values
    lin_err = float(np.max(np.abs(lin - ref)) / np.max(np.abs(ref)))
    chk.require(lin_err <= t["linearity"], "linearity")
    physical, numerical = propagation_leak(N=grids[1])
    chk.require(numerical == 0.0, "exact zero outside the numerical domain of dependence")
    chk.require(physical <= t["propagation"], "zero outside t + support radius + 2h")
    details = {"grids": list(grids), "max_error": errs, "order": order,
               "linearity_relative": lin_err, "leak_physical_cone": physical,
               "leak_numerical_cone": numerical}
    return _finish(10, "solver baseline", chk, details)


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


def run_criteria(numbers=None, tol=None, seed: int = 0) -> list[CheckResult]:
    out = []
    for k in numbers or sorted(CRITERIA):
        fn = CRITERIA[k]
        kwargs = {"tol": tol}
        if k in (4, 7, 10):
            kwargs["seed"] = seed
        out.append(fn(**kwargs))
    return out
