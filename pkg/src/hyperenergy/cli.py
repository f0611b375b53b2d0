"""Command-line experiment runner.

    hyperenergy <verb> [--scenario NAME|FILE|JSON] [--out DIR] [options]

Verbs: solve, energy, verify, compat, converge, lorentz, tau-sweep, run, accept.
Exit codes: 0 when every enabled check passes, 2 when a check fails (the
failing checks are printed and recorded in report.json), 1 for
configuration errors (nothing is written).

A scenario config is JSON, for example::

    {"scenario": "variable-a", "N": 256, "T": 1.0,
     "params": {"amplitude": 0.5},
     "surfaces": ["constant:0.5", "affine:0.3,0.4"],
     "foliation": {"kind": "scaled-min", "a": 0.5, "b": 1.0},
     "grids": [128, 256, 512], "tau_grid": 11, "eps_sweep": [0.1, 0.05, 0.025]}

Surfaces are written ``constant:c``, ``affine:c,s1[,s2]`` (t = c + s.x) or
``scaled-min:tau,a,b`` (t = min(tau, tau (a + b x1))).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import checks, compat, lorentz
from .coefficients import CoefficientError
from .energy import (
    EnergyError,
    classical_energy,
    generalized_energy,
    horizontal_energy,
    partial_energy,
    theorem_reports,
)
from .fields import FieldError, SpaceTimeField, export_csv, load_csv
from .geometry import GeometryError, Hypersurface, classify, validate_foliation
from .identities import (
    IdentityError,
    IdentityResidualReport,
    decomposition_suite,
    extend_multiplier,
    flux_balance,
    gronwall_coefficient_min,
    measured_order,
    multiplier_balance,
    residual_energy_identity,
    residual_multiplier_identity,
)
from .scenarios import CATALOG, ScenarioError, manufactured
from .solver import SolverError, solve

SCHEMA_VERSION = 1
VERBS = ("solve", "energy", "verify", "compat", "converge", "lorentz", "tau-sweep", "accept")
IDENTITIES = ("uu", "uu3", "flux", "multiplier", "decomp", "gronwall")
FOLIATIONS = ("horizontal", "scaled-min", "min-affine")
DEFAULT_GRIDS = [128, 256, 512]

log = logging.getLogger("hyperenergy")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# -- configuration ----------------------------------------------------------------------


def _csv_floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _csv_ints(text):
    vals = _csv_floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def load_scenario_config(spec: str | None) -> dict:
    """Catalog name, path to a JSON file, or inline JSON."""
    if spec is None:
        return {"scenario": "standing"}
    spec = spec.strip()
    if spec.startswith("{"):
        try:
            cfg = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed inline scenario JSON: {exc}") from None
    elif spec in CATALOG:
        cfg = {"scenario": spec}
    elif os.path.exists(spec):
        try:
            cfg = json.loads(Path(spec).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed scenario file {spec}: {exc}") from None
    else:
        raise ConfigError(f"scenario {spec!r} is neither a catalog name ({sorted(CATALOG)}) "
                          "nor an existing JSON file")
    if not isinstance(cfg, dict):
        raise ConfigError("scenario config must be a JSON object")
    if cfg.get("scenario") not in CATALOG:
        raise ConfigError(f"unknown scenario {cfg.get('scenario')!r}; known: {sorted(CATALOG)}")
    known = {"scenario", "N", "T", "dim", "params", "surfaces", "foliation", "grids",
             "tau_grid", "eps_sweep", "order", "v", "experiment", "identities"}
    extra = set(cfg) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    return cfg


def resolve_config(args) -> dict:
    cfg = load_scenario_config(args.scenario)
    cfg.setdefault("N", 256)
    cfg.setdefault("T", 1.0)
    cfg.setdefault("dim", 1)
    cfg.setdefault("params", {})
    cfg.setdefault("surfaces", ["constant:0.5", "affine:0.3,0.4"])
    cfg.setdefault("foliation", {"kind": "horizontal"})
    cfg.setdefault("grids", None)  # per-experiment default when absent
    cfg.setdefault("tau_grid", 11)
    cfg.setdefault("eps_sweep", list(checks.EPS_SWEEP))
    cfg.setdefault("v", 0.5)
    if getattr(args, "N", None) is not None:
        cfg["N"] = args.N
    if getattr(args, "grids", None):
        cfg["grids"] = _csv_ints(args.grids)
    if getattr(args, "surface", None):
        cfg["surfaces"] = list(args.surface)
    if getattr(args, "tau_grid", None):
        cfg["tau_grid"] = args.tau_grid
    if getattr(args, "eps_sweep", None):
        cfg["eps_sweep"] = _csv_floats(args.eps_sweep)
    if getattr(args, "order", None) is not None:
        cfg["order"] = args.order
    if getattr(args, "v", None) is not None:
        cfg["v"] = args.v
    if getattr(args, "foliation", None):
        cfg["foliation"] = {**cfg.get("foliation", {}), "kind": args.foliation}
    grids = cfg["grids"]
    if grids is not None and (not grids or any(not isinstance(N, int) or N < 4 for N in grids)):
        raise ConfigError("grids must be integers >= 4")
    if grids is not None and any(b <= a for a, b in zip(grids[:-1], grids[1:])):
        raise ConfigError("grid list must be strictly increasing")
    if cfg["foliation"].get("kind") not in FOLIATIONS:
        raise ConfigError(f"foliation kind must be one of {FOLIATIONS}")
    if not -1 < float(cfg["v"]) < 1:
        raise ConfigError("boost velocity must satisfy |v| < 1")
    return cfg


def build_scenario(cfg, N=None):
    try:
        return manufactured(cfg["scenario"], N=N or cfg["N"], T=float(cfg["T"]),
                            dim=int(cfg["dim"]), **cfg["params"])
    except TypeError as exc:
        raise ConfigError(f"bad scenario parameters: {exc}") from None


def parse_surface(spec: str, grid) -> Hypersurface:
    kind, _, rest = spec.partition(":")
    vals = _csv_floats(rest) if rest else []
    if kind == "constant" and len(vals) == 1:
        return Hypersurface.constant(grid, vals[0])
    if kind == "affine" and len(vals) == 1 + grid.dim:
        return Hypersurface.affine(grid, vals[0], vals[1:])
    if kind == "scaled-min" and len(vals) == 3:
        tau, a, b = vals
        return scaled_min_surface(grid, tau, a, b)
    raise ConfigError(f"cannot parse surface {spec!r}")


def scaled_min_surface(grid, tau, a, b):
    """t = min(tau, tau (a + b x1)); kinks are detected from the cell gradients."""
    x = grid.mesh()[0]
    return Hypersurface(grid, np.minimum(tau, tau * (a + b * x)),
                        name=f"scaled-min({tau}, {a}, {b})")


def foliation_member(fol: dict, grid, tau: float) -> Hypersurface:
    kind = fol["kind"]
    if kind == "horizontal":
        return Hypersurface.constant(grid, tau)
    if kind == "scaled-min":
        return scaled_min_surface(grid, tau, float(fol.get("a", 0.5)), float(fol.get("b", 1.0)))
    # min-affine: min(tau, c + s x1), a family of truncations of one fixed slanted plane
    x = grid.mesh()[0]
    c, s = float(fol.get("offset", 0.3)), float(fol.get("slope", 0.4))
    return Hypersurface(grid, np.minimum(tau, c + s * x), name=f"min-affine({tau})")


def tau_values(cfg, T):
    """Explicit tau list, or k equispaced points on [0, T]."""
    tg = cfg["tau_grid"]
    if isinstance(tg, str) and "," in tg:
        taus = _csv_floats(tg)
    else:
        try:
            k = int(tg)
        except (TypeError, ValueError):
            raise ConfigError(f"tau grid must be a point count or a list, got {tg!r}") from None
        if k < 2:
            raise ConfigError("tau grid needs at least 2 points")
        taus = [round(float(x), 12) for x in np.linspace(0.0, T, k)]
    if isinstance(tg, list):
        taus = [float(t) for t in tg]
    if any(t < 0 or t > T for t in taus):
        raise ConfigError("tau values must lie in [0, T]")
    return [float(t) for t in taus]


def parse_tolerances(tokens) -> dict:
    """--tol.name=value or --tol.name value pairs."""
    tol, rest = {}, list(tokens)
    while rest:
        tok = rest.pop(0)
        if not tok.startswith("--tol."):
            raise ConfigError(f"unrecognized argument {tok!r}")
        name, eq, value = tok[len("--tol."):].partition("=")
        if not eq:
            if not rest:
                raise ConfigError(f"missing value for {tok}")
            value = rest.pop(0)
        if name not in checks.TOLERANCES:
            raise ConfigError(f"unknown tolerance {name!r}; known: {sorted(checks.TOLERANCES)}")
        try:
            tol[name] = float(value)
        except ValueError:
            raise ConfigError(f"tolerance {name} must be numeric, got {value!r}") from None
    return tol


# -- outputs -----------------------------------------------------------------------------


class Outcome:
    """Results, CSV tables and named checks of one experiment."""

    def __init__(self):
        self.results = {}
        self.tables = {}
        self.checks = []
        self.fields = {}

    def check(self, name, ok, **detail):
        self.checks.append({"name": name, "passed": bool(ok), **checks._jsonable(detail)})
        return ok

    def table(self, name, header, rows):
        self.tables[name] = (list(header), [list(r) for r in rows])

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)


def _check_out_dir(out):
    p = Path(out).resolve()
    probe = p
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir() or not os.access(probe, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v


def write_outputs(out, verb, cfg, scenario, seed, tol, outcome: Outcome):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "schema_version": SCHEMA_VERSION,
        "experiment": verb,
        "config": cfg,
        "scenario": scenario.descriptor() if scenario is not None else None,
        "scenario_hash": scenario.digest() if scenario is not None else None,
        "seed": seed,
        "tolerances": {**checks.TOLERANCES, **tol},
        "results": checks._jsonable(outcome.results),
        "checks": outcome.checks,
        "passed": outcome.passed,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for name, (header, rows) in outcome.tables.items():
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
    for name, fld in outcome.fields.items():
        export_csv(fld, out / f"{name}.csv")


# -- experiments ---------------------------------------------------------------------------


def _tolerances(tol):
    return {**checks.TOLERANCES, **tol}


def exp_solve(cfg, tol, seed):
    s = build_scenario(cfg)
    r = solve(s)
    o = Outcome()
    o.results = {"dt": r.dt, "steps": r.steps, "max_error": r.max_error,
                 "levels": r.u.n_levels, "nodes": list(r.grid.shape)}
    o.fields["field"] = r.u
    o.check("finite values", bool(np.all(np.isfinite(r.u.values))))
    return s, o


def _surfaces(cfg, grid):
    return {spec: parse_surface(spec, grid) for spec in cfg["surfaces"]}


def exp_energy(cfg, tol, seed, solve_dir=None):
    if solve_dir is not None:
        prev = json.loads((Path(solve_dir) / "report.json").read_text())
        base = prev["config"]
        cfg = {**base, "surfaces": cfg["surfaces"], "tau_grid": cfg["tau_grid"]}
        s = build_scenario(cfg)
        r = SimpleNamespace(u=load_csv(Path(solve_dir) / "field.csv", s.grid,
                                       prev["results"]["dt"]))
    else:
        s = build_scenario(cfg)
        r = solve(s)
    o = Outcome()
    rows, tau_rows = [], []
    for spec, S in _surfaces(cfg, s.grid).items():
        taus = tau_values(cfg, S.T2)
        cls = classify(S, s.A)
        entry = {"kind": cls.kind.value, "max_slope": cls.max_slope}
        if not o.check(f"surface {spec} is non-timelike", cls.non_timelike,
                       max_slope=cls.max_slope):
            o.results[spec] = entry
            continue
        rep = theorem_reports(s, r, S)
        entry.update(rep.as_dict())
        o.results[spec] = entry
        rows.append([spec, cls.kind.value, cls.max_slope, rep.E_surface, rep.e0,
                     rep.ratio_gap, rep.ratio_bound, rep.ratio_conormal])
        Etau = []
        for tau in taus:
            Et = partial_energy(r.u, S, s.A, tau)
            et = horizontal_energy(r.u, s.A, S, tau)
            Etau.append(Et)
            tau_rows.append([spec, tau, Et, et])
        scale = max(max(Etau), 1e-300)
        worst = max((b - a) / scale for a, b in zip(Etau[:-1], Etau[1:]))
        # E_tau decreases in the continuum; allow quadrature noise at the finest level
        o.check(f"{spec}: E_tau non-increasing", worst <= 1e-3, worst_increase=worst)
    o.table("energy", ["surface", "kind", "max_slope", "E", "e0", "ratio_gap", "ratio_bound",
                       "ratio_conormal"], rows)
    o.table("energy_tau", ["surface", "tau", "E_tau", "e_tau"], tau_rows)
    return s, o


def _solve_grid(cfg, N):
    s = build_scenario(cfg, N)
    return s, solve(s)


def exp_verify(cfg, tol, seed, identities):
    t = _tolerances(tol)
    o = Outcome()
    s0 = build_scenario(cfg)
    wanted = IDENTITIES if identities == "all" else tuple(identities.split(","))
    bad = set(wanted) - set(IDENTITIES)
    if bad:
        raise ConfigError(f"unknown identities {sorted(bad)}; choose from {IDENTITIES} or all")
    grids = cfg["grids"] or DEFAULT_GRIDS
    needs_solves = {"uu", "uu3", "flux", "multiplier"} & set(wanted)
    solves = [_solve_grid(cfg, N) for N in grids] if needs_solves else []
    hs = [s.grid.h[0] for s, _ in solves]
    reports = {}
    if "uu" in wanted:
        res = [float(np.max(np.abs(residual_energy_identity(r.u.values, r.dt, s.A))))
               for s, r in solves]
        reports["uu"] = IdentityResidualReport("uu", hs, res)
    if "uu3" in wanted:
        res = [float(np.max(np.abs(residual_multiplier_identity(r.u.values, r.dt, s.A,
                                                                 extend_multiplier(s.A)))))
               for s, r in solves]
        reports["uu3"] = IdentityResidualReport("uu3", hs, res)
    for key in ("uu", "uu3"):
        if key in reports:
            rep = reports[key]
            o.results[key] = rep.as_dict()
            order = rep.order if len(hs) >= 3 else measured_order(hs, rep.max_residuals)
            o.check(f"{key}: refinement order", order >= t["identity_order"], order=order)
    for key, fn in (("flux", "flux"), ("multiplier", "multiplier")):
        if key not in wanted:
            continue
        per_surface = {}
        for spec in cfg["surfaces"]:
            rel, terms = [], []
            for s, r in solves:
                S = parse_surface(spec, s.grid)
                if fn == "flux":
                    b = flux_balance(r.u, s, S, 0.0)
                    rel.append(abs(b.residual) / max(b.terms["e_tau"], 1e-300))
                else:
                    b = multiplier_balance(r.u, s, S, extend_multiplier(s.A), 0.0)
                    rel.append(b.relative)
                terms.append(b.terms)
            order = measured_order(hs, rel)
            per_surface[spec] = {"relative_residual": rel, "order": order, "terms": terms}
            # residuals already at roundoff level count as converged
            ok = order >= t["identity_order"] or max(rel) < 1e-12
            o.check(f"{key} balance on {spec}: order", ok, order=order)
            if key == "flux":
                o.check(f"flux balance on {spec}: finest residual",
                        rel[-1] <= t["flux_rel"], residual=rel[-1])
        o.results[key] = {"h": hs, "surfaces": per_surface}
    if "decomp" in wanted:
        det = {}
        for n in (2, 3):
            p, e = decomposition_suite(np.random.default_rng(seed + n), samples=100, n=n)
            det[f"n={n}"] = {"product_error": p, "expansion_error": e}
            o.check(f"decomp n={n}", p <= t["decomp_product"] and e <= t["decomp_expansion"],
                    product_error=p, expansion_error=e)
        o.results["decomp"] = det
    if "gronwall" in wanted:
        vals = {}
        for D in (0.1, 1.0, 10.0):
            K, v = gronwall_coefficient_min(D)
            vals[str(D)] = {"K_star": K, "value": v}
            o.check(f"gronwall D={D}", t["gronwall_lo"] < v < t["gronwall_hi"], value=v)
        vv = [d["value"] for d in vals.values()]
        o.check("gronwall D-invariance", max(vv) - min(vv) <= t["gronwall_invariance"])
        o.results["gronwall"] = vals
    rows = []
    for key in ("uu", "uu3"):
        if key in reports:
            for h, v in zip(hs, reports[key].max_residuals):
                rows.append([key, "interior", h, v])
    for key in ("flux", "multiplier"):
        if key in o.results:
            for spec, d in o.results[key]["surfaces"].items():
                for h, v in zip(hs, d["relative_residual"]):
                    rows.append([key, spec, h, v])
    o.table("identities", ["identity", "where", "h", "residual"], rows)
    return s0, o


def exp_compat(cfg, tol, seed):
    t = _tolerances(tol)
    s = build_scenario(cfg)
    o = Outcome()
    from .solver import choose_dt
    dt = choose_dt(s.grid, s.A.ellipticity_bounds().c2)
    times = np.arange(int(round(s.T / dt)) + 1) * dt
    eps = cfg["eps_sweep"]
    K = cfg.get("order")
    hier, rows = compat.high_order_sweep(s, times, eps, K=K)
    scale = compat.hierarchy_scale(hier, s.grid)
    first = compat.first_order_sweep(s, times, eps, seed=seed)
    o.table("compat", ["eps", "h1_distance"] + [f"residual_k{k}" for k in range(hier.K + 1)],
            [[r.eps, r.h1_distance] + r.residuals for r in rows])
    o.table("compat_first_order", ["eps", "h1_distance", "residual_k0"],
            [[r.eps, r.h1_distance, r.residuals[0]] for r in first])
    worst = max(max(r.residuals) for r in rows) / scale
    dist = [r.h1_distance for r in rows]
    o.check("order-k residuals", worst <= t["compat_residual"], worst_relative=worst)
    o.check("H1 distance non-increasing", compat.non_increasing(dist), distances=dist)
    o.check("first-order H1 distance non-increasing",
            compat.non_increasing([r.h1_distance for r in first]))
    o.check("f_eps = f for t >= 2 eps", all(r.tail_exact for r in rows + first))
    o.check("u0 = f_eps(., 0) on the boundary", all(r.residuals[0] == 0.0 for r in first))
    # solutions driven by the mollified data: energy of consecutive differences
    f = compat.perturbed_boundary(s.boundary_field(times))
    S = parse_surface(cfg["surfaces"][0], s.grid)
    sols = [solve(s, dt=dt, boundary=compat.mollify_high_order(f, hier, e, s.grid).field).u
            for e in eps]
    diffs = [generalized_energy(SpaceTimeField(a.values - b.values, dt, s.grid), S, s.A)
             for a, b in zip(sols[:-1], sols[1:])]
    o.results = {"K": hier.K, "scale": scale, "eps": eps, "h1_distance": dist,
                 "first_order_h1_distance": [r.h1_distance for r in first],
                 "solution_difference_energy": {"surface": cfg["surfaces"][0],
                                                "pairs": [[a, b] for a, b in
                                                          zip(eps[:-1], eps[1:])],
                                                "energy": diffs}}
    return s, o


def exp_converge(cfg, tol, seed):
    t = _tolerances(tol)
    o = Outcome()
    rows, errs, hs, energies = [], [], [], {}
    s = None
    grids = cfg["grids"] or DEFAULT_GRIDS
    for N in grids:
        s, r = _solve_grid(cfg, N)
        hs.append(s.grid.h[0])
        errs.append(r.max_error)
        row = [N, s.grid.h[0], r.dt, r.max_error]
        if s.homogeneous:
            e0 = classical_energy(s.initial.u0, s.initial.u1, s.A)
            for spec, S in _surfaces(cfg, s.grid).items():
                if classify(S, s.A).non_timelike:
                    rel = abs(generalized_energy(r.u, S, s.A) - e0) / max(e0, 1e-300)
                    energies.setdefault(spec, []).append(rel)
                    row.append(rel)
        rows.append(row)
    header = ["N", "h", "dt", "max_error"] + [f"energy_dev[{k}]" for k in energies]
    o.table("converge", header, rows)
    o.results = {"grids": grids, "h": hs, "max_error": errs, "energy_deviation": {}}
    if errs[0] is not None:
        order = measured_order(hs, errs) if all(e > 0 for e in errs) else float("inf")
        o.results["solver_order"] = order
        if all(e == 0 for e in errs):
            o.check("solver error vanishes", True)
        else:
            o.check("solver order", t["solver_order_lo"] <= order <= t["solver_order_hi"],
                    order=order)
    for spec, dev in energies.items():
        order = measured_order(hs, dev) if all(d > 0 for d in dev) else float("inf")
        o.results["energy_deviation"][spec] = {"relative": dev, "order": order}
        o.check(f"energy conservation order on {spec}",
                order >= t["conservation_order"] or max(dev) < 1e-12, order=order)
    return s, o


def exp_lorentz(cfg, tol, seed):
    t = _tolerances(tol)
    v = float(cfg["v"])
    grids = cfg["grids"] or [300, 600, 1200]
    o = Outcome()
    res = lorentz.residual_sweep(v, grids)
    hs = [2 * lorentz.HALF_WIDTH / N for N in grids]
    order = measured_order(hs, res) if all(x > 0 for x in res) else float("inf")
    r0 = solve(lorentz.pulse_scenario(grids[0]))
    b0 = lorentz.boosted_field(r0, 0.0)
    ident = float(np.max(np.abs(lorentz.wave_residual(b0)))) * r0.dt ** 2 / float(
        np.max(np.abs(b0.values)))
    pw = lorentz.plane_wave_error(v, grids[len(grids) // 2])
    ratio = lorentz.seminorm_ratio(solve(lorentz.pulse_scenario(grids[-1])), v)
    o.results = {"v": v, "gamma": lorentz.lorentz_factor(v), "grids": grids, "residual": res,
                 "order": order, "identity_residual_scaled": ident, "plane_wave_error": pw,
                 "seminorm_ratio": ratio}
    o.table("lorentz", ["N", "h", "max_residual"], [[N, h, x] for N, h, x in zip(grids, hs, res)])
    if v != 0.0:
        o.check("boosted residual order", order >= t["lorentz_order"], order=order)
    o.check("identity boost residual", ident <= t["lorentz_identity"], residual=ident)
    return lorentz.pulse_scenario(grids[0]), o


def exp_tau_sweep(cfg, tol, seed):
    t = _tolerances(tol)
    s = build_scenario(cfg)
    r = solve(s)
    o = Outcome()
    taus = tau_values(cfg, s.T)
    fol = cfg["foliation"]
    family = [foliation_member(fol, s.grid, tau) for tau in taus]
    rep = validate_foliation(family)
    o.results["foliation"] = {"kind": fol["kind"], "ok": rep.ok, "tau_pair": rep.tau_pair,
                              "node": rep.node, "violation": rep.violation}
    if not o.check("foliation is monotone", rep.ok, tau_pair=rep.tau_pair,
                   violation=rep.violation):
        return s, o
    ref = parse_surface(cfg["surfaces"][0], s.grid)
    e0 = classical_energy(s.initial.u0, s.initial.u1, s.A)
    rows, devs = [], []
    for tau, S in zip(taus, family):
        cls = classify(S, s.A)
        if not o.check(f"member tau={tau:g} non-timelike", cls.non_timelike,
                       max_slope=cls.max_slope):
            continue
        E_member = generalized_energy(r.u, S, s.A)
        if tau <= ref.T2:
            row = [tau, partial_energy(r.u, ref, s.A, tau), E_member,
                   horizontal_energy(r.u, s.A, ref, tau)]
        else:  # above the reference surface both regions are empty
            row = [tau, 0.0, E_member, 0.0]
        if s.homogeneous:
            dev = abs(E_member - e0) / max(e0, 1e-300) if e0 > 0 else abs(E_member)
            devs.append(dev)
            row.append(dev)
        rows.append(row)
    header = ["tau", "E_tau", "E_member", "e_tau"] + (["deviation"] if s.homogeneous else [])
    o.table("tau_sweep", header, rows)
    o.results.update({"taus": taus, "reference_surface": cfg["surfaces"][0], "e0": e0})
    if s.homogeneous and devs:
        o.results["max_deviation"] = max(devs)
        o.check("energy conserved across the foliation", max(devs) <= t["conservation_rel"],
                max_deviation=max(devs))
    return s, o


def exp_accept(cfg, tol, seed, criteria):
    nums = sorted(checks.CRITERIA) if criteria in (None, "all") else _csv_ints(criteria)
    bad = set(nums) - set(checks.CRITERIA)
    if bad:
        raise ConfigError(f"unknown criteria {sorted(bad)}")
    o = Outcome()
    results = checks.run_criteria(nums, tol=tol, seed=seed)
    for res in results:
        o.check(f"criterion {res.number}: {res.name}", res.passed, failures=res.failures)
        o.results[str(res.number)] = res.as_dict()
    o.table("acceptance", ["criterion", "name", "passed", "failures"],
            [[r.number, r.name, r.passed, "; ".join(r.failures)] for r in results])
    return None, o


# -- entry point -----------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="hyperenergy", description="Surface energies for variable-coefficient "
                                                 "wave equations: solver, checks and sweeps.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb")

    def common(sp):
        sp.add_argument("--scenario", help="catalog name, JSON file or inline JSON")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--N", type=int, help="cells per axis")
        sp.add_argument("--grids", help="comma-separated grid sizes, strictly increasing")
        sp.add_argument("--surface", action="append",
                        help="surface spec (repeatable), e.g. constant:0.5, affine:0.3,0.4")
        sp.add_argument("--tau-grid", help="number of tau points or a comma list")
        sp.add_argument("--eps-sweep", help="comma-separated eps values")
        sp.add_argument("--order", type=int, help="compatibility order K")
        sp.add_argument("--identities", default="all",
                        help="all or a comma list of " + ",".join(IDENTITIES))
        sp.add_argument("--v", type=float, help="boost velocity")
        sp.add_argument("--foliation", choices=FOLIATIONS)
        sp.add_argument("--solve", dest="solve_dir", help="reuse the field from a solve run")
        sp.add_argument("--criteria", help="acceptance criteria to run (default all)")

    for verb in VERBS:
        common(sub.add_parser(verb))
    run = sub.add_parser("run", help="run an experiment kind (defaults to the config's)")
    run.add_argument("kind", nargs="?", choices=VERBS)
    common(run)
    return p


def dispatch(verb, args, cfg, tol):
    if verb == "solve":
        return exp_solve(cfg, tol, args.seed)
    if verb == "energy":
        return exp_energy(cfg, tol, args.seed, args.solve_dir)
    if verb == "verify":
        return exp_verify(cfg, tol, args.seed, cfg.get("identities", args.identities)
                          if args.identities == "all" else args.identities)
    if verb == "compat":
        return exp_compat(cfg, tol, args.seed)
    if verb == "converge":
        return exp_converge(cfg, tol, args.seed)
    if verb == "lorentz":
        return exp_lorentz(cfg, tol, args.seed)
    if verb == "tau-sweep":
        return exp_tau_sweep(cfg, tol, args.seed)
    if verb == "accept":
        return exp_accept(cfg, tol, args.seed, args.criteria)
    raise ConfigError(f"unknown experiment kind {verb!r}")


CONFIG_ERRORS = (ConfigError, ScenarioError, GeometryError, CoefficientError, FieldError,
                 compat.CompatError, lorentz.LorentzError, SolverError, IdentityError,
                 EnergyError, OSError, KeyError)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        tol = parse_tolerances(extra)
        if args.verb is None:
            raise ConfigError("missing verb; choose one of " + ", ".join(VERBS + ("run",)))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        verb = args.verb
        if verb == "run":
            verb = args.kind or cfg.get("experiment")
            if verb not in VERBS:
                raise ConfigError(f"unknown experiment kind {verb!r}")
        if args.solve_dir is not None and not (Path(args.solve_dir) / "report.json").exists():
            raise ConfigError(f"no solve report in {args.solve_dir}")
        _check_out_dir(args.out)
        scenario, outcome = dispatch(verb, args, cfg, tol)
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    write_outputs(args.out, verb, cfg, scenario, args.seed, tol, outcome)
    failed = [c["name"] for c in outcome.checks if not c["passed"]]
    for c in outcome.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    if failed:
        print("failed checks: " + "; ".join(failed), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
