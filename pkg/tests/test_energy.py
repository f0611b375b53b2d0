import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from hyperenergy.coefficients import CoefficientField
from hyperenergy.energy import (
    EnergyError,
    classical_energy,
    conormal,
    generalized_energy,
    h1_surface_norm,
    horizontal_energy,
    partial_energy,
    surface_energy,
    theorem_reports,
    trace,
)
from hyperenergy.fields import SpaceTimeField
from hyperenergy.geometry import Hypersurface
from hyperenergy.scenarios import manufactured
from hyperenergy.solver import solve

HALF_PI2 = np.pi ** 2 / 2


@pytest.fixture(scope="module")
def standing():
    s = manufactured("standing", N=1024)
    return s, solve(s)


@pytest.fixture(scope="module")
def standing_coarse():
    s = manufactured("standing", N=128)
    return s, solve(s)


def closed_form_energy(S, dS):
    """Quadrature of the exact trace of sin(pi x) cos(pi t) along t = S(x)."""
    def dens(x):
        s, ds = S(x), dS(x)
        ut = -np.pi * np.sin(np.pi * x) * np.sin(np.pi * s)
        dtrace = np.pi * np.cos(np.pi * x) * np.cos(np.pi * s) + ds * ut
        return dtrace ** 2 + (1 - ds ** 2) * ut ** 2
    return quad(dens, 0, 1, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


@pytest.mark.parametrize("S,dS", [(lambda x: 0.5 + 0 * x, lambda x: 0 * x),
                                  (lambda x: 0.3 + 0.4 * x, lambda x: 0.4 + 0 * x),
                                  (lambda x: x, lambda x: 1 + 0 * x)])
def test_oracle_value_is_half_pi_squared(S, dS):
    assert closed_form_energy(S, dS) == pytest.approx(HALF_PI2, rel=1e-12)


def test_flat_surface_is_classical(standing_coarse):
    s, r = standing_coarse
    S0 = Hypersurface.constant(s.grid, 0.0)
    tr = trace(r.u, S0)
    np.testing.assert_allclose(tr.u, s.initial.u0, atol=1e-14)
    np.testing.assert_allclose(tr.ut, r.u.values[1] * 0 + tr.ut)  # shape sanity
    E = surface_energy(tr, S0, s.A)
    assert E == pytest.approx(classical_energy(tr.u, tr.ut, s.A), rel=1e-14)
    assert E == pytest.approx(HALF_PI2, rel=1e-3)


@pytest.mark.parametrize("kind", ["flat", "affine", "lightlike"])
def test_conserved_value(standing, kind):
    s, r = standing
    g = s.grid
    S = {"flat": Hypersurface.constant(g, 0.5), "affine": Hypersurface.affine(g, 0.3, 0.4),
         "lightlike": Hypersurface.affine(g, 0.0, 1.0)}[kind]
    assert generalized_energy(r.u, S, s.A) == pytest.approx(HALF_PI2, rel=1e-3)


def test_trace_of_linear_in_time_field(standing_coarse):
    s, r = standing_coarse
    g = s.grid
    vals = np.broadcast_to(r.u.times[:, None], r.u.values.shape).astype(complex)
    u = SpaceTimeField(vals, r.dt, g)
    S = Hypersurface.affine(g, 0.3, 0.4)
    tr = trace(u, S)
    np.testing.assert_allclose(tr.u, S.values, atol=1e-12)
    np.testing.assert_allclose(tr.ut, 1.0, atol=1e-10)
    np.testing.assert_allclose(tr.surface_grad[..., 0], 0.4, atol=1e-10)
    assert tr.chain_rule_discrepancy() < 1e-9


def test_trace_of_standing_converges():
    errs = []
    for N in (64, 128, 256):
        s = manufactured("standing", N=N)
        r = solve(s)
        S = Hypersurface.affine(s.grid, 0.3, 0.4)
        x = s.grid.coords[0]
        errs.append(np.max(np.abs(trace(r.u, S).u - np.sin(np.pi * x) * np.cos(np.pi * S.values))))
    assert errs[1] < errs[0] / 3 and errs[2] < errs[1] / 3


def test_lightlike_has_zero_time_weight(standing_coarse):
    s, r = standing_coarse
    S = Hypersurface.affine(s.grid, 0.0, 1.0)
    tr = trace(r.u, S)
    tr_scaled = type(tr)(**{**tr.__dict__, "ut": 1e6 * tr.ut})
    assert surface_energy(tr_scaled, S, s.A) == surface_energy(tr, S, s.A)


def test_timelike_rejected(standing_coarse):
    s, r = standing_coarse
    S = Hypersurface.affine(s.grid, 0.0, 1.0)
    with pytest.raises(EnergyError, match="timelike"):
        surface_energy(trace(r.u, S), S, s.A.scaled(4.0))


def test_partial_energy_limits(standing_coarse):
    s, r = standing_coarse
    S = Hypersurface.affine(s.grid, 0.3, 0.4)
    E = generalized_energy(r.u, S, s.A)
    assert partial_energy(r.u, S, s.A, 0.0) == pytest.approx(E, rel=1e-14)
    assert partial_energy(r.u, S, s.A, 0.3) == pytest.approx(E, rel=1e-14)
    assert partial_energy(r.u, S, s.A, 0.7) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(EnergyError):
        partial_energy(r.u, S, s.A, 1.5)


def test_horizontal_energy_at_zero_is_classical(standing_coarse):
    s, r = standing_coarse
    S = Hypersurface.constant(s.grid, 0.5)
    e0 = classical_energy(s.initial.u0, s.initial.u1, s.A)
    # u_t on the slice comes from interpolating levels, not from u1 directly
    assert horizontal_energy(r.u, s.A, S, 0.0) == pytest.approx(e0, rel=1e-8)


def test_partial_energy_monotone_in_tau(standing_coarse):
    s, r = standing_coarse
    S = Hypersurface.affine(s.grid, 0.3, 0.4)
    vals = [partial_energy(r.u, S, s.A, t) for t in np.linspace(0.3, 0.7, 9)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


class TestH1:
    def test_zero(self, standing_coarse):
        s, r = standing_coarse
        z = SpaceTimeField(np.zeros_like(r.u.values), r.dt, s.grid)
        S = Hypersurface.affine(s.grid, 0.3, 0.4)
        assert h1_surface_norm(trace(z, S), S, s.A)[0] == 0.0

    def test_flat_is_seminorm_of_u0(self, standing_coarse):
        s, r = standing_coarse
        S = Hypersurface.constant(s.grid, 0.0)
        val, _, _ = h1_surface_norm(trace(r.u, S), S)
        assert val == pytest.approx(HALF_PI2, rel=1e-3)

    def test_bound_on_slanted_surface(self, standing_coarse):
        s, r = standing_coarse
        S = Hypersurface.affine(s.grid, 0.3, 0.4)
        val, bound, ok = h1_surface_norm(trace(r.u, S), S, s.A)
        assert ok and 0 < val <= bound


def test_time_derivative_controlled_on_spacelike(standing_coarse):
    s, r = standing_coarse
    S = Hypersurface.affine(s.grid, 0.3, 0.4)
    tr = trace(r.u, S)
    ut_sq = float(np.trapezoid(np.abs(tr.ut) ** 2, s.grid.coords[0]))
    assert ut_sq <= surface_energy(tr, S, s.A) / (1 - 0.4 ** 2)


class TestConormal:
    def test_zero(self, standing_coarse):
        s, r = standing_coarse
        z = SpaceTimeField(np.zeros_like(r.u.values), r.dt, s.grid)
        assert conormal(z, s.A, Hypersurface.constant(s.grid, 0.5)).norm_sq == 0.0

    def test_closed_form(self):
        def oracle(T):
            return quad(lambda t: np.pi ** 2 * np.cos(np.pi * t) ** 2, 0, T)[0]
        errs = []
        for N in (128, 256):
            s = manufactured("standing", N=N)
            r = solve(s)
            S = Hypersurface.affine(s.grid, 0.3, 0.4)
            c = conormal(r.u, s.A, S)
            x0 = c.values[[f.side for f in c.faces].index(-1)].reshape(len(r.u.times))
            np.testing.assert_allclose(x0, -np.pi * np.cos(np.pi * r.u.times), atol=5.0 / N)
            errs.append(abs(c.norm_sq - oracle(0.3) - oracle(0.7)))
        assert errs[1] < errs[0] / 2 and errs[1] < 1e-3

    def test_linear_in_A(self, standing_coarse):
        s, r = standing_coarse
        S = Hypersurface.affine(s.grid, 0.3, 0.4)
        c1 = conormal(r.u, s.A, S)
        c4 = conormal(r.u, CoefficientField.from_family(s.grid, "scalar", value=4.0), S)
        for a, b in zip(c1.values, c4.values):
            np.testing.assert_allclose(b, 4 * a, rtol=1e-14)
        assert c4.norm_sq == pytest.approx(16 * c1.norm_sq, rel=1e-13)


def test_zero_scenario_reports_are_zero():
    s = manufactured("zero", N=32)
    rep = theorem_reports(s, solve(s), Hypersurface.affine(s.grid, 0.3, 0.4))
    for key in ("E_surface", "e0", "lhs", "rhs_gap", "lhs_bound", "rhs_bound", "lhs_conormal",
                "rhs_conormal", "ratio_gap", "ratio_bound", "ratio_conormal"):
        assert getattr(rep, key) == 0.0
    assert rep.conservation_residual == 0.0


def test_variable_a_reports_finite():
    s = manufactured("variable-a-boundary", N=128)
    rep = theorem_reports(s, solve(s), Hypersurface.affine(s.grid, 0.3, 0.4))
    assert rep.conservation_residual is None
    for key in ("ratio_gap", "ratio_bound", "ratio_conormal"):
        assert 0 < getattr(rep, key) < np.inf
    assert rep.norms["f_H1_Sigma0_sq"] > 0 and rep.norms["G_L2_Q0_sq"] > 0


@given(st.floats(0.0, 0.4), st.floats(-0.3, 0.3))
def test_energy_is_quadratic_form(c, a):
    """E(lambda u) = |lambda|^2 E(u) for complex lambda on any admissible surface."""
    s = manufactured("standing", N=32)
    r = _cached_solve()
    S = Hypersurface.affine(s.grid, 0.45 + 0.5 * c, a * 0.3)
    lam = 1.5 - 2j
    scaled = SpaceTimeField(lam * r.u.values, r.dt, s.grid)
    assert generalized_energy(scaled, S, s.A) == pytest.approx(
        abs(lam) ** 2 * generalized_energy(r.u, S, s.A), rel=1e-12)


_SOLVE = {}


def _cached_solve():
    if "r" not in _SOLVE:
        _SOLVE["r"] = solve(manufactured("standing", N=32))
    return _SOLVE["r"]
