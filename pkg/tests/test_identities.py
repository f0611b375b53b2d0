import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from hyperenergy.coefficients import CoefficientField
from hyperenergy.geometry import Domain, Hypersurface, SpatialGrid
from hyperenergy.identities import (
    IdentityError,
    IdentityResidualReport,
    MultiplierField,
    boundary_target,
    decomposition_suite,
    extend_multiplier,
    flux_balance,
    gradient_decomposition,
    gronwall_coefficient_min,
    gronwall_g,
    measured_order,
    multiplier_balance,
    polynomial_field,
    random_spd,
    residual_energy_identity,
    residual_multiplier_identity,
    sphere_decomposition_check,
)
from hyperenergy.scenarios import manufactured
from hyperenergy.solver import solve

GRONWALL_MIN = 3.5725462597  # frozen; re-derived below at 30 digits


def grid1(N=16):
    return SpatialGrid(Domain(((0.0, 1.0),), 1.0), N)


def grid2(N=8):
    return SpatialGrid(Domain(((0.0, 1.0), (0.0, 1.0)), 1.0), N)


class TestPointwise:
    def test_constant_exact(self):
        g = grid1()
        A = CoefficientField.from_family(g, "sine-scalar", amplitude=0.5)
        vals = np.full((12,) + g.shape, 3 - 2j)
        assert np.max(np.abs(residual_energy_identity(vals, 0.05, A))) == 0.0
        phi = extend_multiplier(A)
        assert np.max(np.abs(residual_multiplier_identity(vals, 0.05, A, phi))) == 0.0

    def test_bilinear_exact(self):
        g = grid1()
        A = CoefficientField.from_family(g, "identity")
        vals = polynomial_field(g, 0.05, 12, {(1, 1): 1.0})
        assert np.max(np.abs(residual_energy_identity(vals, 0.05, A))) <= 1e-12

    def test_multiplier_static_quadratic(self):
        g = grid1()
        A = CoefficientField.from_family(g, "identity")
        x = g.coords[0]
        phi = MultiplierField(x[:, None].copy(), np.ones(g.shape + (1, 1)), g)
        vals = polynomial_field(g, 0.05, 12, {(0, 2): 1.0})
        assert np.max(np.abs(residual_multiplier_identity(vals, 0.05, A, phi))) <= 1e-10

    def test_zero_multiplier(self):
        g = grid1()
        A = CoefficientField.from_family(g, "sine-scalar", amplitude=0.5)
        phi = MultiplierField(np.zeros(g.shape + (1,)), np.zeros(g.shape + (1, 1)), g)
        vals = polynomial_field(g, 0.05, 12, {(2, 0): 1.0, (0, 2): 2.0, (1, 1): 1j})
        r = residual_multiplier_identity(vals, 0.05, A, phi)
        assert np.max(np.abs(r)) == 0.0

    @pytest.mark.parametrize("coeffs", [{(2, 0): 1.0}, {(0, 2): 1.0, (1, 0): 2j},
                                        {(1, 1): 1.0, (0, 1): -1.0, (2, 0): 0.5}])
    def test_degree_two_polynomials_2d(self, coeffs):
        g = grid2()
        A = CoefficientField.from_family(g, "rotated-diag", angle=0.3, values=(2.0, 0.5))
        c2 = {(p[0], p[1], 0): c for p, c in coeffs.items()}
        c2[(0, 1, 1)] = 0.25
        vals = polynomial_field(g, 0.05, 12, c2)
        scale = max(1.0, np.max(np.abs(vals)) ** 2)
        assert np.max(np.abs(residual_energy_identity(vals, 0.05, A))) <= 1e-10 * scale
        # affine multiplier with exact Jacobian keeps every term polynomial
        X, Y = g.mesh()
        B = np.array([[0.5, -1.0], [0.25, 2.0]])
        pv = np.stack([B[0, 0] * X + B[0, 1] * Y + 0.1, B[1, 0] * X + B[1, 1] * Y - 0.2], -1)
        jac = np.broadcast_to(B.T, g.shape + (2, 2)).copy()  # jac[..., j, k] = d_j phi_k
        phi = MultiplierField(pv, jac, g)
        assert np.max(np.abs(residual_multiplier_identity(vals, 0.05, A, phi))) <= 1e-10 * scale

    def test_non_analytic_A_rejected(self):
        g = grid1()
        A = CoefficientField.from_array(g, np.ones(g.shape + (1, 1)))
        phi = extend_multiplier(A)
        with pytest.raises(IdentityError):
            residual_multiplier_identity(np.zeros((6,) + g.shape), 0.1, A, phi)

    def test_variable_a_orders(self):
        hs, e1, e2 = [], [], []
        for N in (64, 128, 256):
            s = manufactured("variable-a", N=N)
            r = solve(s)
            phi = extend_multiplier(s.A)
            hs.append(1 / N)
            e1.append(np.max(np.abs(residual_energy_identity(r.u.values, r.dt, s.A))))
            e2.append(np.max(np.abs(residual_multiplier_identity(r.u.values, r.dt, s.A, phi))))
        assert measured_order(hs, e1) >= 1.0
        assert measured_order(hs, e2) >= 1.0


class TestMultiplier:
    def test_1d_identity(self):
        g = grid1(16)
        phi = extend_multiplier(CoefficientField.from_family(g, "identity"))
        assert phi.values[0, 0] == -1.0 and phi.values[-1, 0] == 1.0
        x = g.coords[0]
        np.testing.assert_array_equal(phi.values[(x >= 0.25) & (x <= 0.75), 0], 0.0)

    def test_2d_sup_bound(self):
        g = grid2(16)
        A = CoefficientField.from_family(g, "identity")
        phi = extend_multiplier(A)
        mask, target = boundary_target(A)
        bsup = np.max(np.linalg.norm(target[mask], axis=-1))
        assert bsup == 1.0 and phi.sup() <= 2 * bsup

    def test_diag_right_face(self):
        g = grid2(8)
        A = CoefficientField.from_family(g, "diag", values=[4.0, 1.0])
        phi = extend_multiplier(A)
        np.testing.assert_allclose(phi.values[-1, 1:-1], np.tile([4.0, 0.0], (7, 1)))
        mask, target = boundary_target(A)
        np.testing.assert_allclose(phi.values[mask], target[mask])

    def test_anisotropic_boundary_values_and_sup(self):
        g = grid2(16)
        A = CoefficientField.from_family(g, "rotated-diag", angle=0.7, values=(2.0, 0.5))
        phi = extend_multiplier(A)
        mask, target = boundary_target(A)
        np.testing.assert_allclose(phi.values[mask], target[mask], atol=1e-14)
        assert phi.sup() <= 2 * np.max(np.linalg.norm(target[mask], axis=-1))


class TestBalances:
    def test_zero_scenario(self):
        s = manufactured("zero", N=32)
        r = solve(s)
        S = Hypersurface.affine(s.grid, 0.3, 0.4)
        fb = flux_balance(r.u, s, S, 0.0)
        assert fb.residual == 0.0 and all(v == 0 for v in fb.terms.values())
        mb = multiplier_balance(r.u, s, S, extend_multiplier(s.A), 0.0)
        assert mb.residual == 0.0 and all(v == 0 for v in mb.terms.values())

    def test_flux_orders(self):
        hs, res = [], []
        for N in (128, 256, 512):
            s = manufactured("variable-a-boundary", N=N)
            r = solve(s)
            b = flux_balance(r.u, s, Hypersurface.affine(s.grid, 0.3, 0.4), 0.0)
            hs.append(1 / N)
            res.append(b.relative)
        assert measured_order(hs, res) >= 1.0 and res[-1] <= 1e-2

    def test_multiplier_standing_flat(self):
        hs, res, gap = [], [], []
        for N in (128, 256, 512):
            s = manufactured("standing", N=N)
            r = solve(s)
            b = multiplier_balance(r.u, s, Hypersurface.constant(s.grid, 0.5),
                                   extend_multiplier(s.A), 0.0)
            hs.append(1 / N)
            res.append(b.relative)
            gap.append(abs(b.terms["I2"] - b.terms["I2_raw"]))
        assert measured_order(hs, res) >= 1.0
        assert gap[-1] < gap[0]


class TestDecomposition:
    def test_identity(self):
        chk = gradient_decomposition(np.eye(2), np.array([0.6, 0.8]))
        np.testing.assert_allclose(chk.M, np.eye(2), atol=1e-15)
        assert chk.product == pytest.approx(1.0, abs=1e-15)

    def test_diag_hand_inversion(self):
        chk = gradient_decomposition(np.diag([4.0, 1.0]), np.array([1.0, 0.0]),
                                     frame=np.array([[0.0], [1.0]]))
        assert chk.M[0, 0] == pytest.approx(0.25, abs=1e-15)
        assert chk.product == pytest.approx(1.0, abs=1e-15)

    def test_random_suite(self):
        p, e = decomposition_suite(np.random.default_rng(7), 100, 2, 10)
        assert p <= 1e-10 and e <= 1e-10
        p3, e3 = decomposition_suite(np.random.default_rng(8), 100, 3, 10)
        assert p3 <= 1e-10 and e3 <= 1e-10

    def test_errors(self):
        with pytest.raises(IdentityError):
            gradient_decomposition(np.diag([1.0, -1.0]), np.array([1.0, 0.0]))
        with pytest.raises(IdentityError):
            gradient_decomposition(np.eye(2), np.array([1.0, 1.0]))

    @given(st.integers(0, 10_000))
    def test_product_property(self, seed):
        r = np.random.default_rng(seed)
        A = random_spd(r, 2, cond=100.0)
        nu = r.normal(size=2)
        nu /= np.linalg.norm(nu)
        assert gradient_decomposition(A, nu).product == pytest.approx(1.0, abs=1e-10)


class TestSphere:
    pts = np.array([[np.cos(a), np.sin(a)] for a in np.linspace(0, 2 * np.pi, 16,
                                                                  endpoint=False)])

    def test_linear(self):
        assert sphere_decomposition_check(lambda x: np.array([1.0, 0.0]), self.pts) < 1e-15

    def test_product_symbolic_partials(self):
        X1, X2 = sp.symbols("x1 x2")
        u = X1 * X2
        gu = sp.lambdify((X1, X2), [sp.diff(u, X1), sp.diff(u, X2)], "numpy")
        assert sphere_decomposition_check(lambda x: np.array(gu(*x)), self.pts) <= 1e-10

    def test_constant(self):
        assert sphere_decomposition_check(lambda x: np.zeros(2), self.pts) == 0.0

    def test_rejects(self):
        with pytest.raises(IdentityError):
            sphere_decomposition_check(lambda x: x, self.pts, A=np.diag([2.0, 1.0]))
        with pytest.raises(IdentityError):
            sphere_decomposition_check(lambda x: x, np.array([[1.0, 1.0]]))


class TestGronwall:
    def test_oracle_value(self):
        r = sp.symbols("r", positive=True)
        g = 2 * r * sp.exp(1 / r) - sp.Rational(3, 2) * r
        r_star = sp.nsolve(sp.diff(g, r), r, 1.7, prec=30)
        assert float(g.subs(r, r_star)) == pytest.approx(GRONWALL_MIN, abs=1e-10)

    @pytest.mark.parametrize("D", [0.1, 1.0, 10.0])
    def test_value_in_bracket(self, D):
        K, v = gronwall_coefficient_min(D)
        assert 3.5 < v < 4.0
        assert v == pytest.approx(GRONWALL_MIN, abs=1e-9)
        assert K / D == pytest.approx(1.7, abs=0.05)

    def test_scale_invariance(self):
        assert abs(gronwall_coefficient_min(1.0)[1] - gronwall_coefficient_min(10.0)[1]) <= 1e-8

    def test_limits(self):
        assert gronwall_g(1e-2, 1.0) > 1e10 and gronwall_g(1e6, 1.0) > 1e5

    def test_bad_D(self):
        with pytest.raises(IdentityError):
            gronwall_coefficient_min(0.0)


class TestOrders:
    def test_exact_power_law(self):
        hs = [0.1, 0.05, 0.025]
        assert measured_order(hs, [3 * h ** 2 for h in hs]) == pytest.approx(2.0)

    def test_report_needs_three_grids(self):
        assert IdentityResidualReport("x", [0.1, 0.05], [1.0, 0.25]).order is None
        rep = IdentityResidualReport("x", [0.1, 0.05, 0.025], [1.0, 0.5, 0.25])
        assert rep.as_dict()["order"] == pytest.approx(1.0)
