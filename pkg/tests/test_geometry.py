import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperenergy.coefficients import CoefficientField
from hyperenergy.geometry import (
    CausalKind,
    Domain,
    GeometryError,
    Hypersurface,
    SpatialGrid,
    a_slopes,
    cell_fraction_above,
    classify,
    region_masks,
    surface_normal,
    time_levels,
    validate_foliation,
)


def grid1(N=16, T=1.0):
    return SpatialGrid(Domain(((0.0, 1.0),), T), N)


def grid2(N=8, T=1.0):
    return SpatialGrid(Domain(((0.0, 1.0), (0.0, 1.0)), T), N)


class TestGrid:
    def test_nodes_on_boundary(self):
        g = grid1(10)
        assert g.coords[0][0] == 0.0 and g.coords[0][-1] == 1.0
        assert g.shape == (11,)
        assert g.h == (0.1,)

    def test_rejects_empty_interval_and_bad_horizon(self):
        with pytest.raises(GeometryError):
            Domain(((1.0, 1.0),), 1.0)
        with pytest.raises(GeometryError):
            Domain(((0.0, 1.0),), 0.0)

    def test_trapezoid_weights_integrate_area(self):
        g = SpatialGrid(Domain(((0.0, 2.0), (0.0, 3.0)), 1.0), (8, 6))
        assert np.sum(g.trapezoid_weights()) == pytest.approx(6.0)

    def test_faces_have_outward_normals(self):
        g = grid2()
        normals = {(f.axis, f.side): tuple(f.normal) for f in g.faces()}
        assert normals[(0, -1)] == (-1.0, 0.0)
        assert normals[(1, 1)] == (0.0, 1.0)

    def test_boundary_mask_counts(self):
        assert grid2(8).boundary_mask().sum() == 4 * 8
        assert grid1(8).boundary_mask().sum() == 2

    def test_time_levels(self):
        lv = time_levels(1.0, 0.25)
        np.testing.assert_allclose(lv, [0, 0.25, 0.5, 0.75, 1.0])
        with pytest.raises(GeometryError):
            time_levels(1.0, 0.3)


class TestSurface:
    def test_range_constraint(self):
        with pytest.raises(GeometryError):
            Hypersurface.constant(grid1(), 1.5)

    def test_T1_T2_affine(self):
        S = Hypersurface.affine(grid1(), 0.3, 0.4)
        assert S.T1 == pytest.approx(0.3) and S.T2 == pytest.approx(0.7)

    def test_normal_examples(self):
        g = grid1()
        nx, nt = surface_normal(Hypersurface.constant(g, 0.5), cell=0)
        np.testing.assert_allclose(nx, [0.0])
        assert nt == 1.0
        nx, nt = surface_normal(Hypersurface.affine(g, 0.0, 1.0), cell=3)
        np.testing.assert_allclose(nx, [-1 / np.sqrt(2)])
        assert nt == pytest.approx(1 / np.sqrt(2))
        nx, nt = surface_normal(Hypersurface.affine(grid2(), 0.1, [0.3, 0.4]), cell=(2, 2))
        np.testing.assert_allclose(np.r_[nx, nt], np.array([-0.3, -0.4, 1.0]) / np.sqrt(1.25))

    def test_normal_needs_exactly_one_location(self):
        S = Hypersurface.constant(grid1(), 0.5)
        with pytest.raises(GeometryError):
            surface_normal(S)

    @given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
    def test_normal_unit_length(self, a, b):
        S = Hypersurface.affine(grid2(), 0.5, [a, b])
        for c in [(0, 0), (3, 4), (7, 7)]:
            nx, nt = surface_normal(S, cell=c)
            assert nx @ nx + nt ** 2 == pytest.approx(1.0, abs=1e-15)

    def test_kinks_detected(self):
        g = grid1(10)
        S = Hypersurface.from_function(g, lambda x: np.minimum(0.5, 0.2 + x))
        assert S.kink_set == [(3,)]

    def test_chain_of_nodal_gradients_matches_affine(self):
        S = Hypersurface.affine(grid2(), 0.2, [0.1, 0.3])
        np.testing.assert_allclose(S.nodal_gradients()[2, 5], [0.1, 0.3])


class TestClassify:
    def test_examples(self):
        g = grid1()
        I = CoefficientField.from_family(g, "identity")
        c = classify(Hypersurface.constant(g, 0.5), I)
        assert c.kind is CausalKind.SPACELIKE and c.max_slope == 0.0
        c = classify(Hypersurface.affine(g, 0.0, 1.0), I)
        assert c.kind is CausalKind.LIGHTLIKE and c.max_slope == pytest.approx(1.0)
        c = classify(Hypersurface.affine(g, 0.0, 1.0), CoefficientField.from_family(g, "scalar",
                                                                                    value=4.0))
        assert c.kind is CausalKind.TIMELIKE and c.max_slope == pytest.approx(2.0)

    @given(st.floats(0.0, 1.0), st.floats(1.0, 3.0))
    def test_scaling_is_exact_and_monotone(self, slope, lam):
        g = grid1()
        S = Hypersurface.affine(g, 0.0, slope)
        A = CoefficientField.from_family(g, "sine-scalar", amplitude=0.3)
        base = a_slopes(S, A)
        scaled = a_slopes(S, A.scaled(lam ** 2))
        np.testing.assert_allclose(scaled, lam * base, rtol=1e-14)
        order = [CausalKind.SPACELIKE, CausalKind.LIGHTLIKE, CausalKind.TIMELIKE]
        k0 = order.index(classify(S, A).kind)
        k1 = order.index(classify(S, A.scaled(lam ** 2)).kind)
        assert k1 >= k0


class TestRegions:
    def test_horizontal_box(self):
        g = grid1(10)
        S = Hypersurface.constant(g, 0.5)
        times = np.linspace(0, 1, 11)
        m = region_masks(S, 0.0, times)
        assert m.T1 == m.T2 == 0.5
        assert m.q_mask[:6].all() and not m.q_mask[6:].any()
        assert m.gamma_nodes.all()
        m2 = region_masks(S, 0.6, times)
        assert m2.empty and not m2.gamma_nodes.any()

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_containment(self, t1, t2):
        t1, t2 = sorted((t1, t2))
        g = grid1(12)
        S = Hypersurface.affine(g, 0.3, 0.4)
        times = np.linspace(0, 1, 21)
        a, b = region_masks(S, t1, times), region_masks(S, t2, times)
        assert not (b.q_mask & ~a.q_mask).any()
        assert not (b.h_mask & ~a.h_mask).any()

    def test_argmax_set(self):
        g = grid1(10)
        S = Hypersurface.affine(g, 0.3, 0.4)
        m = region_masks(S, S.T2, np.linspace(0, 1, 11))
        assert m.gamma_nodes.sum() == 1 and m.gamma_nodes[-1]

    def test_cell_fraction(self):
        frac = cell_fraction_above(np.array([0.0, 1.0, 1.0]), 0.25, 1)
        np.testing.assert_allclose(frac, [0.75, 1.0])


class TestFoliation:
    def test_horizontal_and_min_families(self):
        g = grid1(16)
        taus = np.linspace(0, 1, 9)
        assert validate_foliation([Hypersurface.constant(g, t) for t in taus]).ok
        fam = [Hypersurface.from_function(g, lambda x, t=t: np.minimum(t, 0.3 + 0.4 * x))
               for t in taus]
        assert validate_foliation(fam).ok

    def test_reversed_pair(self):
        g = grid1(4)
        rep = validate_foliation([Hypersurface.constant(g, 0.5), Hypersurface.constant(g, 0.4)])
        assert not rep.ok and rep.tau_pair == (0, 1)
        assert rep.violation == pytest.approx(0.1)
