import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperenergy.coefficients import CoefficientError, CoefficientField, a_norm_sq
from hyperenergy.geometry import Domain, SpatialGrid

G1 = SpatialGrid(Domain(((0.0, 1.0),), 1.0), 32)
G2 = SpatialGrid(Domain(((0.0, 1.0), (0.0, 1.0)), 1.0), 8)

complex_vec = st.tuples(*[st.floats(-10, 10)] * 4).map(
    lambda v: np.array([v[0] + 1j * v[1], v[2] + 1j * v[3]]))


def random_spd(seed):
    r = np.random.default_rng(seed)
    B = r.normal(size=(2, 2))
    return B @ B.T + 0.1 * np.eye(2)


def test_a_norm_examples():
    I = CoefficientField.from_family(G2, "identity")
    assert I.a_norm_sq((0, 0), [3, 4]) == 25
    D = CoefficientField.from_family(G2, "diag", values=[4, 1])
    assert D.a_norm_sq((1, 1), [1, 1]) == 5
    assert D.a_norm_sq((1, 1), [0, 0]) == 0


def test_bounds_examples():
    b = CoefficientField.from_family(G2, "identity").ellipticity_bounds()
    assert (b.c1, b.c2) == (1.0, 1.0)
    b = CoefficientField.from_family(G2, "diag", values=[4, 1]).ellipticity_bounds()
    assert (b.c1, b.c2) == (1.0, 4.0)


def test_sine_scalar_bounds_against_dense_eigensolve(rng):
    A = CoefficientField.from_family(G1, "sine-scalar", amplitude=0.5)
    b = A.ellipticity_bounds()
    x = G1.coords[0]
    assert b.c1 == pytest.approx((1 + 0.5 * np.sin(np.pi * x)).min())
    assert b.c2 == pytest.approx(1.5)
    for node in rng.integers(0, G1.shape[0], size=10):
        ev = np.linalg.eigvalsh(A.at(node))
        assert b.c1 - 1e-14 <= ev.min() and ev.max() <= b.c2 + 1e-14


def test_rotated_diag_eigenvalues():
    A = CoefficientField.from_family(G2, "rotated-diag", angle=0.4, values=(1.5, 0.75))
    np.testing.assert_allclose(np.linalg.eigvalsh(A.at((3, 3))), [0.75, 1.5])
    b = A.ellipticity_bounds()
    assert b.c1 == pytest.approx(0.75) and b.c2 == pytest.approx(1.5)


def test_rejects_asymmetric_and_indefinite():
    M = np.zeros(G2.shape + (2, 2))
    M[..., 0, 0] = M[..., 1, 1] = 1
    M[..., 0, 1] = 0.1
    with pytest.raises(CoefficientError):
        CoefficientField.from_array(G2, M)
    M[..., 1, 0] = 0.1
    M[2, 2, 1, 1] = -1
    with pytest.raises(CoefficientError, match="node"):
        CoefficientField.from_array(G2, M)


def test_gradient_is_analytic():
    A = CoefficientField.from_family(G1, "sine-scalar", amplitude=0.5)
    x = G1.coords[0]
    np.testing.assert_allclose(A.gradient()[:, 0, 0, 0], 0.5 * np.pi * np.cos(np.pi * x))
    arr = CoefficientField.from_array(G1, A.matrices)
    assert not arr.analytic
    with pytest.raises(CoefficientError):
        arr.gradient()


@given(complex_vec, st.floats(0.1, 10.0), st.integers(0, 1000))
def test_scaling_exact(xi, lam, seed):
    A = random_spd(seed)
    assert a_norm_sq(lam ** 2 * A, xi) == pytest.approx(lam ** 2 * a_norm_sq(A, xi), rel=1e-13)


@given(complex_vec, complex_vec, st.integers(0, 1000))
def test_seminorm_triangle(a, b, seed):
    A = random_spd(seed)
    n = lambda v: np.sqrt(max(a_norm_sq(A, v), 0.0))
    assert n(a + b) <= n(a) + n(b) + 1e-12 * (1 + n(a) + n(b))


def test_bounds_sandwich(rng):
    A = CoefficientField.from_family(G2, "rotated-diag", angle=1.1, values=(3.0, 0.5))
    b = A.ellipticity_bounds()
    for _ in range(1000):
        node = tuple(rng.integers(0, 9, size=2))
        xi = rng.normal(size=2)
        xi /= np.linalg.norm(xi)
        v = A.a_norm_sq(node, xi)
        assert b.c1 - 1e-12 <= v <= b.c2 + 1e-12
