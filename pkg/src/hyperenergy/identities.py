"""Discrete checks of the exact identities behind the energy estimates.

Pointwise identities compare an operator form (left side) with a
divergence form (right side).  Inner derivatives use second-order centred
stencils and the outer space-time divergence uses the fourth-order centred
stencil, so both sides are exact on polynomial data of low degree and
otherwise agree to truncation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .coefficients import CoefficientField, a_norm_sq
from .energy import face_gradients, horizontal_energy, partial_energy, sigma_integral, trace
from .fields import DivAGrad, SpaceTimeField, column_integral, slice_at_time, time_derivative
from .geometry import Hypersurface, cell_average, cell_fraction_above, cell_gradient


class IdentityError(ValueError):
    pass


# -- stencils ---------------------------------------------------------------------


def _d4(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order centred first derivative, valid at indices 2..n-3 (zero elsewhere)."""
    out = np.zeros_like(f)
    n = f.shape[axis]
    s = lambda a, b: tuple(slice(a, b) if k == axis else slice(None) for k in range(f.ndim))
    out[s(2, n - 2)] = (-f[s(4, n)] + 8 * f[s(3, n - 1)] - 8 * f[s(1, n - 3)]
                        + f[s(0, n - 4)]) / (12 * h)
    return out


def _interior(ndim_space: int):
    return (slice(2, -2),) + (slice(2, -2),) * ndim_space


def _derivatives(values: np.ndarray, dt: float, grid):
    ut = np.gradient(values, dt, axis=0, edge_order=2)
    gu = np.stack([np.gradient(values, h, axis=k + 1, edge_order=2)
                   for k, h in enumerate(grid.h)], axis=-1)
    return ut, gu


def _wave_operator(values: np.ndarray, dt: float, A: CoefficientField) -> np.ndarray:
    """u_tt - div(A grad u) with the solver's stencils (levels 1..L-2 meaningful)."""
    utt = np.zeros_like(values)
    utt[1:-1] = (values[2:] - 2 * values[1:-1] + values[:-2]) / dt ** 2
    return utt - DivAGrad(A)(values)


def _A_grad(A: CoefficientField, gu: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,t...j->t...i", A.matrices, gu)


# -- pointwise identities --------------------------------------------------------------


def residual_energy_identity(values: np.ndarray, dt: float, A: CoefficientField) -> np.ndarray:
    """LHS - RHS of the energy identity on the interior (levels, nodes) block.

    LHS = 2 Re{conj(u_t) (u_tt - div(A grad u))},
    RHS = Re div_{x,t}[-2 conj(u_t) A grad u, |u_t|^2 + |grad u|_A^2].
    """
    grid = A.grid
    ut, gu = _derivatives(values, dt, grid)
    lhs = 2 * np.real(np.conj(ut) * _wave_operator(values, dt, A))
    Agu = _A_grad(A, gu)
    flux_x = np.real(-2 * np.conj(ut)[..., None] * Agu)
    flux_t = np.abs(ut) ** 2 + np.real(np.sum(np.conj(gu) * Agu, axis=-1))
    rhs = _d4(flux_t, dt, 0)
    for k, h in enumerate(grid.h):
        rhs = rhs + _d4(flux_x[..., k], h, k + 1)
    return (lhs - rhs)[_interior(grid.dim)]


def residual_multiplier_identity(values: np.ndarray, dt: float, A: CoefficientField,
                                 phi: "MultiplierField") -> np.ndarray:
    """LHS - RHS of the multiplier identity on the interior block.

    LHS = 2 Re{(phi . grad conj u)(u_tt - div(A grad u))};
    RHS = Re div_{x,t}[phi(|grad u|_A^2 - |u_t|^2) - 2(phi . grad conj u) A grad u,
                        2 (phi . grad conj u) u_t]
          + (div phi)(|u_t|^2 - |grad u|_A^2) - (phi . grad A)(grad u, grad u)
          + 2 (d_j phi_k) Re(conj(u_k) a_jl u_l).
    grad A is taken from the analytic coefficient family.
    """
    grid = A.grid
    if not A.analytic:
        raise IdentityError("the multiplier identity needs grad A from an analytic family")
    dA = A.gradient()  # (*shape, k, i, j)
    ut, gu = _derivatives(values, dt, grid)
    p = phi.values  # (*shape, dim)
    Agu = _A_grad(A, gu)
    pgu_bar = np.sum(p * np.conj(gu), axis=-1)  # phi . grad conj u
    lhs = 2 * np.real(pgu_bar * _wave_operator(values, dt, A))
    grad_sq = np.real(np.sum(np.conj(gu) * Agu, axis=-1))
    ut_sq = np.abs(ut) ** 2
    flux_x = np.real(p * (grad_sq - ut_sq)[..., None] - 2 * pgu_bar[..., None] * Agu)
    flux_t = np.real(2 * pgu_bar * ut)
    rhs = _d4(flux_t, dt, 0)
    for k, h in enumerate(grid.h):
        rhs = rhs + _d4(flux_x[..., k], h, k + 1)
    rhs = rhs + phi.divergence * (ut_sq - grad_sq)
    rhs = rhs - np.real(np.einsum("...k,t...i,...kij,t...j->t...", p, np.conj(gu), dA, gu))
    rhs = rhs + 2 * np.real(np.einsum("...jk,t...k,...jl,t...l->t...", phi.jacobian,
                                      np.conj(gu), A.matrices, gu))
    return (lhs - rhs)[_interior(grid.dim)]


def polynomial_field(grid, dt: float, n_levels: int, coeffs) -> np.ndarray:
    """Sample a space-time polynomial given as {(power_t, power_x, [power_y]): c}."""
    X = grid.mesh()
    t = np.arange(n_levels) * dt
    out = np.zeros((n_levels,) + grid.shape, dtype=complex)
    for powers, c in coeffs.items():
        term = np.ones(grid.shape, dtype=complex) * c
        for x, pw in zip(X, powers[1:]):
            term = term * x ** pw
        out += (t ** powers[0]).reshape((-1,) + (1,) * grid.dim) * term
    return out


# -- multiplier field -------------------------------------------------------------


@dataclass
class MultiplierField:
    """Real vector field phi with phi = A nu on the boundary faces."""

    values: np.ndarray  # (*shape, dim)
    jacobian: np.ndarray  # (*shape, j, k) = d_j phi_k
    grid: object = field(repr=False)

    @property
    def divergence(self) -> np.ndarray:
        return np.trace(self.jacobian, axis1=-2, axis2=-1)

    def sup(self) -> float:
        return float(np.max(np.linalg.norm(self.values, axis=-1)))


def _smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    psi = lambda z: np.where(z > 0, np.exp(-1.0 / np.where(z > 0, z, 1.0)), 0.0)
    a, b = psi(s), psi(1.0 - s)
    return a / (a + b)


def extend_multiplier(A: CoefficientField, d0: float | None = None) -> MultiplierField:
    """phi = W(x) * sum_f beta_f(x) (A nu_f)(projection of x onto face f).

    W = 1 - prod_f (1 - w(d_f)) with w a smooth ramp equal to 1 at distance 0
    and 0 beyond d0; beta_f = prod_{g != f} d_g / sum_h prod_{k != h} d_k is a
    partition of unity equal to 1 on face f away from corners (where the
    adjacent faces are averaged).
    """
    grid = A.grid
    if d0 is None:
        d0 = min(grid.domain.lengths) / 4
    X = grid.mesh()
    faces = grid.faces()
    dists, targets = [], []
    for face in faces:
        a, b = grid.domain.bounds[face.axis]
        d = X[face.axis] - a if face.side < 0 else b - X[face.axis]
        dists.append(np.maximum(d, 0.0))
        # A at the projection onto the face, broadcast back along the normal axis
        Af = np.take(A.matrices, [0 if face.side < 0 else -1], axis=face.axis)
        Af = np.broadcast_to(Af, A.matrices.shape)
        targets.append(Af @ face.normal)
    W = 1.0 - np.prod([_smooth_step(d / d0) for d in dists], axis=0)
    prods = []
    for i in range(len(faces)):
        prods.append(np.prod([d for j, d in enumerate(dists) if j != i], axis=0)
                     if len(faces) > 1 else np.ones(grid.shape))
    denom = np.sum(prods, axis=0)
    on = [d == 0 for d in dists]
    n_on = np.sum(on, axis=0)
    phi = np.zeros(grid.shape + (grid.dim,))
    for i in range(len(faces)):
        with np.errstate(divide="ignore", invalid="ignore"):
            beta = np.where(denom > 0, prods[i] / np.where(denom > 0, denom, 1.0), 0.0)
        beta = np.where(denom > 0, beta, np.where(on[i], 1.0 / np.maximum(n_on, 1), 0.0))
        phi += (W * beta)[..., None] * targets[i]
    jac = np.stack([np.stack([np.gradient(phi[..., k], h, axis=j, edge_order=2)
                              for k in range(grid.dim)], axis=-1)
                    for j, h in enumerate(grid.h)], axis=-2)
    return MultiplierField(phi, jac, grid)


def boundary_target(A: CoefficientField):
    """(mask, A nu) on boundary nodes that are not corners."""
    grid = A.grid
    mask = np.zeros(grid.shape, dtype=bool)
    target = np.zeros(grid.shape + (grid.dim,))
    count = np.zeros(grid.shape)
    for face in grid.faces():
        m = np.zeros(grid.shape, dtype=bool)
        m[face.index] = True
        target[m] = A.matrices[m] @ face.normal
        count += m
    mask = count == 1
    return mask, target


# -- integral balances ----------------------------------------------------------------


@dataclass
class BalanceReport:
    terms: dict
    residual: float
    scale: float

    @property
    def relative(self) -> float:
        return abs(self.residual) / self.scale if self.scale > 0 else abs(self.residual)


def _q_integral(values, dt, S: Hypersurface, tau):
    col = column_integral(values, dt, tau, S.values)
    return float(np.sum(S.grid.trapezoid_weights() * col))


def flux_balance(u: SpaceTimeField, scenario, S: Hypersurface, tau: float = 0.0) -> BalanceReport:
    """2Re int_Q conj(u_t) G + e(tau) + 2Re int_Sigma conj(u_t) u_{nu,A} - E_tau."""
    A = scenario.A
    ut = time_derivative(u.values, u.dt)
    G = np.stack([np.asarray(scenario.source(t), dtype=complex) for t in u.times])
    src = _q_integral(2 * np.real(np.conj(ut) * G), u.dt, S, tau)
    e_tau = horizontal_energy(u, A, S, tau)

    def integrand(face):
        gu = face_gradients(u, face)
        q = np.einsum("i,...ij,t...j->t...", face.normal, A.matrices[face.index], gu)
        return 2 * np.real(np.conj(ut[(slice(None),) + face.index]) * q)

    sig = sigma_integral(u, S, tau, integrand)
    E_tau = partial_energy(u, S, A, tau)
    residual = src + e_tau + sig - E_tau
    scale = max(e_tau, E_tau, 1e-300)
    return BalanceReport({"source": src, "e_tau": e_tau, "sigma": sig, "E_tau": E_tau},
                         residual, scale)


def _gamma_integrals(u: SpaceTimeField, A: CoefficientField, S: Hypersurface,
                     phi: MultiplierField, tau: float):
    """I2 on the surface part above tau: reduced form and raw (bulk gradient) form."""
    grid = A.grid
    tr = trace(u, S, tau)
    frac = cell_fraction_above(S.values, tau, grid.dim)
    vol = grid.cell_volume
    Ac = A.cell_matrices()
    gS = S.cell_gradients
    p = cell_average(phi.values, grid.dim)
    w = 1.0 - a_norm_sq(Ac, gS)
    gU = cell_gradient(tr.u, grid.h)  # surface gradient per cell
    ut = cell_average(tr.ut, grid.dim)
    p_gS = np.sum(p * gS, axis=-1)
    AgU = np.einsum("...ij,...j->...i", Ac, gU)
    reduced = (-p_gS * (a_norm_sq(Ac, gU) + w * np.abs(ut) ** 2)
               + 2 * np.real(np.sum(p * np.conj(gU), axis=-1)
                             * (np.sum(gS * AgU, axis=-1) + w * ut)))
    gb = cell_average(tr.bulk_grad, grid.dim)
    Agb = np.einsum("...ij,...j->...i", Ac, gb)
    raw = np.real(-p_gS * (a_norm_sq(Ac, gb) - np.abs(ut) ** 2)
                  + 2 * np.sum(p * np.conj(gb), axis=-1) * (ut + np.sum(gS * Agb, axis=-1)))
    return float(np.sum(reduced * frac) * vol), float(np.sum(raw * frac) * vol)


def multiplier_balance(u: SpaceTimeField, scenario, S: Hypersurface, phi: MultiplierField,
                       tau: float = 0.0) -> BalanceReport:
    """2Re int_Q (phi . grad conj u) G  versus  I1 + I2 + I3 - Re int_H 2(phi . grad conj u) u_t."""
    A = scenario.A
    grid = A.grid
    if not A.analytic:
        raise IdentityError("the multiplier balance needs grad A from an analytic family")
    ut, gu = _derivatives(u.values, u.dt, grid)
    p = phi.values
    pgu_bar = np.sum(p * np.conj(gu), axis=-1)
    Agu = _A_grad(A, gu)
    grad_sq = np.real(np.sum(np.conj(gu) * Agu, axis=-1))
    G = np.stack([np.asarray(scenario.source(t), dtype=complex) for t in u.times])
    source = _q_integral(2 * np.real(pgu_bar * G), u.dt, S, tau)

    dA = A.gradient()
    i3 = (phi.divergence * (np.abs(ut) ** 2 - grad_sq)
          - np.real(np.einsum("...k,t...i,...kij,t...j->t...", p, np.conj(gu), dA, gu))
          + 2 * np.real(np.einsum("...jk,t...k,...jl,t...l->t...", phi.jacobian, np.conj(gu),
                                  A.matrices, gu)))
    I3 = _q_integral(i3, u.dt, S, tau)

    def i1(face):
        gf = face_gradients(u, face)
        Af = A.matrices[face.index]
        nuA = np.einsum("i,...ij,j->...", face.normal, Af, face.normal)
        gsq = np.real(np.einsum("t...i,...ij,t...j->t...", np.conj(gf), Af, gf))
        q = np.einsum("i,...ij,t...j->t...", face.normal, Af, gf)
        utf = ut[(slice(None),) + face.index]
        return nuA * (gsq - np.abs(utf) ** 2) - 2 * np.abs(q) ** 2

    I1 = sigma_integral(u, S, tau, i1)
    I2, I2_raw = _gamma_integrals(u, A, S, phi, tau)

    U, Ut = slice_at_time(u.values, u.dt, tau, order=3)
    gU = np.stack([np.gradient(U, h, axis=k, edge_order=2) for k, h in enumerate(grid.h)],
                  axis=-1)
    h_term = 2 * np.real(np.sum(p * np.conj(gU), axis=-1) * Ut)
    H = float(np.sum(grid.trapezoid_weights() * np.where(S.values >= tau, h_term, 0.0)))

    residual = source - (I1 + I2 + I3 - H)
    scale = max(abs(I1), abs(I2), abs(I3), abs(H), abs(source), 1e-300)
    return BalanceReport({"source": source, "I1": I1, "I2": I2, "I2_raw": I2_raw, "I3": I3,
                          "H": H}, residual, scale)


# -- algebra ---------------------------------------------------------------------------


@dataclass
class DecompositionCheck:
    M: np.ndarray
    product: float  # |nu|_A^2 * M_11
    expansion_error: float


def gradient_decomposition(A: np.ndarray, nu: np.ndarray, frame: np.ndarray | None = None,
                           gradients: np.ndarray | None = None,
                           tol: float = 1e-12) -> DecompositionCheck:
    """Build E = (A nu, e_2, ...), M = E^-1 A E^-T and check the exact algebra.

    `frame` holds e_2, ... as columns (orthonormal complement of nu; built by
    QR when omitted); `gradients` are test vectors for the expansion of
    |xi|_A^2 in the coordinates (u_{nu,A}, e_j . xi).
    """
    A = np.asarray(A, dtype=float)
    nu = np.asarray(nu, dtype=float)
    n = nu.size
    if not np.allclose(A, A.T) or np.linalg.eigvalsh(A).min() <= 0:
        raise IdentityError("A must be symmetric positive definite")
    if abs(np.linalg.norm(nu) - 1) > 1e-12:
        raise IdentityError("nu must be a unit vector")
    if frame is None:
        Q, _ = np.linalg.qr(np.column_stack([nu, np.eye(n)[:, : n - 1]]))
        frame = Q[:, 1:]
        if frame.size and np.linalg.norm(frame.T @ nu) > 1e-10:
            Q, _ = np.linalg.qr(np.column_stack([nu, np.random.default_rng(0).normal(size=(n, n - 1))]))
            frame = Q[:, 1:]
    E = np.column_stack([A @ nu, frame])
    Einv = np.linalg.inv(E)
    M = Einv @ A @ Einv.T
    product = float(nu @ A @ nu * M[0, 0])
    err = 0.0
    if gradients is not None:
        for xi in np.atleast_2d(gradients):
            w = E.T @ xi
            direct = float(np.real(np.conj(xi) @ A @ xi))
            expanded = (M[0, 0] * abs(w[0]) ** 2
                        + 2 * np.real(np.conj(w[0]) * (M[0, 1:] @ w[1:]))
                        + float(np.real(np.conj(w[1:]) @ M[1:, 1:] @ w[1:])))
            err = max(err, abs(direct - expanded) / max(1.0, abs(direct)))
    return DecompositionCheck(M, product, err)


def random_spd(rng, n: int, cond: float = 10.0) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    ev = np.exp(rng.uniform(0, np.log(cond), size=n))
    A = Q @ np.diag(ev) @ Q.T
    return 0.5 * (A + A.T)


def decomposition_suite(rng, samples: int = 100, n: int = 2, gradients: int = 10):
    """Worst |product - 1| and worst expansion error over a random suite."""
    worst_p, worst_e = 0.0, 0.0
    for _ in range(samples):
        A = random_spd(rng, n)
        nu = rng.normal(size=n)
        nu /= np.linalg.norm(nu)
        Q, _ = np.linalg.qr(np.column_stack([nu, rng.normal(size=(n, n - 1))]))
        frame = Q[:, 1:]
        xis = rng.normal(size=(gradients, n)) + 1j * rng.normal(size=(gradients, n))
        chk = gradient_decomposition(A, nu, frame, xis)
        worst_p = max(worst_p, abs(chk.product - 1.0))
        worst_e = max(worst_e, chk.expansion_error)
    return worst_p, worst_e


def sphere_decomposition_check(grad_u, points, A=None) -> float:
    """max | |grad u|^2 - |u_nu|^2 - 1/2 sum_{i!=j} |X_ij u|^2 | on unit-circle points.

    grad_u(x) returns the (complex) gradient at a point x with |x| = 1.
    """
    if A is not None and not np.allclose(A, np.eye(len(A))):
        raise IdentityError("the sphere decomposition is stated for A = I")
    worst = 0.0
    for x in np.atleast_2d(points):
        if abs(np.linalg.norm(x) - 1) > 1e-12:
            raise IdentityError("points must lie on the unit sphere")
        g = np.asarray(grad_u(x), dtype=complex)
        lhs = float(np.sum(np.abs(g) ** 2))
        un = x @ g
        rot = 0.0
        n = len(x)
        for i in range(n):
            for j in range(n):
                if i != j:
                    rot += abs(x[i] * g[j] - x[j] * g[i]) ** 2
        worst = max(worst, abs(lhs - abs(un) ** 2 - 0.5 * rot))
    return worst


def gronwall_g(K: float, D: float) -> float:
    r = K / D
    return 2 * r * math.exp(1 / r) - 1.5 * r


def gronwall_coefficient_min(D: float, xtol: float = 1e-12) -> tuple[float, float]:
    """Minimise 2(K/D)e^{D/K} - 1.5 K/D over K > 0 by golden-section search."""
    if not D > 0:
        raise IdentityError("D = T2 - tau must be positive")
    res = minimize_scalar(lambda K: gronwall_g(K, D), bracket=(0.5 * D, 1.5 * D, 4.0 * D),
                          method="golden", tol=xtol)
    return float(res.x), float(res.fun)


# -- convergence ------------------------------------------------------------------------


def measured_order(hs, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if hs.size < 2:
        raise IdentityError("need at least two grids")
    if np.any(errors <= 0):
        return float("inf") if np.all(errors == 0) else float("nan")
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


def pairwise_orders(hs, errors) -> list[float]:
    return [float(np.log(e0 / e1) / np.log(h0 / h1))
            for h0, h1, e0, e1 in zip(hs[:-1], hs[1:], errors[:-1], errors[1:])]


@dataclass
class IdentityResidualReport:
    name: str
    hs: list
    max_residuals: list
    integrated: list = field(default_factory=list)

    @property
    def order(self) -> float | None:
        if len(self.hs) < 3:
            return None
        return measured_order(self.hs, self.max_residuals)

    def as_dict(self) -> dict:
        return {"name": self.name, "h": self.hs, "max_residual": self.max_residuals,
                "integrated": self.integrated, "order": self.order}
