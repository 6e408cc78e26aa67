"""
Linearized spectral package around a boosted soliton.

Builds the scalar operators L+_beta and T, the matrix operators H and
calH = -H J, computes the negative eigenpair (lambda0, Q-), the explicit
directions Z+-, Z0, Phi0, Phi-, the adjoint solutions Y+- (H Y = Z), and
certifies the coercivity constants mu0 and alpha0 by constrained
Rayleigh-quotient minimization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

from .grid import (
    Grid,
    ScalarField,
    FieldPair,
    deriv_values,
    deriv2_values,
    inner_pair,
    norm_energy,
)
from .soliton import Boost, GroundState, Nonlinearity


class SpectralError(RuntimeError):
    pass


class NoNegativeEigenvalueError(SpectralError):
    """The discrete L+ has no negative eigenvalue (bad grid or nonlinearity)."""


class CoercivityError(SpectralError):
    """Constrained minimum of <HV|V>/||V||^2 came out nonpositive."""


@dataclass
class LinearOperator:
    """Matrix-free operator on raw samples ((n,) scalar or (2, n) pair)."""

    apply: Callable[[np.ndarray], np.ndarray]
    symmetric: bool
    description: str


def pair_values(U: FieldPair) -> np.ndarray:
    return np.stack([U.first.values, U.second.values])


def pair_from_values(grid: Grid, V: np.ndarray) -> FieldPair:
    return FieldPair.from_arrays(grid, V[0], V[1])


def _potential(gs: GroundState, boost: Boost, grid: Grid) -> np.ndarray:
    """f'(Q_beta) sampled on the grid; Q_beta(x) = Q(gamma x)."""
    qb = gs.evaluate(boost.gamma * grid.wrap(grid.x))
    return np.asarray(gs.nonlinearity.fprime(qb))


def build_lplus(gs: GroundState, nl: Nonlinearity, boost: Boost,
                grid: Grid) -> LinearOperator:
    """L+_beta = -gamma^-2 d_xx + Id - f'(Q_beta); beta = 0 gives L+."""
    pot = _potential(gs, boost, grid)
    ginv2 = 1.0 - boost.beta * boost.beta

    def apply(v: np.ndarray) -> np.ndarray:
        return -ginv2 * deriv2_values(grid, v) + v - pot * v

    return LinearOperator(apply, symmetric=True,
                          description=f"L+ (beta={boost.beta:g})")


def build_t(gs: GroundState, boost: Boost, grid: Grid) -> LinearOperator:
    """T = -d_xx + Id - f'(Q_beta) = L+_beta - beta^2 d_xx."""
    pot = _potential(gs, boost, grid)

    def apply(v: np.ndarray) -> np.ndarray:
        return -deriv2_values(grid, v) + v - pot * v

    return LinearOperator(apply, symmetric=True,
                          description=f"T (beta={boost.beta:g})")


def build_h(gs: GroundState, boost: Boost, grid: Grid) -> LinearOperator:
    """H = [[T, -beta d_x], [beta d_x, Id]], the energy-momentum Hessian."""
    T = build_t(gs, boost, grid)
    b = boost.beta

    def apply(V: np.ndarray) -> np.ndarray:
        v1, v2 = V
        return np.stack([
            T.apply(v1) - b * deriv_values(grid, v2),
            b * deriv_values(grid, v1) + v2,
        ])

    return LinearOperator(apply, symmetric=True,
                          description=f"H (beta={boost.beta:g})")


def build_calh(gs: GroundState, boost: Boost, grid: Grid) -> LinearOperator:
    """calH = -H J = [[-beta d_x, -T], [Id, -beta d_x]], the flow generator."""
    T = build_t(gs, boost, grid)
    b = boost.beta

    def apply(V: np.ndarray) -> np.ndarray:
        v1, v2 = V
        return np.stack([
            -b * deriv_values(grid, v1) - T.apply(v2),
            v1 - b * deriv_values(grid, v2),
        ])

    return LinearOperator(apply, symmetric=False,
                          description=f"calH (beta={boost.beta:g})")


def apply_j(V: np.ndarray) -> np.ndarray:
    """J = [[0, 1], [-1, 0]]."""
    return np.stack([V[1], -V[0]])


def _even_part(grid: Grid, v: np.ndarray) -> np.ndarray:
    # reflection x -> -x maps node k to (n0 - k) mod n where x[n0] = -x[0]
    idx0 = int(np.argmin(np.abs(grid.x)))
    refl = v[(2 * idx0 - np.arange(grid.n)) % grid.n]
    return 0.5 * (v + refl)


def ground_eigenpair(op: LinearOperator, grid: Grid,
                     v0: np.ndarray | None = None, shift: float = -2.0,
                     tol: float = 1e-10, max_iter: int = 100):
    """
    Lowest eigenpair of L+ (or L+_beta) by shifted inverse-power iteration
    (inner solves by MINRES), restricted to even functions: the kernel
    direction d_x Q is odd, so the negative eigenvalue is the nearest even
    mode. Returns (lambda0 > 0, Q- L2-normalized, positive at x = 0).
    """
    n = grid.n
    if v0 is None:
        v0 = np.exp(-np.abs(grid.x))
    v = _even_part(grid, np.asarray(v0, dtype=float))
    v /= np.linalg.norm(v)
    sigma = shift
    lam_prev = np.inf
    lam = float(v @ op.apply(v))
    for _ in range(max_iter):
        A = spla.LinearOperator((n, n),
                                matvec=lambda w: op.apply(w) - sigma * w)
        w, info = spla.minres(A, v, rtol=1e-13, maxiter=4 * n)
        if info != 0:
            raise SpectralError(f"inner MINRES solve failed (info={info})")
        w = _even_part(grid, w)
        nw = np.linalg.norm(w)
        if nw == 0:
            raise SpectralError("inverse iteration produced a zero vector")
        v = w / nw
        lam = float(v @ op.apply(v))
        if abs(lam - lam_prev) < tol * max(1.0, abs(lam)):
            break
        lam_prev = lam
        sigma = lam - 0.3
    if lam >= 0:
        raise NoNegativeEigenvalueError(
            f"lowest even eigenvalue {lam:g} is nonnegative"
        )
    q = v / np.sqrt(grid.dx)  # L2-normalize with the quadrature weight
    idx0 = int(np.argmin(np.abs(grid.x)))
    if q[idx0] < 0:
        q = -q
    return -lam, ScalarField(grid, q)


@dataclass
class SpectralPack:
    """Per-velocity bundle of eigen-directions and operators."""

    boost: Boost
    grid: Grid
    gs: GroundState
    lam0: float
    Qminus: ScalarField
    Zplus: FieldPair
    Zminus: FieldPair
    Z0: FieldPair
    Phi0: FieldPair
    PhiMinus: FieldPair
    Yplus: FieldPair | None = None
    Yminus: FieldPair | None = None
    mu0: float | None = None
    alpha0: float | None = None
    z_scale_plus: float = 1.0
    z_scale_minus: float = 1.0
    potential: np.ndarray = None  # f'(Q_beta) samples
    Qbeta: np.ndarray = None
    lplus: LinearOperator = None
    H: LinearOperator = None
    calH: LinearOperator = None

    @property
    def eigenrate(self) -> float:
        """The unstable rate sqrt(lambda0)/gamma of calH."""
        return float(np.sqrt(self.lam0) / self.boost.gamma)

    def quadratic_form(self, V: np.ndarray) -> float:
        """<HV|V> with the dx quadrature weight."""
        return float(self.grid.dx * np.sum(self.H.apply(V) * V))


def _refine_qminus(gs: GroundState, boost: Boost, grid: Grid, lam0: float):
    """
    Recompute Q-_beta and its derivative to near machine accuracy by
    integrating q'' = gamma^2 (1 + lam0 - f'(Q(gamma x))) q inward from the
    tail (the decaying solution grows inward, so this direction is stable),
    in the scaled variable h = q e^{+kappa x} to avoid underflow. The
    eigensolver output alone carries a noise floor that products with
    growing exponentials would amplify catastrophically.
    """
    from scipy.integrate import solve_ivp

    g = boost.gamma
    kappa = g * np.sqrt(1.0 + lam0)
    nl = gs.nonlinearity
    x_edge = 0.5 * grid.length

    def rhs(x, y):
        h, hp = y
        fp = nl.fprime(gs.evaluate(np.array([g * x])))[0]
        return [hp, 2.0 * kappa * hp - g * g * fp * h]

    sol = solve_ivp(rhs, (x_edge, 0.0), [1.0, 0.0], method="RK45",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    if not sol.success:
        raise SpectralError(f"tail refinement ODE failed: {sol.message}")

    ax = np.abs(grid.wrap(grid.x))
    hv, hpv = sol.sol(ax)
    expf = np.exp(-kappa * ax)
    q = hv * expf
    dq = np.sign(grid.wrap(grid.x)) * (hpv - kappa * hv) * expf
    # L2 normalization and sign convention (positive at the center)
    nrm = np.sqrt(grid.dx) * np.linalg.norm(q)
    idx0 = int(np.argmin(np.abs(grid.x)))
    s = 1.0 if q[idx0] > 0 else -1.0
    return s * q / nrm, s * dq / nrm


def build_pack(gs: GroundState, nl: Nonlinearity, boost: Boost, grid: Grid,
               with_y: bool = True) -> SpectralPack:
    """Assemble the full spectral package around Q_beta centered at x = 0."""
    lp = build_lplus(gs, nl, boost, grid)
    qb2 = gs.evaluate(boost.gamma * grid.wrap(grid.x)) ** 2
    lam0, qm = ground_eigenpair(lp, grid, v0=qb2)

    g = boost.gamma
    b = boost.beta
    x = grid.x
    qmv, qmp = _refine_qminus(gs, boost, grid, lam0)
    if abs(grid.dx * np.dot(qmv, qm.values)) < 0.99:
        raise SpectralError(
            "refined Q- disagrees with the eigensolver ground mode")
    qm = ScalarField(grid, qmv)
    qbeta = gs.evaluate(g * grid.wrap(x))
    qbeta_p = deriv_values(grid, qbeta)
    qbeta_pp = deriv2_values(grid, qbeta)
    root = np.sqrt(lam0)

    def make_z(sign: float):
        # products built in exponent space: exp factor alone may overflow
        ln_qm = np.log(np.maximum(qmv, np.finfo(float).tiny))
        z2 = np.exp(sign * b * root * g * x + ln_qm)
        z1 = (b * qmp / np.maximum(qmv, np.finfo(float).tiny)
              + sign * g * root) * z2
        Z = FieldPair.from_arrays(grid, z1, z2)
        scale = norm_energy(Z)
        return FieldPair.from_arrays(grid, z1 / scale, z2 / scale), scale

    Zp, sp = make_z(+1.0)
    Zm, sm = make_z(-1.0)
    s0 = norm_energy(FieldPair.from_arrays(grid, b * qbeta_pp, qbeta_p))
    Z0 = FieldPair.from_arrays(grid, b * qbeta_pp / s0, qbeta_p / s0)
    Phi0 = FieldPair.from_arrays(grid, qbeta_p, -b * qbeta_pp)
    PhiM = FieldPair.from_arrays(grid, qmv, -b * qmp)

    pack = SpectralPack(
        boost=boost, grid=grid, gs=gs, lam0=lam0, Qminus=qm,
        Zplus=Zp, Zminus=Zm, Z0=Z0, Phi0=Phi0, PhiMinus=PhiM,
        z_scale_plus=sp, z_scale_minus=sm,
        potential=_potential(gs, boost, grid), Qbeta=qbeta,
        lplus=lp, H=build_h(gs, boost, grid), calH=build_calh(gs, boost, grid),
    )
    if with_y:
        pack.Yplus, pack.Yminus = solve_y(pack)
    return pack


def eigen_residual(pack: SpectralPack):
    """Relative residuals of calH Z+- = +-(sqrt(lam0)/gamma) Z+- and calH Z0 = 0."""
    mu = pack.eigenrate

    def rel(Z: FieldPair, lam: float) -> float:
        Zv = pair_values(Z)
        R = pack.calH.apply(Zv) - lam * Zv
        return norm_energy(pair_from_values(pack.grid, R)) / norm_energy(Z)

    return rel(pack.Zplus, mu), rel(pack.Zminus, -mu), rel(pack.Z0, 0.0)


def _solve_kernel_orthogonal(pack: SpectralPack, rhs: np.ndarray) -> np.ndarray:
    """Solve L+_beta y = rhs on the orthogonal complement of d_x Q_beta."""
    grid = pack.grid
    kern = deriv_values(grid, pack.Qbeta)
    kern = kern / np.linalg.norm(kern)
    ortho = abs(np.dot(rhs, kern)) / max(np.linalg.norm(rhs), 1e-300)
    if ortho > 1e-8:
        raise SpectralError(
            f"right-hand side not orthogonal to the kernel (defect {ortho:.2e})"
        )

    def proj(v):
        return v - np.dot(kern, v) * kern

    prhs = proj(rhs)
    A = spla.LinearOperator(
        (grid.n, grid.n), matvec=lambda v: proj(pack.lplus.apply(proj(v)))
    )
    y, info = spla.minres(A, prhs, rtol=1e-12, maxiter=8 * grid.n)
    if info != 0:
        raise SpectralError(f"constrained MINRES failed (info={info})")
    return proj(y)


def solve_y(pack: SpectralPack):
    """
    Y+- solving H Y = Z with <Phi0|Y> = 0, via the scalar reduction
    L+_beta Y1 = beta (Z2)' + Z1, then Y2 = Z2 - beta (Y1)'.
    """
    grid = pack.grid
    b = pack.boost.beta
    out = []
    for Z in (pack.Zplus, pack.Zminus):
        z1, z2 = pair_values(Z)
        rhs = b * deriv_values(grid, z2) + z1
        y1 = _solve_kernel_orthogonal(pack, rhs)
        y2 = z2 - b * deriv_values(grid, y1)
        Y = FieldPair.from_arrays(grid, y1, y2)
        c = inner_pair(pack.Phi0, Y) / inner_pair(pack.Phi0, pack.Phi0)
        Y = FieldPair.from_arrays(grid, y1 - c * pack.Phi0.first.values,
                                  y2 - c * pack.Phi0.second.values)
        out.append(Y)
    return out[0], out[1]


def _constrained_min(pack: SpectralPack, constraints, tol: float = 1e-9,
                     maxiter: int = 200) -> float:
    """
    min <HV|V> / ||V||_E^2 over {V : <C_i|V> = 0}, with ||.||_E the energy
    norm. Whitening W = M^{1/2} V (M = diag(-d_xx + 1, 1), diagonal in
    Fourier) turns the pencil into a bounded symmetric operator
    H~ = M^{-1/2} H M^{-1/2}; the smallest eigenvalue on the constrained
    subspace is found by inverse iteration with the projected-out span
    lifted above the continuum. Stops on Rayleigh-quotient stagnation: the
    minimum may sit at the radiation edge where eigenvalues cluster and the
    quotient converges long before any individual eigenvector does.
    """
    grid = pack.grid
    n = grid.n
    k2 = (2.0 * np.pi * np.fft.rfftfreq(n, d=grid.dx)) ** 2
    root = np.sqrt(1.0 + k2)

    def white(V, power):
        w = root if power > 0 else 1.0 / root
        v1 = np.fft.irfft(w * np.fft.rfft(V[0]), n=n)
        return np.stack([v1, V[1]])

    # constraints <V|c> = 0 become <W|M^{-1/2}c> = 0
    D = np.stack([white(np.asarray(c).reshape(2, n), -1).ravel()
                  for c in constraints])
    D = np.linalg.qr(D.T)[0].T

    def proj(w):
        return w - D.T @ (D @ w)

    lift = 5.0

    def op(w):
        pw = proj(w)
        hw = white(pack.H.apply(white(pw.reshape(2, n), -1)), -1).ravel()
        return proj(hw) + lift * (w - pw)

    A = spla.LinearOperator((2 * n, 2 * n), matvec=op)
    rng = np.random.default_rng(0)
    w = proj(rng.standard_normal(2 * n))
    w /= np.linalg.norm(w)
    mu = float(w @ op(w))
    for _ in range(maxiter):
        v, info = spla.minres(A, w, rtol=1e-12, maxiter=10 * n)
        if info != 0:
            raise SpectralError(f"inner MINRES solve failed (info={info})")
        v = proj(v)
        nv = np.linalg.norm(v)
        if nv == 0:
            raise SpectralError("constrained inverse iteration collapsed")
        w = v / nv
        mu_new = float(w @ op(w))
        if abs(mu_new - mu) < tol * max(1.0, abs(mu_new)):
            mu = mu_new
            break
        mu = mu_new
    if not np.isfinite(mu):
        raise SpectralError("constrained eigensolve did not converge")
    return mu


def coercivity_mu0(pack: SpectralPack) -> float:
    """
    mu0 = min of <HV|V>/||V||^2 on {<Phi0|V> = <Z+|V> = <Z-|V> = 0};
    must be strictly positive.
    """
    cons = [pair_values(pack.Phi0), pair_values(pack.Zplus),
            pair_values(pack.Zminus)]
    mu = _constrained_min(pack, cons)
    if mu <= 0:
        raise CoercivityError(f"mu0 = {mu:g} <= 0 (discretization failure)")
    pack.mu0 = mu
    return mu


def coercivity_alpha0(pack: SpectralPack) -> float:
    """alpha0 = same minimum on {<Phi0|V> = <H Phi-|V> = 0}; positive."""
    hphim = pack.H.apply(pair_values(pack.PhiMinus))
    cons = [pair_values(pack.Phi0), hphim]
    a = _constrained_min(pack, cons)
    if a <= 0:
        raise CoercivityError(f"alpha0 = {a:g} <= 0 (discretization failure)")
    pack.alpha0 = a
    return a


def check_discrete_spectrum(pack: SpectralPack, tol_kernel: float = 1e-6):
    """
    Assumption check: the discrete L+_beta has exactly one negative
    eigenvalue, and its kernel direction d_x Q_beta has residual eigenvalue
    below tol_kernel. Returns (lam0, kernel_residual, second_even_eigenvalue).
    """
    grid = pack.grid
    kern = deriv_values(grid, pack.Qbeta)
    kern /= np.sqrt(grid.dx) * np.linalg.norm(kern)
    kres = abs(grid.dx * np.dot(kern, pack.lplus.apply(kern)))

    # second eigenvalue on the even subspace: minimize the Rayleigh quotient
    # orthogonally to Q-, staying even
    qm = pack.Qminus.values

    def proj(v):
        v = _even_part(grid, v)
        return v - grid.dx * np.dot(qm, v) * qm

    lift = 10.0  # pushes the projected-out subspace above the continuum edge

    def op(v):
        v = np.asarray(v).reshape(grid.n)
        return proj(pack.lplus.apply(proj(v))) + lift * (v - proj(v))

    A = spla.LinearOperator((grid.n, grid.n), matvec=op)
    rng = np.random.default_rng(1)
    X = rng.standard_normal((grid.n, 4))
    # only the sign and rough location of the eigenvalue matter here, so a
    # loose lobpcg solve is fine; silence its accuracy complaints
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        vals, _ = spla.lobpcg(A, X, largest=False, tol=1e-8, maxiter=2000)
    second_even = float(np.min(vals))
    if kres > tol_kernel:
        raise SpectralError(f"kernel residual {kres:g} exceeds {tol_kernel:g}")
    if second_even <= 0:
        raise SpectralError(
            f"second even eigenvalue {second_even:g} is nonpositive: "
            "L+ does not have a unique negative eigenvalue on this grid"
        )
    return pack.lam0, kres, second_even
