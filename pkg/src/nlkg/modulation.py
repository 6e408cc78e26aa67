"""
Modulation decomposition near a soliton sum and the Lyapunov machinery.

Given a state U close to a sum of boosted solitons, Newton iteration on the
orthogonality conditions <U - R~ | d_x R~_j> = 0 produces fitted centers
y~_j and a residual V; the coefficient vectors a+, a-, a0 are the inner
products of V against the translated eigen-directions (note the cross
pairing a_{+,j} = <V|Z_{-,j}>). Also here: the decay constant gamma0, the
shrinking-tube membership test, cutoff partitions of unity, localized
momenta, the Lyapunov functional, and the localized quadratic forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    Grid,
    ScalarField,
    FieldPair,
    deriv_values,
    inner_pair,
    norm_energy,
    pair_sub,
    translate_pair,
    translate_values,
)
from .soliton import Boost, GroundState, SolitonParams, boosted_soliton
from .evolve import energy
from .spectral import SpectralPack

DEFAULT_EPS0 = 0.3
DEFAULT_L0 = 8.0


class ModulationError(RuntimeError):
    pass


class SeparationError(ModulationError):
    """Soliton centers too close for the decomposition to be well-defined."""


@dataclass
class ModState:
    t: float
    shifts: np.ndarray          # fitted centers y~_j
    shift_residues: np.ndarray  # x~_j = y~_j - beta_j t
    V: FieldPair
    aplus: np.ndarray
    aminus: np.ndarray
    azero: np.ndarray
    newton_residual: float

    @property
    def v_norm(self) -> float:
        return norm_energy(self.V)


@dataclass
class TubeStatus:
    inside: bool
    reason: str | None
    ratios: dict

    def __bool__(self) -> bool:
        return self.inside


def _soliton_sum_at(gs: GroundState, params: SolitonParams, shifts,
                    grid: Grid) -> FieldPair:
    u = np.zeros(grid.n)
    ut = np.zeros(grid.n)
    for b, y in zip(params.betas, shifts):
        Rj = boosted_soliton(gs, Boost(b), float(y), 0.0, grid)
        u += Rj.first.values
        ut += Rj.second.values
    return FieldPair.from_arrays(grid, u, ut)


def _dx_rj(gs: GroundState, beta: float, y: float, grid: Grid) -> FieldPair:
    Rj = boosted_soliton(gs, Boost(beta), y, 0.0, grid)
    return FieldPair.from_arrays(
        grid,
        deriv_values(grid, Rj.first.values),
        deriv_values(grid, Rj.second.values),
    )


def modulate(U: FieldPair, t: float, params: SolitonParams, gs: GroundState,
             packs, guess=None, eps0: float = DEFAULT_EPS0,
             L0: float = DEFAULT_L0, tol: float = 1e-12, max_iter: int = 50,
             fd_step: float = 1e-5, check_preconditions: bool = True) -> ModState:
    """
    Decompose U at time t into fitted shifts + residual V with
    <V | d_x R~_j> = 0, then evaluate the coefficient vectors against the
    per-soliton spectral packs (translated to the fitted centers).
    """
    grid = U.grid
    N = params.n_solitons
    y = np.array(guess if guess is not None else params.centers(t), dtype=float)

    if check_preconditions:
        if N > 1:
            sep = np.min(np.diff(np.sort(y)))
            if sep < L0:
                raise SeparationError(
                    f"center separation {sep:g} below L0 = {L0:g}"
                )
        dist = norm_energy(pair_sub(U, _soliton_sum_at(gs, params, y, grid)))
        if dist > eps0:
            raise ModulationError(
                f"state is {dist:g} from the soliton sum, beyond eps0 = {eps0:g}"
            )

    def g_of(yv: np.ndarray) -> np.ndarray:
        R = _soliton_sum_at(gs, params, yv, grid)
        V = pair_sub(U, R)
        return np.array([
            inner_pair(V, _dx_rj(gs, params.betas[j], float(yv[j]), grid))
            for j in range(N)
        ])

    g = g_of(y)
    res = float(np.max(np.abs(g)))
    for _ in range(max_iter):
        if res < tol:
            break
        J = np.empty((N, N))
        for k in range(N):
            yp = y.copy()
            ym = y.copy()
            yp[k] += fd_step
            ym[k] -= fd_step
            J[:, k] = (g_of(yp) - g_of(ym)) / (2.0 * fd_step)
        try:
            delta = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError as exc:
            raise ModulationError("singular modulation Jacobian") from exc
        y = y + delta
        g = g_of(y)
        res = float(np.max(np.abs(g)))
    else:
        raise ModulationError(
            f"Newton did not converge in {max_iter} iterations "
            f"(residual {res:g})"
        )

    V = pair_sub(U, _soliton_sum_at(gs, params, y, grid))
    aplus = np.empty(N)
    aminus = np.empty(N)
    azero = np.empty(N)
    for j in range(N):
        pack: SpectralPack = packs[j]
        yj = float(y[j])
        aplus[j] = inner_pair(V, translate_pair(pack.Zminus, yj))
        aminus[j] = inner_pair(V, translate_pair(pack.Zplus, yj))
        azero[j] = inner_pair(V, translate_pair(pack.Z0, yj))
    return ModState(
        t=t,
        shifts=y,
        shift_residues=y - np.asarray(params.betas) * t,
        V=V,
        aplus=aplus,
        aminus=aminus,
        azero=azero,
        newton_residual=res,
    )


def gamma0(params: SolitonParams, lam0: float) -> float:
    """
    Decay constant: (1/4) min( sqrt(lam0) min_j 1/gamma_j,
    min_j gamma_j * min consecutive velocity gap ). For N = 1 the gap list
    is empty and only the first term applies.
    """
    betas = np.asarray(params.betas, dtype=float)
    if np.any(np.diff(betas) <= 0):
        raise ValueError("velocities must be strictly increasing and distinct")
    gammas = 1.0 / np.sqrt(1.0 - betas * betas)
    term1 = 0.25 * np.sqrt(lam0) * float(np.min(1.0 / gammas))
    if betas.size == 1:
        return term1
    term2 = 0.25 * float(np.min(gammas)) * float(np.min(np.diff(betas)))
    return min(term1, term2)


def tube_check(mod: ModState, t: float, params: SolitonParams,
               gamma0_val: float) -> TubeStatus:
    """
    Membership in the shrinking tube: ||V|| and shift deviations within
    e^{-gamma0 t}, the three coefficient l2-norms within e^{-3 gamma0 t/2}.
    Closed convention: equality is Inside; Exit requires strict exceedance.
    """
    r1 = np.exp(-gamma0_val * t)
    r2 = np.exp(-1.5 * gamma0_val * t)
    centers = params.centers(t)
    ratios = {
        "V": mod.v_norm / r1,
        "shift": float(np.max(np.abs(mod.shifts - centers))) / r1,
        "aPlus": float(np.linalg.norm(mod.aplus)) / r2,
        "aMinus": float(np.linalg.norm(mod.aminus)) / r2,
        "aZero": float(np.linalg.norm(mod.azero)) / r2,
    }
    violated = {k: v for k, v in ratios.items() if v > 1.0}
    if not violated:
        return TubeStatus(True, None, ratios)
    reason = max(violated, key=violated.get)
    return TubeStatus(False, reason, ratios)


@dataclass
class CutoffFamily:
    L: float
    midpoints: np.ndarray  # m_j for j = 2..N (interface velocities)
    phis: list             # N ScalarFields summing to 1

    @property
    def n(self) -> int:
        return len(self.phis)


def build_cutoffs(params: SolitonParams, t: float, L: float,
                  grid: Grid) -> CutoffFamily:
    """
    phi_j = phi((x - m_j t)/L) - phi((x - m_{j+1} t)/L) with
    phi(s) = (1 + tanh s)/2, m_1 = -inf, m_{N+1} = +inf, and
    m_j = (beta_j + beta_{j-1})/2 for j = 2..N. Telescoping makes the
    partition of unity exact.
    """
    betas = params.betas
    N = len(betas)
    x = grid.x
    mids = np.array([(betas[j] + betas[j - 1]) / 2.0 for j in range(1, N)])

    def phi(s):
        return 0.5 * (1.0 + np.tanh(s))

    steps = [phi((x - m * t) / L) for m in mids]
    phis = []
    for j in range(N):
        left = steps[j - 1] if j > 0 else np.ones(grid.n)
        right = steps[j] if j < N - 1 else np.zeros(grid.n)
        phis.append(ScalarField(grid, left - right))
    return CutoffFamily(L=L, midpoints=mids, phis=phis)


def portion_momentum(U: FieldPair, phi_j: ScalarField) -> float:
    """P_j = 1/2 int phi_j u_t u_x."""
    ux = deriv_values(U.grid, U.first.values)
    return float(0.5 * U.grid.dx
                 * np.sum(phi_j.values * U.second.values * ux))


def lyapunov(U: FieldPair, params: SolitonParams, cutoffs: CutoffFamily,
             nl) -> float:
    """F = E + 2 sum_j beta_j P_j."""
    total = energy(U, nl)
    for b, phi_j in zip(params.betas, cutoffs.phis):
        total += 2.0 * b * portion_momentum(U, phi_j)
    return total


def localized_form(V: FieldPair, phi_j: ScalarField, pack: SpectralPack,
                   center: float = 0.0) -> float:
    """
    <H_j V|V> = int phi_j (v2^2 + v1x^2 + v1^2 - f'(Q_beta_j(. - center)) v1^2
    + 2 beta_j v2 v1x).
    """
    grid = V.grid
    v1, v2 = V.first.values, V.second.values
    v1x = deriv_values(grid, v1)
    pot = translate_values(grid, pack.potential, center)
    dens = (v2 * v2 + v1x * v1x + v1 * v1 - pot * v1 * v1
            + 2.0 * pack.boost.beta * v2 * v1x)
    return float(grid.dx * np.sum(phi_j.values * dens))
