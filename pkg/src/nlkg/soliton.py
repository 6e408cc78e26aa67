"""
Ground states and Lorentz-boosted solitons.

Ground state: the positive even solution of Q'' - Q + f(Q) = 0, either in
closed form (pure power nonlinearity) or by shooting/bisection on Q(0).
Boosts: the Lorentz matrix, Einstein velocity addition, and the traveling
soliton (Q(g(x - b t - x0)), -b g Q'(g(x - b t - x0))).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .grid import Grid, ScalarField, FieldPair, deriv2_values

WRAP_WARN_MARGIN = 10.0


class GroundStateError(RuntimeError):
    """Shooting failed to bracket or converge to the homoclinic profile."""


class TruncationWarning(UserWarning):
    """A soliton center sits close to the periodic wrap-around."""


@dataclass(frozen=True)
class Nonlinearity:
    """
    The nonlinearity f, its derivative and antiderivative F(s) = int_0^s f.

    Use the `power` / `custom` constructors; `custom` validates oddness,
    f(0) = f'(0) = 0, and the focusing condition F(s0) > s0^2/2 for some s0.
    """

    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    F: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"
    p: float | None = None
    lam: float | None = None

    @staticmethod
    def power(p: float, lam: float = 1.0) -> "Nonlinearity":
        if not p > 1:
            raise ValueError(f"power nonlinearity needs p > 1, got {p}")
        if not lam > 0:
            raise ValueError(f"power nonlinearity needs lam > 0, got {lam}")

        def f(u):
            return lam * np.abs(u) ** (p - 1) * u

        def fprime(u):
            return lam * p * np.abs(u) ** (p - 1)

        def F(u):
            return lam * np.abs(u) ** (p + 1) / (p + 1)

        return Nonlinearity(f, fprime, F, label=f"power(p={p:g}, lam={lam:g})",
                            p=p, lam=lam)

    @staticmethod
    def custom(f, fprime, F, s_max: float = 10.0) -> "Nonlinearity":
        s = np.linspace(1e-6, s_max, 2001)
        if abs(float(f(0.0))) > 1e-12 or abs(float(fprime(0.0))) > 1e-12:
            raise ValueError("custom nonlinearity must satisfy f(0) = f'(0) = 0")
        odd_defect = np.max(np.abs(np.asarray(f(s)) + np.asarray(f(-s))))
        scale = max(1.0, float(np.max(np.abs(f(s)))))
        if odd_defect > 1e-10 * scale:
            raise ValueError("custom nonlinearity must be odd")
        if not np.any(np.asarray(F(s)) - 0.5 * s**2 > 0):
            raise ValueError(
                "custom nonlinearity is not focusing: F(s) - s^2/2 <= 0 "
                f"for all sampled s in (0, {s_max}]"
            )
        return Nonlinearity(f, fprime, F, label="custom")


@dataclass(frozen=True)
class Boost:
    """Lorentz velocity parameter beta in (-1, 1) and gamma = (1-beta^2)^(-1/2)."""

    beta: float

    def __post_init__(self) -> None:
        if not abs(self.beta) < 1:
            raise ValueError(f"|beta| must be < 1, got {self.beta}")

    @property
    def gamma(self) -> float:
        return 1.0 / np.sqrt(1.0 - self.beta * self.beta)


@dataclass
class GroundState:
    """
    Ground-state profile Q on a grid, with off-grid evaluators for boosting.

    `evaluate` / `evaluate_deriv` accept arbitrary abscissae (closed form for
    power nonlinearities, cubic spline of the shooting solution otherwise).
    """

    grid: Grid
    nonlinearity: Nonlinearity
    profile: ScalarField
    derivative: ScalarField
    amplitude: float
    decay_rate: float
    residual: float
    evaluate: Callable[[np.ndarray], np.ndarray]
    evaluate_deriv: Callable[[np.ndarray], np.ndarray]


def _residual_max(grid: Grid, q: np.ndarray, nl: Nonlinearity) -> float:
    return float(np.max(np.abs(deriv2_values(grid, q) - q + nl.f(q))))


def _fit_decay_rate(grid: Grid, q: np.ndarray) -> float:
    """Least-squares slope of -log Q on the right tail, where Q is still clean."""
    x = grid.x
    mask = (x > 3.0) & (q > 1e-12) & (x < x[-1] - 2.0)
    if mask.sum() < 8:
        return float("nan")
    coeff = np.polyfit(x[mask], np.log(q[mask]), 1)
    return float(-coeff[0])


def groundstate_power(p: float, lam: float, grid: Grid) -> GroundState:
    """
    Closed-form 1-D ground state for f(u) = lam |u|^(p-1) u:
    Q(x) = ((p+1)/(2 lam))^(1/(p-1)) sech^(2/(p-1))((p-1) x / 2).
    """
    nl = Nonlinearity.power(p, lam)
    amp = ((p + 1.0) / (2.0 * lam)) ** (1.0 / (p - 1.0))
    a = 2.0 / (p - 1.0)
    c = (p - 1.0) / 2.0

    def q_of(x):
        return amp * np.cosh(c * np.asarray(x, dtype=float)) ** (-a)

    def dq_of(x):
        x = np.asarray(x, dtype=float)
        # d/dx sech^a(cx) = -a c sech^a(cx) tanh(cx); here a*c = 1
        return -q_of(x) * np.tanh(c * x)

    qv = q_of(grid.x)
    res = _residual_max(grid, qv, nl)
    return GroundState(
        grid=grid,
        nonlinearity=nl,
        profile=ScalarField(grid, qv),
        derivative=ScalarField(grid, dq_of(grid.x)),
        amplitude=amp,
        decay_rate=_fit_decay_rate(grid, qv),
        residual=res,
        evaluate=q_of,
        evaluate_deriv=dq_of,
    )


def _classify_shot(nl: Nonlinearity, q0: float, x_max: float) -> str:
    """
    Integrate Q'' = Q - f(Q) from (q0, 0). 'cross' if Q hits zero,
    'turn' if Q' turns positive while Q > 0 (undershoot), else 'neither'.
    """

    def rhs(x, y):
        return [y[1], y[0] - float(nl.f(y[0]))]

    def ev_cross(x, y):
        return y[0]

    ev_cross.terminal = True
    ev_cross.direction = -1

    def ev_turn(x, y):
        return y[1] - 1e-14

    ev_turn.terminal = True
    ev_turn.direction = 1

    sol = solve_ivp(rhs, (0.0, x_max), [q0, 0.0], method="RK45",
                    rtol=1e-12, atol=1e-14, events=(ev_cross, ev_turn))
    if sol.t_events[0].size:
        return "cross"
    if sol.t_events[1].size:
        return "turn"
    return "neither"


def groundstate_shoot(nl: Nonlinearity, grid: Grid, s_max: float = 10.0,
                      max_iter: int = 200) -> GroundState:
    """
    Bisection on Q(0): amplitudes whose trajectory crosses zero bracket
    against those that turn around; the homoclinic value sits in between.
    Solved on [0, length/2], then reflected to enforce exact evenness.
    """
    x_max = 0.5 * grid.length

    # bracket scan
    samples = np.linspace(s_max / 400.0, s_max, 400)
    lo = hi = None
    prev_s, prev_c = None, None
    for s in samples:
        c = _classify_shot(nl, float(s), x_max)
        if c == "cross" and prev_c in ("turn", "neither"):
            lo, hi = prev_s, float(s)
            break
        prev_s, prev_c = float(s), c
    if lo is None:
        raise GroundStateError(
            f"no ground state bracket found for Q(0) in (0, {s_max}]"
        )

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if _classify_shot(nl, mid, x_max) == "cross":
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-14 * max(1.0, hi):
            break
    else:
        raise GroundStateError("bisection on Q(0) did not converge")
    q0 = 0.5 * (lo + hi)

    # final integration with dense output; splice an e^{-x} tail where the
    # trajectory inevitably departs from the homoclinic orbit
    def rhs(x, y):
        return [y[1], y[0] - float(nl.f(y[0]))]

    sol = solve_ivp(rhs, (0.0, x_max), [q0, 0.0], method="RK45",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    xs = np.linspace(0.0, x_max, 8 * grid.n)
    ys = sol.sol(xs)
    q, dq = ys[0], ys[1]
    bad = (q <= 1e-9) | (dq > 0)
    i_cut = int(np.argmax(bad)) if bad.any() else len(xs)
    if i_cut < 8:
        raise GroundStateError("shooting trajectory degenerate near the origin")
    x_s, q_s = xs[i_cut - 1], q[i_cut - 1]
    tail = xs >= x_s
    q = q.copy()
    dq = dq.copy()
    q[tail] = q_s * np.exp(-(xs[tail] - x_s))
    dq[tail] = -q[tail]

    if np.any(q <= 0) or np.any(np.diff(q[xs > 0.1]) > 1e-12):
        raise GroundStateError(
            "shooting converged to a non-ground-state profile "
            "(positivity/monotonicity check failed)"
        )

    spline = CubicSpline(xs, q, bc_type=((1, 0.0), (1, float(dq[-1]))))

    def q_of(x):
        x = np.abs(np.asarray(x, dtype=float))
        return np.where(x <= x_max, spline(np.minimum(x, x_max)), 0.0)

    def dq_of(x):
        x = np.asarray(x, dtype=float)
        ax = np.minimum(np.abs(x), x_max)
        return np.sign(x) * np.where(np.abs(x) <= x_max, spline(ax, 1), 0.0)

    qv = q_of(grid.x)
    res = _residual_max(grid, qv, nl)
    return GroundState(
        grid=grid,
        nonlinearity=nl,
        profile=ScalarField(grid, qv),
        derivative=ScalarField(grid, dq_of(grid.x)),
        amplitude=q0,
        decay_rate=_fit_decay_rate(grid, qv),
        residual=res,
        evaluate=q_of,
        evaluate_deriv=dq_of,
    )


def groundstate(nl: Nonlinearity, grid: Grid) -> GroundState:
    """Closed form when available, shooting otherwise."""
    if nl.p is not None:
        return groundstate_power(nl.p, nl.lam, grid)
    return groundstate_shoot(nl, grid)


def lorentz_matrix(beta, d: int | None = None) -> np.ndarray:
    """The (d+1)x(d+1) Lorentz boost matrix for velocity vector beta."""
    b = np.atleast_1d(np.asarray(beta, dtype=float))
    if d is None:
        d = b.size
    if b.size != d:
        raise ValueError(f"beta has {b.size} components, expected d={d}")
    n2 = float(np.dot(b, b))
    if not n2 < 1.0:
        raise ValueError(f"|beta| must be < 1, got |beta|^2 = {n2}")
    gamma = 1.0 / np.sqrt(1.0 - n2)
    M = np.zeros((d + 1, d + 1))
    M[0, 0] = gamma
    M[0, 1:] = -gamma * b
    M[1:, 0] = -gamma * b
    M[1:, 1:] = np.eye(d)
    if n2 > 0:
        M[1:, 1:] += (gamma - 1.0) / n2 * np.outer(b, b)
    return M


def velocity_add(x, y):
    """
    Einstein velocity addition x (+) y on the unit ball; the collinear 1-D
    case reduces to (x + y) / (1 + x y). Scalar in, scalar out.
    """
    scalar = np.isscalar(x) and np.isscalar(y)
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    if xv.shape != yv.shape:
        raise ValueError("velocity vectors must have the same dimension")
    if not (np.dot(xv, xv) < 1.0 and np.dot(yv, yv) < 1.0):
        raise ValueError("velocities must lie in the open unit ball")
    ny2 = float(np.dot(yv, yv))
    if ny2 == 0.0:
        out = xv
    else:
        dot = float(np.dot(xv, yv))
        par = (dot / ny2) * yv
        out = (yv + par + np.sqrt(1.0 - ny2) * (xv - par)) / (1.0 + dot)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class SolitonParams:
    """Velocities/shifts (beta_j, x_j), strictly ascending in beta."""

    betas: tuple
    shifts: tuple
    nonlinearity: Nonlinearity

    def __post_init__(self) -> None:
        betas = tuple(float(b) for b in self.betas)
        shifts = tuple(float(s) for s in self.shifts)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "shifts", shifts)
        if len(betas) != len(shifts) or not betas:
            raise ValueError("betas and shifts must be nonempty, equal length")
        if any(not abs(b) < 1 for b in betas):
            raise ValueError("all |beta_j| must be < 1")
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError("velocities must be strictly increasing")

    @property
    def n_solitons(self) -> int:
        return len(self.betas)

    def centers(self, t: float) -> np.ndarray:
        return np.array([b * t + s for b, s in zip(self.betas, self.shifts)])


def boosted_soliton(gs: GroundState, boost: Boost, shift: float, t: float,
                    grid: Grid) -> FieldPair:
    """
    Traveling wave (Q(g xi), -b g Q'(g xi)) with xi = x - b t - shift,
    wrapped periodically about the center.
    """
    center = boost.beta * t + shift
    w = (center - grid.x0) % grid.length
    dist_to_wrap = min(w, grid.length - w)
    if dist_to_wrap < WRAP_WARN_MARGIN:
        warnings.warn(
            f"soliton center {center:g} is within {dist_to_wrap:.2f} units of "
            "the periodic wrap; truncation error may be significant",
            TruncationWarning,
            stacklevel=2,
        )
    xi = grid.wrap(grid.x - center)
    g = boost.gamma
    u = gs.evaluate(g * xi)
    ut = -boost.beta * g * gs.evaluate_deriv(g * xi)
    return FieldPair.from_arrays(grid, u, ut)


def soliton_sum(params: SolitonParams, gs: GroundState, t: float,
                grid: Grid) -> FieldPair:
    """R(t, x) = sum_j boosted soliton with center beta_j t + x_j."""
    u = np.zeros(grid.n)
    ut = np.zeros(grid.n)
    for b, s in zip(params.betas, params.shifts):
        Rj = boosted_soliton(gs, Boost(b), s, t, grid)
        u += Rj.first.values
        ut += Rj.second.values
    return FieldPair.from_arrays(grid, u, ut)
