"""
Time integration of the 1-D nonlinear Klein-Gordon equation
u_tt - u_xx + u - f(u) = 0, forward and backward, by Strang splitting with
the exact (spectral) linear propagator. The splitting is symmetric, hence
exactly time-reversible, which the backward shooting construction relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import (
    Grid,
    FieldPair,
    deriv_values,
    norm_energy,
    pair_sub,
)
from .soliton import Nonlinearity


class BlowupError(RuntimeError):
    def __init__(self, t: float, message: str = "solution blew up"):
        super().__init__(f"{message} at t = {t:g}")
        self.t = t


@dataclass
class EvolveConfig:
    dt: float
    t_begin: float
    t_end: float
    blowup_threshold: float = 1e3
    record_every: int = 10
    store_states: bool = False

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")


@dataclass
class Trajectory:
    times: list
    states: list
    diagnostics: list  # dicts: t, energy, momentum, energy_norm, dist_to_reference
    status: str = "completed"  # completed | stopped
    final_state: FieldPair | None = None
    final_time: float | None = None


class Stepper:
    """One Strang step with precomputed mode rotations for a fixed |dt|."""

    def __init__(self, grid: Grid, nl: Nonlinearity, dt: float):
        if abs(dt) > grid.dx:
            raise ValueError(
                f"|dt| = {abs(dt):g} exceeds dx = {grid.dx:g}: splitting "
                "accuracy guard violated"
            )
        self.grid = grid
        self.nl = nl
        self.dt = dt
        k = 2.0 * np.pi * np.fft.rfftfreq(grid.n, d=grid.dx)
        omega = np.sqrt(1.0 + k * k)
        self._cos = np.cos(omega * dt)
        self._sin_over = np.sin(omega * dt) / omega
        self._omega_sin = omega * np.sin(omega * dt)

    def step_values(self, u: np.ndarray, ut: np.ndarray):
        half = 0.5 * self.dt
        ut = ut + half * self.nl.f(u)
        uk = np.fft.rfft(u)
        vk = np.fft.rfft(ut)
        uk_new = self._cos * uk + self._sin_over * vk
        vk = -self._omega_sin * uk + self._cos * vk
        u = np.fft.irfft(uk_new, n=self.grid.n)
        ut = np.fft.irfft(vk, n=self.grid.n)
        ut = ut + half * self.nl.f(u)
        return u, ut

    def step(self, U: FieldPair) -> FieldPair:
        u, ut = self.step_values(U.first.values, U.second.values)
        return FieldPair.from_arrays(self.grid, u, ut)


def step(U: FieldPair, dt: float, nl: Nonlinearity) -> FieldPair:
    """Single Strang splitting step of signed size dt."""
    out = Stepper(U.grid, nl, dt).step(U)
    if not (np.all(np.isfinite(out.first.values))
            and np.all(np.isfinite(out.second.values))):
        raise BlowupError(0.0, "non-finite values after step")
    return out


def energy(U: FieldPair, nl: Nonlinearity) -> float:
    """E = 1/2 int (u_t^2 + u_x^2 + u^2 - 2 F(u))."""
    u, ut = U.first.values, U.second.values
    ux = deriv_values(U.grid, u)
    dens = ut * ut + ux * ux + u * u - 2.0 * np.asarray(nl.F(u))
    return float(0.5 * U.grid.dx * np.sum(dens))


def momentum(U: FieldPair) -> float:
    """P = 1/2 int u_t u_x."""
    ux = deriv_values(U.grid, U.first.values)
    return float(0.5 * U.grid.dx * np.dot(U.second.values, ux))


def evolve(U0: FieldPair, config: EvolveConfig, nl: Nonlinearity,
           observers: Sequence[Callable] = (),
           reference: Callable[[float], FieldPair] | None = None) -> Trajectory:
    """
    Step from t_begin to t_end (backward when t_end < t_begin). Observers are
    called as obs(t, U) every record_every steps (and at both endpoints); a
    truthy return requests an early stop. Raises BlowupError when the energy
    norm exceeds the threshold or values go non-finite.
    """
    span = config.t_end - config.t_begin
    direction = 1.0 if span >= 0 else -1.0
    n_steps = int(round(abs(span) / config.dt))
    if abs(n_steps * config.dt - abs(span)) > 1e-9 * max(1.0, abs(span)):
        n_steps = int(np.ceil(abs(span) / config.dt))
    stepper = Stepper(U0.grid, nl, direction * config.dt)

    traj = Trajectory(times=[], states=[], diagnostics=[])
    u, ut = U0.first.values.copy(), U0.second.values.copy()

    def record(i_step: int, t: float) -> bool:
        U = FieldPair.from_arrays(U0.grid, u, ut)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(ut))):
            raise BlowupError(t, "non-finite values")
        en = norm_energy(U)
        if en > config.blowup_threshold:
            raise BlowupError(t, f"energy norm {en:g} exceeds threshold")
        diag = {
            "t": t,
            "energy": energy(U, nl),
            "momentum": momentum(U),
            "energy_norm": en,
        }
        if reference is not None:
            diag["dist_to_reference"] = norm_energy(pair_sub(U, reference(t)))
        traj.times.append(t)
        traj.diagnostics.append(diag)
        if config.store_states:
            traj.states.append(U)
        stop = False
        for obs in observers:
            if obs(t, U):
                stop = True
        return stop

    t = config.t_begin
    if record(0, t):
        traj.status = "stopped"
    else:
        for i in range(1, n_steps + 1):
            u, ut = stepper.step_values(u, ut)
            t = config.t_begin + direction * i * config.dt
            if i % config.record_every == 0 or i == n_steps:
                if record(i, t):
                    traj.status = "stopped"
                    break
    traj.final_state = FieldPair.from_arrays(U0.grid, u.copy(), ut.copy())
    traj.final_time = t
    return traj
