"""
Backward-in-time shooting for approximate N-soliton data.

Final data at S0 is a soliton sum plus a combination of the unstable/stable
directions Z+-, chosen so the modulated coefficients hit prescribed values.
Integrating backward, the trajectory stays in a shrinking tube until the
unstable coefficients eject it; the aim vector is adjusted (bisection for
one soliton, damped Newton with floor continuation otherwise) until the
rescaled unstable coefficients vanish at T0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import FieldPair, norm_energy, pair_axpy, translate_pair
from .soliton import GroundState, SolitonParams, soliton_sum
from .evolve import BlowupError, Stepper, energy, momentum
from .modulation import (
    ModState,
    ModulationError,
    build_cutoffs,
    lyapunov,
    modulate,
    tube_check,
)


class ConstructionError(RuntimeError):
    """Final-data synthesis failed (singular Gram or verification failure)."""


class AimError(RuntimeError):
    def __init__(self, message: str, best=None, runs_used: int = 0):
        super().__init__(message)
        self.best = best
        self.runs_used = runs_used


@dataclass
class ShootProblem:
    params: SolitonParams
    gs: GroundState
    packs: list
    s0: float
    t0: float
    gamma0: float
    dt: float = 0.005
    record_every: int = 10
    cutoff_L: float = 8.0
    blowup_factor: float = 10.0
    snapshot_interval: float = 1.0

    def __post_init__(self) -> None:
        if not self.t0 < self.s0:
            raise ValueError("T0 must be strictly below S0")
        for t in (self.t0, self.s0):
            y = np.sort(self.params.centers(t))
            if y.size > 1 and np.min(np.diff(y)) < 0.0:
                raise ValueError("soliton ordering degenerates inside [T0, S0]")

    @property
    def grid(self):
        return self.gs.grid

    @property
    def nl(self):
        return self.params.nonlinearity

    def coefficient_scale(self, t: float) -> float:
        return float(np.exp(-1.5 * self.gamma0 * t))


@dataclass
class ShootRecord:
    t: float
    v_norm: float
    aplus: np.ndarray
    aminus: np.ndarray
    azero: np.ndarray
    shifts: np.ndarray
    lyap: float
    energy: float
    momentum: float
    inside: bool
    reason: str | None


@dataclass
class ShootResult:
    aim: np.ndarray | None
    exit_time: float
    exit_reason: str | None  # None means survived to the floor
    records: list
    U0: FieldPair
    snapshots: list = field(default_factory=list)
    residual: float | None = None
    runs_used: int = 0
    stop_time: float | None = None
    stop_reason: str | None = None  # None unless modulation loss or blow-up

    @property
    def survived(self) -> bool:
        return self.exit_reason is None

    def record_arrays(self):
        """Time-ascending arrays (t, ||V||, ||a+||, ||a-||, ||a0||)."""
        recs = sorted(self.records, key=lambda r: r.t)
        t = np.array([r.t for r in recs])
        v = np.array([r.v_norm for r in recs])
        ap = np.array([np.linalg.norm(r.aplus) for r in recs])
        am = np.array([np.linalg.norm(r.aminus) for r in recs])
        a0 = np.array([np.linalg.norm(r.azero) for r in recs])
        return t, v, ap, am, a0


def final_data(problem: ShootProblem, a_hat) -> FieldPair:
    """
    U0 = R(S0) + sum b_{+-,j} Z_{+-,j} with the 2N coefficients solving
    a+(S0) = e^{-3 gamma0 S0/2} a_hat and a-(S0) = 0 (coefficients read off
    by modulation; solved by a short fixed point re-evaluating the direction
    translations at the modulated shifts).
    """
    a_hat = np.atleast_1d(np.asarray(a_hat, dtype=float))
    N = problem.params.n_solitons
    if a_hat.shape != (N,):
        raise ValueError(f"aim vector must have {N} components")
    if np.linalg.norm(a_hat) > 1.0 + 1e-12:
        raise ValueError("aim vector must lie in the closed unit ball")

    grid = problem.grid
    scale = problem.coefficient_scale(problem.s0)
    target = np.concatenate([scale * a_hat, np.zeros(N)])
    R = soliton_sum(problem.params, problem.gs, problem.s0, grid)
    y = problem.params.centers(problem.s0)
    b = np.zeros(2 * N)

    def assemble(bvec, shifts):
        U = R.copy()
        for j in range(N):
            Zp = translate_pair(problem.packs[j].Zplus, float(shifts[j]))
            Zm = translate_pair(problem.packs[j].Zminus, float(shifts[j]))
            U = pair_axpy(U, bvec[j], Zp)
            U = pair_axpy(U, bvec[N + j], Zm)
        return U

    mod = None
    err = None
    for _ in range(8):
        U0 = assemble(b, y)
        mod = modulate(U0, problem.s0, problem.params, problem.gs,
                       problem.packs, guess=y, check_preconditions=False)
        achieved = np.concatenate([mod.aplus, mod.aminus])
        err = target - achieved
        if np.max(np.abs(err)) < 1e-13:
            break
        # Gram at the modulated shifts; rows follow the cross pairing
        # a_{+,j} = <.|Z_{-,j}>, a_{-,j} = <.|Z_{+,j}>
        G = np.empty((2 * N, 2 * N))
        tests = ([translate_pair(problem.packs[j].Zminus, float(mod.shifts[j]))
                  for j in range(N)]
                 + [translate_pair(problem.packs[j].Zplus, float(mod.shifts[j]))
                    for j in range(N)])
        dirs = ([translate_pair(problem.packs[k].Zplus, float(mod.shifts[k]))
                 for k in range(N)]
                + [translate_pair(problem.packs[k].Zminus, float(mod.shifts[k]))
                   for k in range(N)])
        from .grid import inner_pair
        for i, Ti in enumerate(tests):
            for k, Dk in enumerate(dirs):
                G[i, k] = inner_pair(Dk, Ti)
        if np.linalg.cond(G) > 1e10:
            raise ConstructionError(
                "direction Gram matrix near-singular (solitons too close)"
            )
        b = b + np.linalg.solve(G, err)
        y = mod.shifts
    if np.max(np.abs(err)) > 1e-10:
        raise ConstructionError(
            f"final-data coefficients off target by {np.max(np.abs(err)):.2e}"
        )
    if mod.v_norm > max(50.0 * scale, 1e-3):
        raise ConstructionError(
            f"residual norm {mod.v_norm:.3e} too large for final data "
            f"(scale {scale:.3e})"
        )
    return assemble(b, y)


def _make_record(problem: ShootProblem, t: float, U: FieldPair,
                 mod: ModState, status) -> ShootRecord:
    cut = build_cutoffs(problem.params, t, problem.cutoff_L, problem.grid)
    return ShootRecord(
        t=t,
        v_norm=mod.v_norm,
        aplus=mod.aplus.copy(),
        aminus=mod.aminus.copy(),
        azero=mod.azero.copy(),
        shifts=mod.shifts.copy(),
        lyap=lyapunov(U, problem.params, cut, problem.nl),
        energy=energy(U, problem.nl),
        momentum=momentum(U),
        inside=status.inside,
        reason=status.reason,
    )


def backward_run(problem: ShootProblem, U0: FieldPair,
                 floor: float | None = None,
                 keep_snapshots: bool = True,
                 enforce_tube: bool = True) -> ShootResult:
    """
    Integrate backward from S0 with tube monitoring every record_every
    steps; on the first violation, re-steps from the last inside state one
    dt at a time so the exit time is resolved to within a single step.
    With enforce_tube the run stops there; without it (used while aiming)
    integration continues to the floor so the coefficients there remain
    available, stopping only on modulation loss or blow-up.
    """
    floor = problem.t0 if floor is None else floor
    grid = problem.grid
    stepper = Stepper(grid, problem.nl, -problem.dt)
    blowup_cap = problem.blowup_factor * norm_energy(
        soliton_sum(problem.params, problem.gs, problem.s0, grid))

    u = U0.first.values.copy()
    ut = U0.second.values.copy()
    shifts = problem.params.centers(problem.s0)
    records: list = []
    snapshots: list = []
    next_snap = problem.s0
    first_exit = None  # (time, reason) of the first tube violation

    def observe(t, u, ut, warm):
        U = FieldPair.from_arrays(grid, u, ut)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(ut))):
            raise BlowupError(t, "non-finite values")
        if norm_energy(U) > blowup_cap:
            raise BlowupError(t, "energy norm beyond blow-up threshold")
        mod = modulate(U, t, problem.params, problem.gs, problem.packs,
                       guess=warm, check_preconditions=False)
        status = tube_check(mod, t, problem.params, problem.gamma0)
        return U, mod, status

    n_steps = int(round((problem.s0 - floor) / problem.dt))
    last_inside = (0, u.copy(), ut.copy(), shifts.copy())

    def finish(stop_t, stop_reason):
        if first_exit is not None:
            exit_t, exit_reason = first_exit
        else:
            exit_t, exit_reason = stop_t, stop_reason
        return ShootResult(aim=None, exit_time=exit_t, exit_reason=exit_reason,
                           records=records, U0=U0, snapshots=snapshots,
                           stop_time=stop_t, stop_reason=stop_reason)

    i = 0
    try:
        while True:
            t = problem.s0 - i * problem.dt
            try:
                U, mod, status = observe(t, u, ut, shifts)
            except ModulationError:
                return finish(t, "ModulationLost")
            shifts = mod.shifts
            records.append(_make_record(problem, t, U, mod, status))
            if keep_snapshots and t <= next_snap + 1e-9:
                snapshots.append((t, U.copy()))
                next_snap = t - problem.snapshot_interval
            if not status.inside and first_exit is None:
                if i == 0:
                    first_exit = (t, status.reason)
                else:
                    # refine from the last inside record, one dt at a time
                    # (the coarse record at step i already covers k = i)
                    i0, ur, utr, warm = last_inside
                    for k in range(i0 + 1, i):
                        ur, utr = stepper.step_values(ur, utr)
                        tk = problem.s0 - k * problem.dt
                        try:
                            Uk, modk, stk = observe(tk, ur, utr, warm)
                        except ModulationError:
                            return finish(tk, "ModulationLost")
                        warm = modk.shifts
                        records.append(_make_record(problem, tk, Uk, modk, stk))
                        if not stk.inside:
                            first_exit = (tk, stk.reason)
                            break
                    if first_exit is None:
                        first_exit = (t, status.reason)
                if enforce_tube:
                    return finish(first_exit[0], None)
            if status.inside:
                last_inside = (i, u.copy(), ut.copy(), shifts.copy())
            if i >= n_steps:
                break
            hop = min(problem.record_every, n_steps - i)
            for _ in range(hop):
                u, ut = stepper.step_values(u, ut)
            i += hop
    except BlowupError as exc:
        return finish(exc.t, "BlowUp")
    return finish(floor, None)


def exit_map(problem: ShootProblem, result: ShootResult) -> np.ndarray:
    """
    The extended exit map G: the rescaled coefficient spot
    e^{3 gamma0 t/2} a+(t) at the earliest reached time (the floor when the
    run gets there, the stopping point when it blows up or loses modulation
    first). At an a+ ejection the spot has norm pinned near 1, so continuing
    past the exit to the floor is what makes |G| informative for Newton.
    Zero of G over the open unit ball is the aim.
    """
    recs = sorted(result.records, key=lambda r: r.t)
    r0 = recs[0]
    return np.exp(1.5 * problem.gamma0 * r0.t) * r0.aplus


def _run_and_map(problem, a_hat, floor, counter):
    counter[0] += 1
    U0 = final_data(problem, a_hat)
    res = backward_run(problem, U0, floor=floor, keep_snapshots=True,
                       enforce_tube=False)
    return res, exit_map(problem, res)


def aim(problem: ShootProblem, a0=None, budget: int = 60,
        tol: float = 0.05, verbose: bool = False) -> ShootResult:
    """
    Find the aim vector in the open unit ball that zeros the extended exit
    map at T0 (so the backward trajectory tracks the soliton sum all the way
    down). N = 1: sign-change bisection on the scalar exit coefficient.
    N >= 2: damped Newton on the extended exit map, continued over a
    schedule of intermediate floors to keep the map well-conditioned.
    Returns the best run (surviving preferred); whether the trajectory
    stayed inside the tube is reported on the result, not enforced here.
    """
    N = problem.params.n_solitons
    counter = [0]
    best = None

    def better(res, g, a):
        # prefer surviving runs, then the smaller exit-map residual
        nonlocal best
        key = (not res.survived, float(np.linalg.norm(g)))
        if best is None or key < (not best[0].survived, best[2]):
            res.aim = np.atleast_1d(np.asarray(a, dtype=float)).copy()
            res.residual = key[1]
            best = (res, g, res.residual)

    if N == 1:
        lo, hi = -0.95, 0.95
        _, g_lo = _run_and_map(problem, [lo], problem.t0, counter)
        sign_lo = np.sign(g_lo[0])
        while counter[0] < budget:
            mid = 0.5 * (lo + hi)
            res, g = _run_and_map(problem, [mid], problem.t0, counter)
            better(res, g, [mid])
            if abs(g[0]) <= tol:
                break
            if np.sign(g[0]) == sign_lo:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        if best is None:
            raise AimError("bisection found no surviving aim",
                           runs_used=counter[0])
        best[0].runs_used = counter[0]
        return best[0]

    # N >= 2: floor continuation + damped Newton
    window = problem.s0 - problem.t0
    floors = []
    w = min(4.0, window)
    while w < window:
        floors.append(problem.s0 - w)
        w += 2.5
    floors.append(problem.t0)

    a = np.zeros(N) if a0 is None else np.atleast_1d(np.asarray(a0, float)).copy()
    res = None
    for floor in floors:
        stage_tol = tol
        res, g = _run_and_map(problem, a, floor, counter)
        if floor == problem.t0:
            better(res, g, a)
        gnorm = float(np.linalg.norm(g))
        it = 0
        if verbose:
            print(f"floor {floor:g}: start |G| = {gnorm:.3e}, a = {a}, "
                  f"stop = {res.stop_time}/{res.stop_reason}, "
                  f"exit = {res.exit_time}/{res.exit_reason}", flush=True)
        while gnorm > stage_tol:
            it += 1
            if counter[0] + N + 1 > budget:
                raise AimError(
                    f"aiming budget exhausted at floor {floor:g} "
                    f"(|G| = {gnorm:.3g})",
                    best=best[0] if best else None, runs_used=counter[0])
            if it > 25:
                raise AimError(f"stalled Newton at floor {floor:g}",
                               best=best[0] if best else None,
                               runs_used=counter[0])
            h = 1e-6
            J = np.empty((N, N))
            for k in range(N):
                ak = a.copy()
                ak[k] += h
                _, gk = _run_and_map(problem, ak, floor, counter)
                J[:, k] = (gk - g) / h
            try:
                delta = np.linalg.solve(J, -g)
            except np.linalg.LinAlgError:
                delta = -np.linalg.pinv(J) @ g
            step_cap = 0.5
            nd = np.linalg.norm(delta)
            if nd > step_cap:
                delta *= step_cap / nd
            alpha = 1.0
            while True:
                trial = a + alpha * delta
                if np.linalg.norm(trial) >= 0.999:
                    trial *= 0.999 / np.linalg.norm(trial)
                res_t, g_t = _run_and_map(problem, trial, floor, counter)
                gn_t = float(np.linalg.norm(g_t))
                if gn_t < gnorm or alpha <= 1.0 / 16.0:
                    a, res, g, gnorm = trial, res_t, g_t, gn_t
                    if floor == problem.t0:
                        better(res, g, a)
                    if verbose:
                        print(f"  it {it}: |G| = {gnorm:.3e}, alpha = "
                              f"{alpha:g}, a = {a}, stop = {res_t.stop_time}/"
                              f"{res_t.stop_reason}, exit = {res_t.exit_time}"
                              f"/{res_t.exit_reason}", flush=True)
                    break
                alpha *= 0.5
                if counter[0] >= budget:
                    raise AimError(
                        "aiming budget exhausted during damping",
                        best=best[0] if best else None, runs_used=counter[0])
    if best is None:
        raise AimError("no surviving run at the final floor",
                       runs_used=counter[0])
    best[0].runs_used = counter[0]
    return best[0]


def fit_decay_exponent(result: ShootResult, t_lo: float, t_hi: float) -> float:
    """Least-squares decay exponent of ||V(t)|| on [t_lo, t_hi]."""
    t, v, *_ = result.record_arrays()
    mask = (t >= t_lo) & (t <= t_hi) & (v > 0)
    if mask.sum() < 3:
        raise ValueError("not enough records in the fit window")
    slope = np.polyfit(t[mask], np.log(v[mask]), 1)[0]
    return float(-slope)


def transversality_slope(result: ShootResult, gamma0: float,
                         n_points: int = 5) -> float:
    """
    Forward-time d/dt of N(t) = e^{3 gamma0 t} ||a+(t)||^2 at the exit,
    by a least-squares slope over the last records before exit.
    """
    recs = sorted(result.records, key=lambda r: r.t)[:n_points]
    if len(recs) < 2:
        raise ValueError("not enough records near the exit")
    t = np.array([r.t for r in recs])
    nval = np.exp(3.0 * gamma0 * t) * np.array(
        [np.linalg.norm(r.aplus) ** 2 for r in recs])
    return float(np.polyfit(t, nval, 1)[0])


def horizon_continuation(problem: ShootProblem, s0_schedule,
                         budget: int = 60, tol: float = 0.05):
    """
    Re-aim for each horizon S0 in the increasing schedule, warm-starting
    from the previous aim; returns [(s0, ShootResult, fitted_exponent)].
    """
    s0s = list(s0_schedule)
    if any(b <= a for a, b in zip(s0s, s0s[1:])):
        raise ValueError("horizon schedule must be strictly increasing")
    out = []
    warm = None
    for s0 in s0s:
        prob = ShootProblem(
            params=problem.params, gs=problem.gs, packs=problem.packs,
            s0=float(s0), t0=problem.t0, gamma0=problem.gamma0,
            dt=problem.dt, record_every=problem.record_every,
            cutoff_L=problem.cutoff_L, blowup_factor=problem.blowup_factor,
            snapshot_interval=problem.snapshot_interval,
        )
        res = aim(prob, a0=warm, budget=budget, tol=tol)
        warm = res.aim
        expo = fit_decay_exponent(res, problem.t0 + 1.0, float(s0) - 1.0)
        out.append((float(s0), res, expo))
    return out
