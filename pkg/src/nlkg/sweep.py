"""
Experiment runner: a single shooting run as a pipeline producing artifacts
in its own directory, plus parameter sweeps over a worker pool (one worker
per run, never intra-run, so results are independent of worker count).
"""

from __future__ import annotations

import itertools
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .grid import Grid, save_snapshot
from .soliton import Boost, Nonlinearity, SolitonParams, groundstate
from .spectral import build_pack
from .modulation import DEFAULT_EPS0, gamma0
from .shoot import AimError, ShootProblem, aim, fit_decay_exponent
from .config import ConfigError, RunConfig, config_items, parse_axis_value, validate
from . import report


def build_shoot_problem(cfg: RunConfig) -> ShootProblem:
    nl = Nonlinearity.power(cfg.p, cfg.lam)
    grid = Grid(n=cfg.n, length=cfg.length)
    gs = groundstate(nl, grid)
    packs = [build_pack(gs, nl, Boost(b), grid, with_y=False)
             for b in cfg.betas]
    params = SolitonParams(tuple(cfg.betas), tuple(cfg.shifts), nl)
    g0 = gamma0(params, packs[0].lam0)
    # the tube entrance must be meaningfully contracted or modulation
    # readouts near T0 lose meaning; 2 eps0 leaves room for the tube to
    # admit excursions somewhat beyond the modulation sweet spot
    if np.exp(-g0 * cfg.t0) >= 2.0 * DEFAULT_EPS0:
        raise ConfigError(
            f"tube radius e^(-gamma0 T0) = {np.exp(-g0 * cfg.t0):.3g} at "
            f"T0 = {cfg.t0:g} is not below 2 eps0 = {2.0 * DEFAULT_EPS0:g}; "
            "increase T0")
    return ShootProblem(
        params=params, gs=gs, packs=packs, s0=cfg.s0, t0=cfg.t0,
        gamma0=g0, dt=cfg.dt, record_every=cfg.record_every,
        cutoff_L=cfg.cutoff_l,
    )


TRAJECTORY_HEADER = ["t", "v_norm", "a_plus_norm", "a_minus_norm",
                     "a_zero_norm", "lyapunov", "energy", "momentum",
                     "inside", "reason"]


def write_trajectory_csv(path, result) -> None:
    rows = []
    for r in sorted(result.records, key=lambda rec: rec.t):
        rows.append([
            r.t, r.v_norm,
            float(np.linalg.norm(r.aplus)),
            float(np.linalg.norm(r.aminus)),
            float(np.linalg.norm(r.azero)),
            r.lyap, r.energy, r.momentum,
            r.inside, r.reason if r.reason else "",
        ])
    report.write_csv(path, TRAJECTORY_HEADER, rows)


def execute_run(cfg: RunConfig, out_dir: str) -> dict:
    """
    Full shooting pipeline for one configuration: aim, then emit the
    trajectory CSV, aim summary CSV, initial-data snapshot, and figures
    into out_dir. Returns the aggregate-row dict.
    """
    os.makedirs(out_dir, exist_ok=True)
    t_start = time.perf_counter()
    row = {name: val for name, val in config_items(cfg)}
    row.update(converged=False, aim="", fitted_exponent="", gamma0="",
               runs_used=0, error="")
    try:
        cfg, _ = validate(cfg)
        problem = build_shoot_problem(cfg)
        row["gamma0"] = problem.gamma0
        result = aim(problem, budget=cfg.budget, tol=cfg.aim_tol)
        expo = fit_decay_exponent(result, cfg.t0 + 1.0, cfg.s0 - 1.0)
        row.update(
            converged=True,
            aim=";".join(report.fmt(a) for a in result.aim),
            fitted_exponent=expo,
            runs_used=result.runs_used,
        )
        write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), result)
        report.write_csv(
            os.path.join(out_dir, "aim.csv"),
            ["component", "value"],
            [[f"a_hat_{j + 1}", a] for j, a in enumerate(result.aim)]
            + [["exit_residual", result.residual],
               ["runs_used", result.runs_used],
               ["gamma0", problem.gamma0],
               ["fitted_exponent", expo]],
        )
        save_snapshot(os.path.join(out_dir, "u0.nlkg"), result.U0)
        t, v, *_ = result.record_arrays()
        report.plot_decay(os.path.join(out_dir, "decay.png"), t, v,
                          problem.gamma0)
        report.plot_state(os.path.join(out_dir, "u0.png"), result.U0,
                          title="initial data at S0")
    except (ConfigError, ValueError, AimError, Exception) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        with open(os.path.join(out_dir, "error.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write(traceback.format_exc())
    row["runtime_s"] = time.perf_counter() - t_start
    return row


@dataclass
class SweepSpec:
    base: RunConfig
    axes: list  # [(field name, [values])]
    mode: str = "cross"  # cross | zip

    def __post_init__(self) -> None:
        if self.mode not in ("cross", "zip"):
            raise ConfigError(f"sweep mode must be cross or zip, got {self.mode}")
        for name, values in self.axes:
            if not hasattr(self.base, name):
                raise ConfigError(f"unknown sweep axis '{name}'")
            if not values:
                raise ConfigError(f"sweep axis '{name}' has no values")
        if self.mode == "zip" and self.axes:
            lengths = {len(v) for _, v in self.axes}
            if len(lengths) > 1:
                raise ConfigError("zipped axes must have equal lengths")

    def expand(self):
        if not self.axes:
            return [self.base]
        names = [n for n, _ in self.axes]
        if self.mode == "cross":
            combos = itertools.product(*(v for _, v in self.axes))
        else:
            combos = zip(*(v for _, v in self.axes))
        return [replace(self.base, **dict(zip(names, combo)))
                for combo in combos]


def parse_axis(text: str):
    """Parse 'name=v1;v2;v3' into (name, [typed values])."""
    if "=" not in text:
        raise ConfigError(f"axis must look like name=v1;v2;..., got {text!r}")
    name, _, rest = text.partition("=")
    name = name.strip()
    values = [parse_axis_value(name, tok.strip())
              for tok in rest.split(";") if tok.strip()]
    return name, values


AGGREGATE_HEADER = [name for name, _ in config_items(RunConfig())] + [
    "converged", "aim", "fitted_exponent", "gamma0", "runs_used", "error",
    "runtime_s",
]


def _worker(args):
    cfg, out_dir = args
    return execute_run(cfg, out_dir)


def run_sweep(spec: SweepSpec, workers: int, out_root: str):
    """
    Execute every configuration of the sweep, one worker per run, each run
    writing into its own run_### directory; the aggregate CSV keeps the
    expansion order regardless of worker count. Returns (rows, any_failed).
    """
    configs = spec.expand()
    os.makedirs(out_root, exist_ok=True)
    jobs = [(cfg, os.path.join(out_root, f"run_{i:03d}"))
            for i, cfg in enumerate(configs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_worker, jobs, chunksize=1))
    else:
        rows = [_worker(job) for job in jobs]
    table = [[row.get(col, "") for col in AGGREGATE_HEADER] for row in rows]
    report.write_csv(os.path.join(out_root, "aggregate.csv"),
                     AGGREGATE_HEADER, table)
    any_failed = any(row["error"] for row in rows)
    return rows, any_failed
