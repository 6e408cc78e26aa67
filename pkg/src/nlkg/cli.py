"""
Command-line interface: groundstate | spectrum | evolve | modulate | shoot
| sweep. Each reporting path writes the delimited output plus rendered
figures next to it.
"""

from __future__ import annotations

import argparse
import os
import sys

from .grid import Grid, load_snapshot, save_snapshot
from .soliton import Boost, Nonlinearity, SolitonParams, boosted_soliton, groundstate
from .spectral import build_pack, coercivity_alpha0, coercivity_mu0, eigen_residual
from .evolve import EvolveConfig, evolve
from .modulation import gamma0 as gamma0_of, modulate, tube_check
from .shoot import ShootProblem  # noqa: F401  (re-exported surface)
from .config import ConfigError, parse_config
from .sweep import SweepSpec, execute_run, parse_axis, run_sweep
from . import report


def _out_dir(args, cfg) -> str:
    path = args.out_dir or cfg.out_dir or os.environ.get("NLKG_OUT_DIR") or "."
    os.makedirs(path, exist_ok=True)
    return path


def _overrides(args, names):
    out = {}
    for name in names:
        val = getattr(args, name.replace("-", "_"), None)
        if val is not None:
            out[name] = val
    return out


def _load_config(args, names):
    cfg, notices = parse_config(args.config, _overrides(args, names))
    for note in notices:
        print(f"notice: {note}")
    return cfg


def cmd_groundstate(args) -> int:
    cfg = _load_config(args, ["p", "lam", "n", "length"])
    nl = Nonlinearity.power(cfg.p, cfg.lam)
    grid = Grid(n=cfg.n, length=cfg.length)
    gs = groundstate(nl, grid)
    out = _out_dir(args, cfg)
    snap = args.out or os.path.join(out, "groundstate.nlkg")
    pair = boosted_soliton(gs, Boost(0.0), 0.0, 0.0, grid)
    save_snapshot(snap, pair)
    report.plot_profile(os.path.splitext(snap)[0] + ".png", grid,
                        [gs.profile.values, gs.derivative.values],
                        ["Q", "Q'"], title="ground state")
    print(f"Q(0) = {gs.amplitude!r}")
    print(f"residual = {gs.residual:.3e}")
    print(f"decay_rate = {gs.decay_rate!r}")
    print(f"snapshot -> {snap}")
    return 0


def cmd_spectrum(args) -> int:
    cfg = _load_config(args, ["p", "lam", "beta", "n", "length"])
    nl = Nonlinearity.power(cfg.p, cfg.lam)
    grid = Grid(n=cfg.n, length=cfg.length)
    gs = groundstate(nl, grid)
    pack = build_pack(gs, nl, Boost(cfg.beta), grid)
    pack.mu0 = coercivity_mu0(pack)
    pack.alpha0 = coercivity_alpha0(pack)
    rp, rm, _ = eigen_residual(pack)
    rows = [
        ["lambda0", pack.lam0, ""],
        ["rate_plus", pack.eigenrate, rp],
        ["rate_minus", -pack.eigenrate, rm],
        ["mu0", pack.mu0, ""],
        ["alpha0", pack.alpha0, ""],
    ]
    out = _out_dir(args, cfg)
    csv_path = args.out_csv or os.path.join(out, "spectrum.csv")
    report.write_csv(csv_path, ["name", "value", "residual"], rows)
    report.plot_spectrum(os.path.splitext(csv_path)[0] + ".png",
                         [r[0] for r in rows], [r[1] for r in rows],
                         title=f"spectral constants, beta = {cfg.beta:g}")
    for name, value, _ in rows:
        print(f"{name} = {value!r}")
    print(f"csv -> {csv_path}")
    return 0


def cmd_evolve(args) -> int:
    cfg = _load_config(args, ["p", "lam", "dt", "record_every"])
    nl = Nonlinearity.power(cfg.p, cfg.lam)
    U0 = load_snapshot(args.init)
    out = _out_dir(args, cfg)
    econf = EvolveConfig(dt=cfg.dt, t_begin=args.t0, t_end=args.t1,
                         record_every=cfg.record_every,
                         store_states=bool(args.out_snapshots))
    traj = evolve(U0, econf, nl)
    header = ["t", "energy", "momentum", "energy_norm", "dist_to_reference"]
    rows = [[d["t"], d["energy"], d["momentum"], d["energy_norm"],
             d.get("dist_to_reference", "")] for d in traj.diagnostics]
    csv_path = args.out_csv or os.path.join(out, "evolve.csv")
    report.write_csv(csv_path, header, rows)
    times = [d["t"] for d in traj.diagnostics]
    e0 = traj.diagnostics[0]["energy"]
    p0 = traj.diagnostics[0]["momentum"]
    report.plot_diagnostics(
        os.path.splitext(csv_path)[0] + ".png", times,
        [[d["energy"] - e0 for d in traj.diagnostics],
         [d["momentum"] - p0 for d in traj.diagnostics]],
        ["energy drift", "momentum drift"], "drift", logy=False)
    if args.out_snapshots:
        os.makedirs(args.out_snapshots, exist_ok=True)
        for t, state in zip(traj.times, traj.states):
            save_snapshot(
                os.path.join(args.out_snapshots, f"state_t{t:+09.3f}.nlkg"),
                state)
    print(f"final t = {traj.final_time:g}, status = {traj.status}")
    print(f"csv -> {csv_path}")
    return 0


def cmd_modulate(args) -> int:
    cfg = _load_config(args, ["p", "lam", "betas", "shifts"])
    nl = Nonlinearity.power(cfg.p, cfg.lam)
    U = load_snapshot(args.state)
    grid = U.grid
    gs = groundstate(nl, grid)
    params = SolitonParams(tuple(cfg.betas), tuple(cfg.shifts), nl)
    packs = [build_pack(gs, nl, Boost(b), grid, with_y=False)
             for b in cfg.betas]
    mod = modulate(U, args.t, params, gs, packs)
    g0 = gamma0_of(params, packs[0].lam0)
    status = tube_check(mod, args.t, params, g0)
    N = params.n_solitons
    header = (["t"] + [f"y_{j + 1}" for j in range(N)] + ["v_norm"]
              + [f"a_plus_{j + 1}" for j in range(N)]
              + [f"a_minus_{j + 1}" for j in range(N)]
              + [f"a_zero_{j + 1}" for j in range(N)]
              + ["inside", "reason"])
    row = ([args.t] + list(mod.shifts) + [mod.v_norm] + list(mod.aplus)
           + list(mod.aminus) + list(mod.azero)
           + [status.inside, status.reason or ""])
    out = _out_dir(args, cfg)
    csv_path = args.out_csv or os.path.join(out, "modulate.csv")
    report.write_csv(csv_path, header, [row])
    report.plot_profile(os.path.splitext(csv_path)[0] + ".png", grid,
                        [mod.V.first.values, mod.V.second.values],
                        ["v1", "v2"], title="modulation residual")
    print(f"shifts = {list(mod.shifts)!r}")
    print(f"||V|| = {mod.v_norm!r}, inside tube: {status.inside}")
    print(f"csv -> {csv_path}")
    return 0


def cmd_shoot(args) -> int:
    cfg = _load_config(args, ["p", "lam", "betas", "shifts", "s0", "t0",
                              "n", "length", "dt", "budget", "aim_tol"])
    out = _out_dir(args, cfg)
    row = execute_run(cfg, out)
    if row["error"]:
        print(f"shoot failed: {row['error']}", file=sys.stderr)
        return 1
    print(f"aim = {row['aim']}")
    print(f"fitted_exponent = {row['fitted_exponent']!r} "
          f"(gamma0 = {row['gamma0']!r})")
    print(f"runs_used = {row['runs_used']}")
    print(f"artifacts -> {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args, ["p", "lam", "betas", "shifts", "s0", "t0",
                              "n", "length", "dt", "budget", "aim_tol",
                              "workers"])
    axes = [parse_axis(text) for text in (args.axis or [])]
    spec = SweepSpec(base=cfg, axes=axes, mode=args.mode)
    out = _out_dir(args, cfg)
    rows, any_failed = run_sweep(spec, cfg.workers, out)
    n_fail = sum(1 for r in rows if r["error"])
    print(f"{len(rows)} runs, {n_fail} failed; aggregate -> "
          f"{os.path.join(out, 'aggregate.csv')}")
    return 1 if any_failed else 0


def _add_common(sub, names):
    flag_types = {
        "p": int, "n": int, "record_every": int, "budget": int,
        "workers": int, "betas": str, "shifts": str,
    }
    for name in names:
        flag = "--" + name.replace("_", "-")
        if name == "lam":
            flag = "--lambda"
        sub.add_argument(flag, dest=name, type=flag_types.get(name, float),
                         default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlkg",
        description="Numerical laboratory for multi-soliton dynamics of the "
                    "1-D nonlinear Klein-Gordon equation.")
    parser.add_argument("--config", default=None,
                        help="key = value configuration file")
    parser.add_argument("--out-dir", default=None,
                        help="output root (default: NLKG_OUT_DIR or '.')")
    parser.add_argument("--workers", dest="workers", type=int, default=None)
    parser.add_argument("--seed", dest="seed", type=int, default=None,
                        help="seed for randomized property checks")
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("groundstate", help="solve for the ground state")
    _add_common(s, ["p", "lam", "length", "n"])
    s.add_argument("--out", default=None, help="snapshot path")
    s.set_defaults(func=cmd_groundstate)

    s = subs.add_parser("spectrum", help="spectral constants at one boost")
    _add_common(s, ["p", "lam", "beta", "n", "length"])
    s.add_argument("--out-csv", default=None)
    s.set_defaults(func=cmd_spectrum)

    s = subs.add_parser("evolve", help="integrate a snapshot in time")
    _add_common(s, ["p", "lam", "dt", "record_every"])
    s.add_argument("--init", required=True, help="initial snapshot")
    s.add_argument("--t0", type=float, required=True)
    s.add_argument("--t1", type=float, required=True)
    s.add_argument("--out-csv", default=None)
    s.add_argument("--out-snapshots", default=None)
    s.set_defaults(func=cmd_evolve)

    s = subs.add_parser("modulate", help="decompose a state near a soliton sum")
    _add_common(s, ["p", "lam", "betas", "shifts"])
    s.add_argument("--state", required=True, help="snapshot to decompose")
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--out-csv", default=None)
    s.set_defaults(func=cmd_modulate)

    s = subs.add_parser("shoot", help="backward shooting for N-soliton data")
    _add_common(s, ["p", "lam", "betas", "shifts", "s0", "t0", "n",
                    "length", "dt", "budget", "aim_tol"])
    s.set_defaults(func=cmd_shoot)

    s = subs.add_parser("sweep", help="parameter sweep of shooting runs")
    _add_common(s, ["p", "lam", "betas", "shifts", "s0", "t0", "n",
                    "length", "dt", "budget", "aim_tol"])
    s.add_argument("--axis", action="append", default=None,
                   metavar="name=v1;v2;...",
                   help="sweep axis (repeatable)")
    s.add_argument("--mode", choices=("cross", "zip"), default="cross")
    s.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
