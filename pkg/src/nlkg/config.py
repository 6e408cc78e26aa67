"""
Run configuration: defaults, flat key = value config files, and validation.

Every CLI-settable knob lives on RunConfig so that config files, CLI flags,
and sweep axes all speak the same vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    p: int = 3
    lam: float = 1.0
    n: int = 4096
    length: float = 60.0
    dt: float = 0.005
    betas: tuple = (-0.3, 0.4)
    shifts: tuple = (0.0, 0.0)
    t0: float = 5.0
    s0: float = 15.0
    beta: float = 0.6          # single-soliton boost for spectrum/evolve paths
    record_every: int = 10
    cutoff_l: float = 8.0
    budget: int = 60
    aim_tol: float = 0.05
    workers: int = 1
    seed: int = 0
    out_dir: str = ""


def _parse_floats(s: str) -> tuple:
    return tuple(float(tok) for tok in str(s).split(",") if tok.strip() != "")


_FIELD_PARSERS = {
    "p": int,
    "lam": float,
    "n": int,
    "length": float,
    "dt": float,
    "betas": _parse_floats,
    "shifts": _parse_floats,
    "t0": float,
    "s0": float,
    "beta": float,
    "record_every": int,
    "cutoff_l": float,
    "budget": int,
    "aim_tol": float,
    "workers": int,
    "seed": int,
    "out_dir": str,
}

# accepted aliases for config keys / CLI flag spellings
_KEY_ALIASES = {"lambda": "lam", "cutoff_L": "cutoff_l"}


def parse_axis_value(name: str, raw: str):
    """Parse one sweep-axis value with the field's own parser."""
    key = _KEY_ALIASES.get(name, name)
    if key not in _FIELD_PARSERS:
        raise ConfigError(f"unknown config field '{name}'")
    return _FIELD_PARSERS[key](raw)


def validate(cfg: RunConfig):
    """Return (normalized config, notices); raise listing all violations."""
    problems = []
    notices = []
    if cfg.p < 2:
        problems.append(f"p must be >= 2, got {cfg.p}")
    if not cfg.lam > 0:
        problems.append(f"lambda must be positive, got {cfg.lam}")
    if cfg.n < 16 or (cfg.n & (cfg.n - 1)) != 0:
        problems.append(f"n must be a power of two >= 16, got {cfg.n}")
    if not cfg.length > 0:
        problems.append(f"length must be positive, got {cfg.length}")
    if not cfg.dt > 0:
        problems.append(f"dt must be positive, got {cfg.dt}")
    elif cfg.n >= 16 and cfg.length > 0 and cfg.dt > cfg.length / cfg.n:
        problems.append(
            f"dt = {cfg.dt:g} exceeds dx = {cfg.length / cfg.n:g}")
    betas = list(cfg.betas)
    shifts = list(cfg.shifts)
    if not betas:
        problems.append("betas must be non-empty")
    if any(not -1.0 < b < 1.0 for b in betas):
        problems.append(f"velocities must lie in (-1, 1), got {betas}")
    if len(set(betas)) != len(betas):
        problems.append(f"velocities must be distinct, got {betas}")
    elif betas != sorted(betas):
        order = np.argsort(betas)
        betas = [betas[i] for i in order]
        if len(shifts) == len(order):
            shifts = [shifts[i] for i in order]
        notices.append(f"velocities re-sorted ascending: {betas}")
    if len(shifts) != len(betas):
        problems.append(
            f"{len(shifts)} shifts for {len(betas)} velocities")
    if not cfg.t0 < cfg.s0:
        problems.append(f"need t0 < s0, got t0 = {cfg.t0}, s0 = {cfg.s0}")
    if not -1.0 < cfg.beta < 1.0:
        problems.append(f"beta must lie in (-1, 1), got {cfg.beta}")
    if cfg.record_every < 1:
        problems.append("record_every must be >= 1")
    if cfg.budget < 1:
        problems.append("budget must be >= 1")
    if not cfg.aim_tol > 0:
        problems.append("aim_tol must be positive")
    if cfg.workers < 1:
        problems.append("workers must be >= 1")
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
    return replace(cfg, betas=tuple(betas), shifts=tuple(shifts)), notices


def parse_config(path=None, overrides=None):
    """
    Build a RunConfig from an optional key = value file plus a dict of
    overrides (e.g. from CLI flags). Unknown keys are rejected with the
    line number; all validation violations are reported together.
    """
    values = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ConfigError(
                        f"{path}:{lineno}: expected 'key = value', got {text!r}")
                key, _, raw = text.partition("=")
                key = _KEY_ALIASES.get(key.strip(), key.strip())
                if key not in _FIELD_PARSERS:
                    raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
                try:
                    values[key] = _FIELD_PARSERS[key](raw.strip())
                except ValueError as exc:
                    raise ConfigError(
                        f"{path}:{lineno}: bad value for '{key}': {exc}"
                    ) from exc
    for key, val in (overrides or {}).items():
        key = _KEY_ALIASES.get(key, key)
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"unknown config field '{key}'")
        if val is not None:
            values[key] = _FIELD_PARSERS[key](val) if isinstance(val, str) else val
    cfg = RunConfig(**values)
    return validate(cfg)


def config_items(cfg: RunConfig):
    """(name, value) pairs in declaration order, for CSV headers."""
    out = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(repr(float(x)) for x in v)
        out.append((f.name, v))
    return out
