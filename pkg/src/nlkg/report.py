"""
Delimited output and figures. CSV dialect: comma separated, header row,
LF line endings, '.' decimal, 17 significant digits so binary64 values
round-trip exactly. Figures render through the Agg backend to files.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_profile(path, grid, arrays, labels, title="profile") -> None:
    """Overlay one or more sampled profiles against x."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for values, label in zip(arrays, labels):
        ax.plot(grid.x, values, label=label)
    ax.set_xlabel("x")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)


def plot_state(path, U, title="state") -> None:
    plot_profile(path, U.grid, [U.first.values, U.second.values],
                 ["u", "du/dt"], title=title)


def plot_diagnostics(path, times, series, labels, ylabel,
                     title="diagnostics", logy=False) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for values, label in zip(series, labels):
        if logy:
            ax.semilogy(times, np.abs(values), label=label)
        else:
            ax.plot(times, values, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    _save(fig, path)


def plot_spectrum(path, names, values, title="spectral constants") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(names)), values)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_title(title)
    _save(fig, path)


def plot_decay(path, times, norms, gamma0, title="residual decay") -> None:
    """log ||V(t)|| against the tube radius e^{-gamma0 t}."""
    fig, ax = plt.subplots(figsize=(7, 4))
    t = np.asarray(times)
    ax.semilogy(t, norms, label="||V(t)||")
    ax.semilogy(t, np.exp(-gamma0 * t), "--", label="tube radius")
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)
