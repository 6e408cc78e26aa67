"""
Discrete function spaces: uniform periodic grid, inner products, energy norm,
spectral differentiation, and the binary snapshot format shared by all modules.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

SNAPSHOT_MAGIC = b"NLKG1"


class GridMismatchError(ValueError):
    """Two fields living on different grids were combined."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """
    Uniform periodic 1-D mesh on [x0, x0 + length), nodes x_k = x0 + k*dx.

    n must be a power of two (>= 16) so FFT sizes stay fast and predictable.
    """

    n: int
    length: float
    x0: float = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not _is_power_of_two(self.n) or self.n < 16:
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if self.x0 is None:
            object.__setattr__(self, "x0", -0.5 * self.length)

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        """Fourier wavenumbers matching np.fft.fft ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def wrap(self, xi: np.ndarray | float) -> np.ndarray:
        """Wrap coordinates into [-length/2, length/2) relative displacement."""
        half = 0.5 * self.length
        return (np.asarray(xi) + half) % self.length - half


@dataclass
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid n={self.grid.n}"
            )

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class FieldPair:
    """A state U = (u, du/dt); both components on the same grid."""

    first: ScalarField
    second: ScalarField

    def __post_init__(self) -> None:
        if self.first.grid != self.second.grid:
            raise GridMismatchError("FieldPair components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.first.grid

    def copy(self) -> "FieldPair":
        return FieldPair(self.first.copy(), self.second.copy())

    @staticmethod
    def from_arrays(grid: Grid, u: np.ndarray, ut: np.ndarray) -> "FieldPair":
        return FieldPair(ScalarField(grid, u), ScalarField(grid, ut))


def _check_same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")


def inner_l2(f: ScalarField, g: ScalarField) -> float:
    """(f|g) = integral f*g, rectangle rule (spectrally accurate, periodic)."""
    _check_same_grid(f, g)
    return float(f.grid.dx * np.dot(f.values, g.values))


def inner_pair(U: FieldPair, V: FieldPair) -> float:
    """<U|V> = (u1|v1) + (u2|v2)."""
    _check_same_grid(U, V)
    return inner_l2(U.first, V.first) + inner_l2(U.second, V.second)


def deriv_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Spectral first derivative of raw samples."""
    k = 2.0 * np.pi * np.fft.rfftfreq(grid.n, d=grid.dx)
    fk = np.fft.rfft(values)
    fk *= 1j * k
    fk[-1] = 0.0  # Nyquist mode has no well-defined odd derivative
    return np.fft.irfft(fk, n=grid.n)


def deriv2_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Spectral second derivative of raw samples."""
    k = 2.0 * np.pi * np.fft.rfftfreq(grid.n, d=grid.dx)
    fk = np.fft.rfft(values)
    fk *= -(k * k)
    return np.fft.irfft(fk, n=grid.n)


def deriv(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, deriv_values(f.grid, f.values))


def deriv2(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, deriv2_values(f.grid, f.values))


def translate_values(grid: Grid, values: np.ndarray, shift: float) -> np.ndarray:
    """Sample f(x - shift) from samples of f, via the Fourier phase shift."""
    k = 2.0 * np.pi * np.fft.rfftfreq(grid.n, d=grid.dx)
    fk = np.fft.rfft(values) * np.exp(-1j * k * shift)
    return np.fft.irfft(fk, n=grid.n)


def translate(f: ScalarField, shift: float) -> ScalarField:
    return ScalarField(f.grid, translate_values(f.grid, f.values, shift))


def translate_pair(U: FieldPair, shift: float) -> FieldPair:
    return FieldPair(translate(U.first, shift), translate(U.second, shift))


def norm_l2(f: ScalarField) -> float:
    return float(np.sqrt(max(inner_l2(f, f), 0.0)))


def norm_energy(U: FieldPair) -> float:
    """Energy norm: sqrt(||u1||_H1^2 + ||u2||_L2^2), derivative spectral."""
    du = deriv(U.first)
    s = inner_l2(U.first, U.first) + inner_l2(du, du) + inner_l2(U.second, U.second)
    return float(np.sqrt(max(s, 0.0)))


def pair_axpy(U: FieldPair, alpha: float, V: FieldPair) -> FieldPair:
    """U + alpha * V as a new pair."""
    _check_same_grid(U, V)
    return FieldPair.from_arrays(
        U.grid,
        U.first.values + alpha * V.first.values,
        U.second.values + alpha * V.second.values,
    )


def pair_sub(U: FieldPair, V: FieldPair) -> FieldPair:
    return pair_axpy(U, -1.0, V)


def save_snapshot(path, U: FieldPair) -> None:
    """Binary snapshot: magic 'NLKG1', uint64 n, then f64 LE x0, dx, u, du/dt."""
    g = U.grid
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<Q", g.n))
        fh.write(struct.pack("<d", g.x0))
        fh.write(struct.pack("<d", g.dx))
        fh.write(U.first.values.astype("<f8").tobytes())
        fh.write(U.second.values.astype("<f8").tobytes())


def load_snapshot(path) -> FieldPair:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        (n,) = struct.unpack("<Q", fh.read(8))
        (x0,) = struct.unpack("<d", fh.read(8))
        (dx,) = struct.unpack("<d", fh.read(8))
        u = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
        ut = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
    grid = Grid(n=int(n), length=float(n * dx), x0=float(x0))
    return FieldPair.from_arrays(grid, u, ut)
