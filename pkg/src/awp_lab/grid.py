"""Sampled transverse grids and complex fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid2D",
    "ScalarField",
    "PolarizedField",
    "GridMismatchError",
    "impulse",
    "plane_wave",
    "gaussian_beam",
]


class GridMismatchError(ValueError):
    """Two fields or a field and an element live on incompatible grids."""


@dataclass(frozen=True)
class Grid2D:
    """Uniform grid centered on the optical axis.

    Sample ``j`` along x sits at ``(j - nx // 2) * dx`` so the axis always
    falls on a pixel.  Arrays are indexed ``[iy, ix]`` (y-major).
    """

    nx: int
    ny: int
    dx: float
    dy: float

    def __post_init__(self):
        problems = []
        if int(self.nx) != self.nx or self.nx < 2:
            problems.append(f"nx must be an integer >= 2 (got {self.nx})")
        if int(self.ny) != self.ny or self.ny < 2:
            problems.append(f"ny must be an integer >= 2 (got {self.ny})")
        if not (np.isfinite(self.dx) and self.dx > 0):
            problems.append(f"dx must be positive (got {self.dx})")
        if not (np.isfinite(self.dy) and self.dy > 0):
            problems.append(f"dy must be positive (got {self.dy})")
        if problems:
            raise ValueError("; ".join(problems))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "dy", float(self.dy))

    @classmethod
    def square(cls, n: int, d: float) -> "Grid2D":
        return cls(n, n, d, d)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.dy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(X, Y)`` arrays of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y)

    def r2(self) -> np.ndarray:
        X, Y = self.mesh()
        return X * X + Y * Y

    @property
    def qx(self) -> np.ndarray:
        """Angular spatial frequencies in ``[-pi/dx, pi/dx)``, centered like ``x``."""
        return (np.arange(self.nx) - self.nx // 2) * (2 * np.pi / (self.nx * self.dx))

    @property
    def qy(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * (2 * np.pi / (self.ny * self.dy))

    def qmesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.qx, self.qy)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def index_of(self, x: float, y: float) -> tuple[int, int]:
        """``(iy, ix)`` of the pixel whose center is exactly at ``(x, y)``.

        Raises
        ------
        GridMismatchError
            If the point is outside the grid or not on a pixel center.
        """
        fx = x / self.dx + self.nx // 2
        fy = y / self.dy + self.ny // 2
        ix, iy = int(round(fx)), int(round(fy))
        if abs(fx - ix) > 1e-6 or abs(fy - iy) > 1e-6:
            raise GridMismatchError(f"point ({x:g}, {y:g}) is not on a pixel center")
        if not (0 <= ix < self.nx and 0 <= iy < self.ny):
            raise GridMismatchError(f"point ({x:g}, {y:g}) lies outside the grid")
        return iy, ix

    def position(self, iy: int, ix: int) -> tuple[float, float]:
        return ((ix - self.nx // 2) * self.dx, (iy - self.ny // 2) * self.dy)

    def scaled(self, factor_x: float, factor_y: float | None = None) -> "Grid2D":
        fy = factor_x if factor_y is None else factor_y
        return Grid2D(self.nx, self.ny, self.dx * factor_x, self.dy * fy)

    def same_as(self, other: "Grid2D", rtol: float = 1e-9) -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and abs(self.dx - other.dx) <= rtol * self.dx
            and abs(self.dy - other.dy) <= rtol * self.dy
        )


@dataclass(frozen=True)
class ScalarField:
    """Complex amplitude on a :class:`Grid2D` at vacuum wavelength ``lambda_vac``.

    Global constant factors are not tracked, so only relative amplitudes and
    phases carry meaning.  The ``amp`` array is made read-only so a field can
    be shared freely between threads.
    """

    grid: Grid2D
    amp: np.ndarray
    lambda_vac: float

    def __post_init__(self):
        a = np.array(self.amp, dtype=complex, copy=True)
        if a.shape != self.grid.shape:
            raise GridMismatchError(f"amplitude shape {a.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("field amplitude must be finite everywhere")
        if not (np.isfinite(self.lambda_vac) and self.lambda_vac > 0):
            raise ValueError(f"lambda_vac must be positive (got {self.lambda_vac})")
        a.setflags(write=False)
        object.__setattr__(self, "amp", a)
        object.__setattr__(self, "lambda_vac", float(self.lambda_vac))

    @property
    def k(self) -> float:
        """Vacuum wavenumber ``2 pi / lambda``."""
        return 2 * np.pi / self.lambda_vac

    def norm2(self) -> float:
        """``sum |amp|^2 dx dy``."""
        return float(np.sum(np.abs(self.amp) ** 2) * self.grid.cell_area)

    def intensity(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def with_amp(self, amp: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, amp, self.lambda_vac)

    def with_grid(self, grid: Grid2D) -> "ScalarField":
        return ScalarField(grid, self.amp, self.lambda_vac)

    def with_wavelength(self, lambda_vac: float) -> "ScalarField":
        return ScalarField(self.grid, self.amp, lambda_vac)

    def conj(self) -> "ScalarField":
        return self.with_amp(np.conj(self.amp))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        _check_compatible(self, other)
        return self.with_amp(self.amp + other.amp)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        _check_compatible(self, other)
        return self.with_amp(self.amp - other.amp)

    def __mul__(self, c) -> "ScalarField":
        return self.with_amp(self.amp * c)

    __rmul__ = __mul__

    def at(self, x: float, y: float) -> complex:
        iy, ix = self.grid.index_of(x, y)
        return complex(self.amp[iy, ix])


def _check_compatible(a: ScalarField, b: ScalarField) -> None:
    if not a.grid.same_as(b.grid):
        raise GridMismatchError("fields live on different grids")
    if abs(a.lambda_vac - b.lambda_vac) > 1e-12 * a.lambda_vac:
        raise GridMismatchError("fields have different wavelengths")


@dataclass(frozen=True)
class PolarizedField:
    """Pair of H and V scalar components on one grid and wavelength."""

    h: ScalarField
    v: ScalarField

    def __post_init__(self):
        _check_compatible(self.h, self.v)

    @property
    def grid(self) -> Grid2D:
        return self.h.grid

    @property
    def lambda_vac(self) -> float:
        return self.h.lambda_vac

    @classmethod
    def from_jones(cls, f: ScalarField, jones) -> "PolarizedField":
        ch, cv = complex(jones[0]), complex(jones[1])
        return cls(f * ch, f * cv)

    def project(self, jones) -> ScalarField:
        """Amplitude transmitted by an analyzer along Jones vector ``jones``."""
        ch, cv = complex(jones[0]), complex(jones[1])
        return self.h.with_amp(np.conj(ch) * self.h.amp + np.conj(cv) * self.v.amp)

    def components(self) -> dict[str, ScalarField]:
        return {"H": self.h, "V": self.v}

    def norm2(self) -> float:
        return self.h.norm2() + self.v.norm2()

    def intensity(self) -> np.ndarray:
        return self.h.intensity() + self.v.intensity()


def impulse(grid: Grid2D, x: float, y: float, lambda_vac: float) -> ScalarField:
    """Discrete delta at ``(x, y)``: one cell of amplitude ``1/(dx dy)``."""
    iy, ix = grid.index_of(x, y)
    a = np.zeros(grid.shape, dtype=complex)
    a[iy, ix] = 1.0 / grid.cell_area
    return ScalarField(grid, a, lambda_vac)


def plane_wave(grid: Grid2D, lambda_vac: float, amplitude: complex = 1.0) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, amplitude, dtype=complex), lambda_vac)


def gaussian_beam(grid: Grid2D, lambda_vac: float, waist: float, x0: float = 0.0, y0: float = 0.0) -> ScalarField:
    """Amplitude ``exp(-|rho - rho0|^2 / w^2)`` (the pump convention used throughout)."""
    X, Y = grid.mesh()
    return ScalarField(grid, np.exp(-((X - x0) ** 2 + (Y - y0) ** 2) / waist**2), lambda_vac)
