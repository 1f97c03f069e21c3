"""Uniform-grid elevation map and bulk soil parameters.

Cell values live at cell centers; queries bilinearly interpolate the four
surrounding centers.  All elevations are meters, masses are bank volume
times bank density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class SoilParams:
    """Bulk soil mechanics parameters plus local gravity."""

    internal_friction_angle: float = 0.80   # rad
    cohesion: float = 900.0                 # Pa
    dilatancy_angle: float = 0.23           # rad
    bank_density: float = 1580.0            # kg/m^3
    packing_fraction: float = 0.66
    compression_index: float = 0.11         # carried for reports, unused here
    gravity: float = 1.6                    # m/s^2

    def __post_init__(self):
        for name in ("internal_friction_angle", "cohesion", "dilatancy_angle",
                     "bank_density", "packing_fraction", "compression_index",
                     "gravity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"soil parameter {name} must be positive")
        if self.packing_fraction > 1.0:
            raise ValueError("packing_fraction must be in (0, 1]")

    @property
    def repose_tan(self) -> float:
        return math.tan(self.internal_friction_angle)

    def to_dict(self) -> dict:
        return {
            "internal_friction_angle": self.internal_friction_angle,
            "cohesion": self.cohesion,
            "dilatancy_angle": self.dilatancy_angle,
            "bank_density": self.bank_density,
            "packing_fraction": self.packing_fraction,
            "compression_index": self.compression_index,
            "gravity": self.gravity,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SoilParams":
        return cls(**data)


class OutOfBounds(ValueError):
    pass


class GridMismatch(ValueError):
    pass


class Heightfield:
    """nx-by-ny grid of elevations with world-frame origin at cell (0,0)."""

    def __init__(self, nx: int, ny: int, cell_size: float,
                 origin=(0.0, 0.0), elevation: np.ndarray | None = None):
        if nx < 2 or ny < 2:
            raise ValueError("grid needs at least 2x2 cells")
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.nx = nx
        self.ny = ny
        self.cell_size = float(cell_size)
        self.origin = (float(origin[0]), float(origin[1]))
        if elevation is None:
            self.elevation = np.zeros((nx, ny), dtype=np.float64)
        else:
            elevation = np.asarray(elevation, dtype=np.float64)
            if elevation.shape != (nx, ny):
                raise ValueError(f"elevation shape {elevation.shape} != ({nx},{ny})")
            if not np.all(np.isfinite(elevation)):
                raise ValueError("elevations must be finite")
            self.elevation = elevation.copy()
        # Cells touched since the last drain; feeds terrain-patch telemetry.
        self.dirty: set[tuple[int, int]] = set()

    # -- geometry ----------------------------------------------------------

    def copy(self) -> "Heightfield":
        return Heightfield(self.nx, self.ny, self.cell_size, self.origin,
                           self.elevation)

    def same_grid(self, other: "Heightfield") -> bool:
        return (self.nx == other.nx and self.ny == other.ny
                and self.cell_size == other.cell_size
                and self.origin == other.origin)

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + (i + 0.5) * self.cell_size,
                self.origin[1] + (j + 0.5) * self.cell_size)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        i = int(math.floor((x - self.origin[0]) / self.cell_size))
        j = int(math.floor((y - self.origin[1]) / self.cell_size))
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise OutOfBounds(f"({x:.3f}, {y:.3f}) outside grid")
        return i, j

    def in_bounds(self, x: float, y: float) -> bool:
        return (self.origin[0] <= x <= self.origin[0] + self.nx * self.cell_size
                and self.origin[1] <= y <= self.origin[1] + self.ny * self.cell_size)

    def mark_dirty(self, i: int, j: int) -> None:
        self.dirty.add((i, j))

    def drain_dirty(self) -> list[tuple[int, int]]:
        cells = sorted(self.dirty)
        self.dirty.clear()
        return cells

    # -- queries -----------------------------------------------------------

    def height_at(self, x: float, y: float) -> float:
        """Bilinear interpolation of the four surrounding cell centers."""
        if not self.in_bounds(x, y):
            raise OutOfBounds(f"({x:.3f}, {y:.3f}) outside grid")
        u = (x - self.origin[0]) / self.cell_size - 0.5
        v = (y - self.origin[1]) / self.cell_size - 0.5
        i0 = min(max(int(math.floor(u)), 0), self.nx - 2)
        j0 = min(max(int(math.floor(v)), 0), self.ny - 2)
        fu = min(max(u - i0, 0.0), 1.0)
        fv = min(max(v - j0, 0.0), 1.0)
        e = self.elevation
        return ((1 - fu) * (1 - fv) * e[i0, j0]
                + fu * (1 - fv) * e[i0 + 1, j0]
                + (1 - fu) * fv * e[i0, j0 + 1]
                + fu * fv * e[i0 + 1, j0 + 1])

    def gradient_at(self, x: float, y: float) -> tuple[float, float]:
        """Central-difference gradient at the containing cell (one-sided on
        the boundary)."""
        i, j = self.cell_of(x, y)
        e = self.elevation
        cs = self.cell_size
        i_lo, i_hi = max(i - 1, 0), min(i + 1, self.nx - 1)
        j_lo, j_hi = max(j - 1, 0), min(j + 1, self.ny - 1)
        gx = (e[i_hi, j] - e[i_lo, j]) / ((i_hi - i_lo) * cs)
        gy = (e[i, j_hi] - e[i, j_lo]) / ((j_hi - j_lo) * cs)
        return gx, gy

    def slope_at(self, x: float, y: float) -> float:
        gx, gy = self.gradient_at(x, y)
        return math.atan(math.hypot(gx, gy))

    def total_volume(self, datum: float = 0.0) -> float:
        return float(np.sum(self.elevation - datum)) * self.cell_size ** 2

    def total_mass(self, bank_density: float, datum: float = 0.0) -> float:
        return self.total_volume(datum) * bank_density

    # -- region arithmetic -------------------------------------------------

    def region_slice(self, region) -> tuple[slice, slice]:
        i0, j0, i1, j1 = region
        if not (0 <= i0 < i1 <= self.nx and 0 <= j0 < j1 <= self.ny):
            raise OutOfBounds(f"region {region} outside {self.nx}x{self.ny} grid")
        return slice(i0, i1), slice(j0, j1)

    def volume_to_target(self, target: "Heightfield", region=None) -> float:
        """Signed volume above the target over a cell region.

        Positive means material must be removed.
        """
        if not self.same_grid(target):
            raise GridMismatch("heightfield and target grids differ")
        if region is None:
            region = (0, 0, self.nx, 0 + self.ny)
        si, sj = self.region_slice(region)
        diff = self.elevation[si, sj] - target.elevation[si, sj]
        return float(np.sum(diff)) * self.cell_size ** 2

    def volume_to_target_abs(self, target: "Heightfield", region=None) -> float:
        """Total misplaced volume (absolute excess plus deficit)."""
        if not self.same_grid(target):
            raise GridMismatch("heightfield and target grids differ")
        if region is None:
            region = (0, 0, self.nx, self.ny)
        si, sj = self.region_slice(region)
        diff = np.abs(self.elevation[si, sj] - target.elevation[si, sj])
        return float(np.sum(diff)) * self.cell_size ** 2

    # -- I/O ---------------------------------------------------------------

    def save_text(self, path) -> None:
        """Header `nx ny cell_size origin_x origin_y`, then row-major
        elevations (one x-row per line)."""
        with open(path, "w") as fh:
            fh.write(f"{self.nx} {self.ny} {self.cell_size!r} "
                     f"{self.origin[0]!r} {self.origin[1]!r}\n")
            for i in range(self.nx):
                fh.write(" ".join(repr(float(v)) for v in self.elevation[i]) + "\n")

    @classmethod
    def load_text(cls, path) -> "Heightfield":
        text = Path(path).read_text().split("\n")
        header = text[0].split()
        if len(header) != 5:
            raise ValueError(f"bad heightfield header in {path}")
        nx, ny = int(header[0]), int(header[1])
        cell_size = float(header[2])
        origin = (float(header[3]), float(header[4]))
        values = []
        for line in text[1:]:
            if line.strip():
                values.append([float(v) for v in line.split()])
        elevation = np.array(values, dtype=np.float64)
        if elevation.shape != (nx, ny):
            raise ValueError(
                f"heightfield body {elevation.shape} does not match header "
                f"({nx}, {ny})")
        return cls(nx, ny, cell_size, origin, elevation)
