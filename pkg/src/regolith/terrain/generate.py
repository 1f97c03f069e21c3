"""Seeded generation of smooth initial elevation maps.

Reference scenarios start from a superposition of a few long-wavelength
cosine waves with seeded random phases, optionally with a ridge feature
separating two regions (used for the sloped haul variant).
"""

from __future__ import annotations

import math

import numpy as np

from .heightfield import Heightfield


def generate_heightfield(nx: int, ny: int, cell_size: float,
                         origin=(0.0, 0.0), amplitude: float = 0.05,
                         wavelength: float = 8.0, seed: int = 0,
                         base_height: float = 1.0,
                         ridge: dict | None = None) -> Heightfield:
    """Smooth seeded terrain.

    ridge, when given, is {"x": center, "height": h, "half_width": w} and
    adds a cosine-profile ridge running along y at the given x.
    """
    rng = np.random.default_rng(seed)
    xs = (np.arange(nx) + 0.5) * cell_size + origin[0]
    ys = (np.arange(ny) + 0.5) * cell_size + origin[1]
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    elev = np.full((nx, ny), float(base_height))
    for _ in range(4):
        kx = rng.uniform(0.5, 1.5) * 2 * math.pi / wavelength
        ky = rng.uniform(0.5, 1.5) * 2 * math.pi / wavelength
        phase_x = rng.uniform(0, 2 * math.pi)
        phase_y = rng.uniform(0, 2 * math.pi)
        elev += (amplitude / 4.0) * np.cos(gx * kx + phase_x) \
            * np.cos(gy * ky + phase_y)
    if ridge:
        cx = float(ridge["x"])
        height = float(ridge["height"])
        half_width = float(ridge["half_width"])
        dist = np.abs(gx - cx)
        profile = np.where(dist < half_width,
                           0.5 * (1 + np.cos(math.pi * dist / half_width)),
                           0.0)
        elev += height * profile
    return Heightfield(nx, ny, cell_size, origin, elev)
