"""Analytic initial states used by scenarios and tests.

Widths are position standard deviations of ``|psi|^2``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .grid import Grid, WaveFunction, normalize


def gaussian_values(grid: Grid, center, width, momentum=0.0, hbar: float = 1.0) -> np.ndarray:
    """Unnormalized product Gaussian ``exp(-(x-c)^2 / 4 s^2 + i p x / hbar)``."""
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dims,))
    width = np.broadcast_to(np.asarray(width, dtype=float), (grid.dims,))
    momentum = np.broadcast_to(np.asarray(momentum, dtype=float), (grid.dims,))
    out = np.ones(grid.shape, dtype=complex)
    for x, c, s, p in zip(grid.mesh(), center, width, momentum):
        out = out * np.exp(-((x - c) ** 2) / (4 * s**2) + 1j * p * x / hbar)
    return out


def gaussian(grid: Grid, center=0.0, width=1.0, momentum=0.0, hbar: float = 1.0, mass=1.0) -> WaveFunction:
    return normalize(WaveFunction(grid, gaussian_values(grid, center, width, momentum, hbar), 0.0, hbar, mass))


def plane_wave(grid: Grid, mode: int | Sequence[int] = 1, hbar: float = 1.0, mass=1.0) -> WaveFunction:
    """Plane wave whose wavenumber sits exactly on the dual lattice."""
    modes = np.broadcast_to(np.asarray(mode), (grid.dims,))
    phase = sum(2 * np.pi * m / L * x for m, L, x in zip(modes, grid.extent, grid.mesh()))
    return normalize(WaveFunction(grid, np.exp(1j * phase), 0.0, hbar, mass))


def plane_wave_k(grid: Grid, mode: int | Sequence[int] = 1) -> np.ndarray:
    modes = np.broadcast_to(np.asarray(mode), (grid.dims,))
    return np.array([2 * np.pi * m / L for m, L in zip(modes, grid.extent)])


def harmonic_ground(grid: Grid, omega: float = 1.0, hbar: float = 1.0, mass: float = 1.0, center=0.0) -> WaveFunction:
    return gaussian(grid, center, np.sqrt(hbar / (2 * mass * omega)), 0.0, hbar, mass)


def coherent_state(grid: Grid, amplitude: float, omega: float = 1.0, hbar: float = 1.0, mass: float = 1.0,
                   momentum: float = 0.0) -> WaveFunction:
    """Ground state displaced to ``amplitude``; its centre then follows the classical orbit."""
    return gaussian(grid, amplitude, np.sqrt(hbar / (2 * mass * omega)), momentum, hbar, mass)


def superposition(grid: Grid, centers, width, momenta=None, weights=None, hbar: float = 1.0,
                  mass=1.0) -> WaveFunction:
    """Normalized sum of Gaussian packets (e.g. a two-slit initial state)."""
    centers = list(centers)
    momenta = [0.0] * len(centers) if momenta is None else list(momenta)
    weights = [1.0] * len(centers) if weights is None else list(weights)
    vals = np.zeros(grid.shape, dtype=complex)
    for c, p, w in zip(centers, momenta, weights):
        g = gaussian_values(grid, c, width, p, hbar)
        vals += w * g / np.sqrt(np.sum(np.abs(g) ** 2) * grid.cell_volume)
    return normalize(WaveFunction(grid, vals, 0.0, hbar, mass))


def free_width(t, width: float, hbar: float = 1.0, mass: float = 1.0):
    """Position spread of a free minimum-uncertainty packet at time ``t``."""
    return width * np.sqrt(1 + (hbar * np.asarray(t) / (2 * mass * width**2)) ** 2)
