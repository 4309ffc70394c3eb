"""Split-operator (Strang) propagation of scalar wavefunctions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import Grid, WaveFunction, check_boundary, inner, integrate


@dataclass(frozen=True)
class Potential:
    """Real potential evaluated on grid meshes, ``func(mesh, t) -> array``."""

    name: str
    func: Callable[[tuple[np.ndarray, ...], float], np.ndarray] = field(repr=False)
    time_dependent: bool = False
    params: dict = field(default_factory=dict)

    def __call__(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        v = np.broadcast_to(np.asarray(self.func(grid.mesh(), t), dtype=float), grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"potential {self.name!r} is not finite on the grid")
        return v


def free() -> Potential:
    return Potential("free", lambda mesh, t: 0.0)


def harmonic(omega: float = 1.0, mass: float = 1.0, center=0.0) -> Potential:
    def f(mesh, t):
        c = np.broadcast_to(np.asarray(center, dtype=float), (len(mesh),))
        return 0.5 * mass * omega**2 * sum((x - ci) ** 2 for x, ci in zip(mesh, c))

    return Potential("harmonic", f, params={"omega": omega, "mass": mass, "center": center})


def linear(force) -> Potential:
    """``V = -F . x``: a constant force ``F``."""

    def f(mesh, t):
        F = np.broadcast_to(np.asarray(force, dtype=float), (len(mesh),))
        return -sum(Fi * x for Fi, x in zip(F, mesh))

    return Potential("linear", f, params={"force": force})


def from_array(values: np.ndarray, name: str = "array") -> Potential:
    arr = np.asarray(values, dtype=float)
    return Potential(name, lambda mesh, t: arr)


def _as_potential(V) -> Potential:
    if V is None:
        return free()
    if isinstance(V, Potential):
        return V
    return from_array(V)


def kinetic_phase(grid: Grid, dt: float, hbar: float, masses) -> np.ndarray:
    ksq = sum(k**2 / (2 * m) for k, m in zip(grid.kmesh(), masses))
    return np.exp(-1j * hbar * ksq * dt)


def step_split_operator(psi: WaveFunction, V, dt: float) -> WaveFunction:
    """One Strang step: half potential, full kinetic in Fourier space, half potential.

    A negative ``dt`` steps backwards in time.  Time-dependent potentials are
    sampled at the midpoint of the step.
    """
    if dt == 0 or not math.isfinite(dt):
        raise ValueError("dt must be a nonzero finite number")
    pot = _as_potential(V)
    v = pot(psi.grid, psi.time + dt / 2)
    half = np.exp(-0.5j * v * dt / psi.hbar)
    kin = kinetic_phase(psi.grid, dt, psi.hbar, psi.masses)
    out = half * np.fft.ifftn(kin * np.fft.fftn(half * psi.values))
    return psi.replace(values=out, time=psi.time + dt)


@dataclass(frozen=True)
class EvolutionRecord:
    """Snapshots ``values[i]`` at ``times[i]`` on a uniform time lattice."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray = field(repr=False)
    dt: float
    stride: int
    potential: Potential
    hbar: float = 1.0
    mass: float | tuple = 1.0

    def __post_init__(self):
        for name in ("times", "values"):
            a = np.array(getattr(self, name), copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def snapshot_dt(self) -> float:
        return self.dt * self.stride

    def snapshot(self, i: int) -> WaveFunction:
        return WaveFunction(self.grid, self.values[i], float(self.times[i]), self.hbar, self.mass)


def n_steps(T: float, dt: float) -> int:
    k = T / dt
    if k < -1e-12 or abs(k - round(k)) > 1e-8 * max(1.0, abs(k)):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return int(round(k))


def evolve(psi0: WaveFunction, V, T: float, dt: float, stride: int = 1) -> EvolutionRecord:
    """Propagate ``psi0`` to ``T`` keeping every ``stride``-th step.

    Thinning the stride lowers the accuracy of anything that interpolates
    between snapshots (trajectory integration is linear in time).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    k = n_steps(T, dt)
    if k % stride:
        raise ValueError(f"stride {stride} does not divide the {k} steps")
    pot = _as_potential(V)
    grid = psi0.grid
    kin = kinetic_phase(grid, dt, psi0.hbar, psi0.masses)
    static_half = None if pot.time_dependent else np.exp(-0.5j * pot(grid) * dt / psi0.hbar)

    vals = psi0.values.copy()
    snaps = [vals.copy()]
    times = [psi0.time]
    watch_edges = check_boundary(vals, grid)
    for s in range(1, k + 1):
        t_mid = psi0.time + (s - 0.5) * dt
        half = static_half if static_half is not None else np.exp(-0.5j * pot(grid, t_mid) * dt / psi0.hbar)
        vals = half * np.fft.ifftn(kin * np.fft.fftn(half * vals))
        if s % stride == 0:
            snaps.append(vals.copy())
            times.append(psi0.time + s * dt)
            if watch_edges:
                watch_edges = check_boundary(vals, grid)
    return EvolutionRecord(grid, np.array(times), np.array(snaps), dt, stride, pot, psi0.hbar, psi0.mass)


def energy(psi: WaveFunction, V=None) -> float:
    """<H> with the kinetic part evaluated exactly in Fourier space."""
    grid = psi.grid
    vhat = np.fft.fftn(psi.values)
    ksq = sum(k**2 / (2 * m) for k, m in zip(grid.kmesh(), psi.masses))
    # Parseval: sum |psi|^2 dV == sum |psi_hat|^2 dV / N
    kinetic = psi.hbar**2 * math.fsum((ksq * np.abs(vhat) ** 2).ravel()) * grid.cell_volume / vhat.size
    pot = _as_potential(V)(grid, psi.time)
    return kinetic + float(integrate(pot * np.abs(psi.values) ** 2, grid))


def fidelity(a: WaveFunction | np.ndarray, b: WaveFunction | np.ndarray, grid: Grid | None = None) -> float:
    """|<a|b>|^2 for normalized fields."""
    return abs(inner(a, b, grid)) ** 2
