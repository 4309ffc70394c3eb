"""Guidance velocity fields, trajectory ensembles and their consistency checks.

Trajectories are integrated with classical RK4 against the snapshots of an
:class:`~bohmsim.schrodinger.EvolutionRecord`.  Between snapshots the velocity
field is interpolated linearly in time; off-grid it is interpolated
(bi)linearly in space.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import (Grid, WaveFunction, cell_edges_cdf, density, expectation_position, sample_density,
                   spectral_gradient)
from .schrodinger import EvolutionRecord, evolve, _as_potential

COMPLETE, NODE_REGULARIZED, BOUNDARY_EXIT = 0, 1, 2
STATUS_NAMES = {COMPLETE: "complete", NODE_REGULARIZED: "node-regularized", BOUNDARY_EXIT: "boundary-exit"}

EPS_NODE = 1e-12
CHUNK = 4096


@dataclass(frozen=True)
class VelocityFieldSample:
    grid: Grid
    time: float
    values: np.ndarray = field(repr=False)  # (dims, *shape)
    mask: np.ndarray = field(repr=False)  # True on node cells


def regularize(v: np.ndarray, mask: np.ndarray, v_max: float | None) -> np.ndarray:
    """Replace masked cells by their nearest unmasked neighbour, capped at ``v_max``."""
    if not mask.any():
        return v
    out = v.copy()
    if mask.all():
        out[:] = 0.0
        return out
    idx = ndimage.distance_transform_edt(mask, return_distances=False, return_indices=True)
    for i in range(v.shape[0]):
        filled = v[i][tuple(idx)]
        if v_max is not None:
            filled = np.clip(filled, -v_max, v_max)
        out[i][mask] = filled[mask]
    return out


def node_mask(rho: np.ndarray, eps_node: float = EPS_NODE, scale: float | None = None) -> np.ndarray:
    scale = rho.max() if scale is None else scale
    return rho < eps_node * scale


def current_velocity(values: np.ndarray, grid: Grid, hbar: float, masses) -> tuple[np.ndarray, np.ndarray]:
    """Raw ``(hbar/m) Im(psi* grad psi) / |psi|^2`` (unregularized) and ``|psi|^2``."""
    grad = spectral_gradient(values, grid)
    rho = np.abs(values) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.stack([hbar / m * np.imag(np.conj(values) * g) / rho for g, m in zip(grad, masses)])
    return v, rho


def velocity_field(psi: WaveFunction, eps_node: float = EPS_NODE, v_max: float | None = None) -> VelocityFieldSample:
    v, rho = current_velocity(psi.values, psi.grid, psi.hbar, psi.masses)
    mask = node_mask(rho, eps_node)
    return VelocityFieldSample(psi.grid, psi.time, regularize(v, mask, v_max), mask)


class FieldSeries:
    """Velocity fields on the snapshot lattice, ``values[s, c, axis, *grid]``.

    ``c`` indexes independent guidance components (one for scalar fields,
    one per spin branch for spinors).
    """

    def __init__(self, grid: Grid, times: np.ndarray, values: np.ndarray, masks: np.ndarray):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        self.values = values
        self.masks = masks
        self._lo = np.array(grid.lower)
        self._dx = np.array(grid.spacing)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def _space(self, s: int, comp: np.ndarray, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        f = (pts - self._lo) / self._dx
        i0 = np.floor(f).astype(np.int64)
        w = f - i0
        F, M = self.values[s], self.masks[s]
        if self.grid.dims == 1:
            (n,) = self.grid.shape
            a = i0[:, 0] % n
            b = (a + 1) % n
            wa = w[:, :1]
            v = (1 - wa) * F[comp, :, a] + wa * F[comp, :, b]
            touched = M[comp, a] | M[comp, b]
            return v, touched
        nx, ny = self.grid.shape
        ax, ay = i0[:, 0] % nx, i0[:, 1] % ny
        bx, by = (ax + 1) % nx, (ay + 1) % ny
        wx, wy = w[:, :1], w[:, 1:2]
        v = ((1 - wx) * (1 - wy) * F[comp, :, ax, ay] + wx * (1 - wy) * F[comp, :, bx, ay]
             + (1 - wx) * wy * F[comp, :, ax, by] + wx * wy * F[comp, :, bx, by])
        touched = M[comp, ax, ay] | M[comp, bx, ay] | M[comp, ax, by] | M[comp, bx, by]
        return v, touched

    def __call__(self, s: float, pts: np.ndarray, comp: np.ndarray | int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Velocity at fractional snapshot coordinate ``s``."""
        comp = np.broadcast_to(np.asarray(comp, dtype=np.int64), (len(pts),))
        last = len(self.times) - 1
        i = min(int(math.floor(s)), max(last - 1, 0))
        w = s - i
        v, touched = self._space(i, comp, pts)
        if w > 0 and last > 0:
            v1, t1 = self._space(i + 1, comp, pts)
            v = (1 - w) * v + w * v1
            touched = touched | t1
        return v, touched


def series_from_record(record: EvolutionRecord, eps_node: float = EPS_NODE, v_max: float | None = None) -> FieldSeries:
    if v_max is None:
        v_max = default_v_max(record.grid, record.times)
    m = record.snapshot(0).masses
    vals = np.empty((len(record), 1, record.grid.dims) + record.grid.shape)
    masks = np.empty((len(record), 1) + record.grid.shape, dtype=bool)
    for s in range(len(record)):
        v, rho = current_velocity(record.values[s], record.grid, record.hbar, m)
        masks[s, 0] = node_mask(rho, eps_node)
        vals[s, 0] = regularize(v, masks[s, 0], v_max)
    return FieldSeries(record.grid, record.times, vals, masks)


def default_v_max(grid: Grid, times: np.ndarray) -> float:
    span = float(times[-1] - times[0]) if len(times) > 1 else 0.0
    return 10 * max(grid.extent) / span if span > 0 else math.inf


def rk4_paths(series: FieldSeries, x0: np.ndarray, substeps: int = 1, comp=0) -> tuple[np.ndarray, np.ndarray]:
    """Integrate ``dx/dt = v(x, t)`` from every row of ``x0``.

    Returns positions on the snapshot lattice, shape ``(nsnap, n, dims)`` with
    NaN after a boundary exit, and status codes, shape ``(n,)``.
    """
    x = np.array(x0, dtype=float, copy=True)
    n = len(x)
    nsnap = len(series.times)
    out = np.full((nsnap, n, series.grid.dims), np.nan)
    out[0] = x
    status = np.zeros(n, dtype=np.int8)
    alive = series.grid.contains(x)
    status[~alive] = BOUNDARY_EXIT
    h = series.dt / substeps
    ds = 1.0 / substeps
    for s in range(nsnap - 1):
        for sub in range(substeps):
            s0 = s + sub * ds
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            xa = x[idx]
            ca = np.broadcast_to(comp, (n,))[idx]
            k1, t1 = series(s0, xa, ca)
            k2, t2 = series(s0 + ds / 2, xa + h / 2 * k1, ca)
            k3, t3 = series(s0 + ds / 2, xa + h / 2 * k2, ca)
            k4, t4 = series(s0 + ds, xa + h * k3, ca)
            xn = xa + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            touched = t1 | t2 | t3 | t4
            st = status[idx]
            st[touched & (st == COMPLETE)] = NODE_REGULARIZED
            gone = ~series.grid.contains(xn)
            st[gone] = BOUNDARY_EXIT
            status[idx] = st
            keep = idx[~gone]
            x[keep] = xn[~gone]
            alive[idx[gone]] = False
        out[s + 1][alive] = x[alive]
    return out, status


def _chunked(fn, x0: np.ndarray, threads: int, *args):
    """Apply ``fn(chunk, i, *args)`` over fixed-size chunks; chunking never depends on ``threads``."""
    chunks = [x0[i:i + CHUNK] for i in range(0, len(x0), CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: fn(a[1], a[0], *args), enumerate(chunks)))
    else:
        parts = [fn(c, i, *args) for i, c in enumerate(chunks)]
    return parts


@dataclass(frozen=True)
class Trajectory:
    x0: np.ndarray
    times: np.ndarray
    positions: np.ndarray  # (len(times), dims)
    status: str = "complete"


def integrate_trajectories(record: EvolutionRecord, x0, v_max: float | None = None, eps_node: float = EPS_NODE,
                           substeps: int = 1, threads: int = 1, series: FieldSeries | None = None):
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    if x0.shape[1] != record.grid.dims:
        x0 = x0.reshape(-1, record.grid.dims)
    series = series or series_from_record(record, eps_node, v_max)
    parts = _chunked(lambda c, i: rk4_paths(series, c, substeps), x0, threads)
    return np.concatenate([p[0] for p in parts], axis=1), np.concatenate([p[1] for p in parts])


def integrate_trajectory(record: EvolutionRecord, x0, v_max: float | None = None, eps_node: float = EPS_NODE,
                         substeps: int = 1) -> Trajectory:
    x0 = np.asarray(x0, dtype=float).reshape(1, record.grid.dims)
    if not record.grid.contains(x0)[0]:
        raise ValueError(f"initial point {x0[0]} is outside the grid")
    pos, status = integrate_trajectories(record, x0, v_max, eps_node, substeps)
    return Trajectory(x0[0], record.times, pos[:, 0], STATUS_NAMES[int(status[0])])


@dataclass(frozen=True)
class Ensemble:
    seed: int
    initial: np.ndarray  # (n, dims)
    times: np.ndarray
    positions: np.ndarray = field(repr=False)  # (nsnap, n, dims)
    status: np.ndarray = field(repr=False)  # (n,) int codes
    record: EvolutionRecord = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.initial)

    @property
    def flagged(self) -> np.ndarray:
        return self.status != COMPLETE

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(self.initial[i], self.times, self.positions[:, i], STATUS_NAMES[int(self.status[i])])

    @property
    def trajectories(self) -> list[Trajectory]:
        return [self.trajectory(i) for i in range(self.n)]

    def flag_counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.status == code)) for code, name in STATUS_NAMES.items()}


def ensemble_from_record(record: EvolutionRecord, n: int, seed: int, v_max: float | None = None,
                         eps_node: float = EPS_NODE, substeps: int = 1, threads: int = 1) -> Ensemble:
    x0 = sample_density(density(record.snapshot(0)), n, seed)
    pos, status = integrate_trajectories(record, x0, v_max, eps_node, substeps, threads)
    return Ensemble(seed, x0, record.times, pos, status, record)


def run_ensemble(psi0: WaveFunction, V, T: float, dt: float, n: int, seed: int, stride: int = 1,
                 substeps: int = 1, v_max: float | None = None, eps_node: float = EPS_NODE,
                 threads: int = 1) -> Ensemble:
    """Evolve ``psi0`` once, draw ``n`` starts from ``|psi0|^2`` and guide them all."""
    record = evolve(psi0, V, T, dt, stride)
    return ensemble_from_record(record, n, seed, v_max, eps_node, substeps, threads)


# -- statistics -----------------------------------------------------------------------

def fsum_mean(a: np.ndarray) -> float:
    a = a[np.isfinite(a)]
    return math.fsum(a) / len(a) if len(a) else math.nan


def ensemble_moments(samples: np.ndarray) -> tuple[float, float]:
    """Order-independent mean and standard error of a 1D sample (NaNs dropped)."""
    a = samples[np.isfinite(samples)]
    mean = math.fsum(a) / len(a)
    var = math.fsum((a - mean) ** 2) / max(len(a) - 1, 1)
    return mean, math.sqrt(var / len(a))


@dataclass(frozen=True)
class ExpectationCheck:
    times: np.ndarray
    discrepancy: np.ndarray  # (nsnap, dims)
    bound: np.ndarray  # 3 standard errors, (nsnap, dims)
    budget: float

    @property
    def passed(self) -> bool:
        return bool(np.all(self.discrepancy <= self.bound + self.budget))

    @property
    def worst_ratio(self) -> float:
        return float(np.max(self.discrepancy / (self.bound + self.budget)))


def check_expectation(ensemble: Ensemble, record: EvolutionRecord | None = None, budget: float = 1e-3,
                      n_se: float = 3.0) -> ExpectationCheck:
    """|mean_i x_i(t) - <psi(t)|X|psi(t)>| per snapshot and axis."""
    record = record or ensemble.record
    nsnap, _, dims = ensemble.positions.shape
    disc = np.empty((nsnap, dims))
    bound = np.empty((nsnap, dims))
    for s in range(nsnap):
        exact = expectation_position(record.snapshot(s))
        for d in range(dims):
            mean, se = ensemble_moments(ensemble.positions[s, :, d])
            disc[s, d] = abs(mean - exact[d])
            bound[s, d] = n_se * se
    return ExpectationCheck(ensemble.times, disc, bound, budget)


def binned_tv(samples: np.ndarray, rho: np.ndarray, grid: Grid, bins: int = 64) -> float:
    """Total-variation distance between a 1D sample histogram and a gridded density.

    Bins span the region holding all but 1e-9 of the density's mass, widened to
    cover every sample.
    """
    edges, cdf = cell_edges_cdf(rho, grid)
    cdf = cdf / cdf[-1]
    lo = np.interp(1e-9, cdf, edges)
    hi = np.interp(1 - 1e-9, cdf, edges)
    samples = samples[np.isfinite(samples)]
    lo, hi = min(lo, samples.min()), max(hi, samples.max())
    bin_edges = np.linspace(lo, hi, bins + 1)
    bin_edges[-1] = np.nextafter(hi, np.inf)
    counts, _ = np.histogram(samples, bin_edges)
    p_emp = counts / len(samples)
    p_true = np.diff(np.interp(bin_edges, edges, cdf))
    return 0.5 * math.fsum(np.abs(p_emp - p_true))


def check_equivariance(ensemble: Ensemble, psi_T: WaveFunction | None = None, bins: int = 64,
                       index: int = -1) -> float:
    """TV distance between endpoint histogram and ``|psi_T|^2`` (max over axis marginals)."""
    psi_T = psi_T or ensemble.record.snapshot(index)
    if psi_T.time not in ensemble.times:
        raise ValueError(f"ensemble has no sample at t={psi_T.time}")
    s = int(np.flatnonzero(ensemble.times == psi_T.time)[0])
    rho = np.abs(psi_T.values) ** 2
    grid = psi_T.grid
    tvs = []
    for d in range(grid.dims):
        marg = rho.sum(axis=tuple(a for a in range(grid.dims) if a != d)) * grid.cell_volume / grid.spacing[d]
        g1 = Grid((grid.points[d],), (grid.extent[d],))
        tvs.append(binned_tv(ensemble.positions[s, :, d], marg, g1, bins))
    return max(tvs)


def order_inversions(positions: np.ndarray, status: np.ndarray) -> int:
    """Adjacent order inversions (1D) among unflagged trajectories over all snapshots."""
    good = status == COMPLETE
    x = positions[:, good, 0]
    order = np.argsort(x[0], kind="stable")
    x = x[:, order]
    return int(np.sum(np.diff(x, axis=1) <= 0))


# -- local expectation values -------------------------------------------------------

def apply_operator(op: str, psi: WaveFunction, V=None, axis: int = 0) -> np.ndarray:
    grid = psi.grid
    if op == "momentum":
        return -1j * psi.hbar * spectral_gradient(psi.values, grid)[axis]
    kinetic = np.zeros(grid.shape, dtype=complex)
    vhat = np.fft.fftn(psi.values)
    for k, m in zip(grid.kmesh(), psi.masses):
        kinetic += np.fft.ifftn(psi.hbar**2 * k**2 / (2 * m) * vhat)
    if op == "kinetic":
        return kinetic
    if op == "hamiltonian":
        return kinetic + _as_potential(V)(grid, psi.time) * psi.values
    raise ValueError(f"unknown operator {op!r}; expected momentum, kinetic or hamiltonian")


def local_expectation(op: str, psi: WaveFunction, V=None, axis: int = 0,
                      eps_node: float = EPS_NODE) -> np.ma.MaskedArray:
    """Symmetrized local value ``Re[psi* (A psi)] / |psi|^2`` with node cells masked."""
    a_psi = apply_operator(op, psi, V, axis)
    rho = np.abs(psi.values) ** 2
    mask = node_mask(rho, eps_node)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = 0.5 * (np.conj(psi.values) * a_psi + np.conj(a_psi) * psi.values).real / rho
    return np.ma.masked_array(vals, mask=mask | ~np.isfinite(vals))


def sample_field(values: np.ndarray, grid: Grid, pts: np.ndarray) -> np.ndarray:
    """(Bi)linear interpolation of a scalar field at points ``(n, dims)``."""
    series = FieldSeries(grid, np.zeros(1), np.asarray(values, dtype=float)[None, None, None],
                         np.zeros((1, 1) + grid.shape, dtype=bool))
    return series._space(0, np.zeros(len(pts), dtype=np.int64), np.asarray(pts, dtype=float))[0][:, 0]


__all__ = [
    "VelocityFieldSample", "velocity_field", "Trajectory", "Ensemble", "integrate_trajectory",
    "integrate_trajectories", "run_ensemble", "ensemble_from_record", "check_expectation",
    "check_equivariance", "local_expectation", "order_inversions", "binned_tv",
]
