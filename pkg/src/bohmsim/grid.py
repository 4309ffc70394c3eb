"""Periodic grids, complex fields on them, and the basic field calculus.

Every solver in the package works on a uniform periodic lattice
``x_i = -L/2 + i * dx``.  Integrals are midpoint Riemann sums, with grid
point ``x_i`` standing for the cell ``[x_i - dx/2, x_i + dx/2)``.
Derivatives are spectral.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MIN_POINTS = 16


class BoundaryWarning(UserWarning):
    """The field is not negligible near the periodic boundary."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on ``[-L/2, L/2)`` per axis."""

    points: tuple[int, ...]
    extent: tuple[float, ...]

    def __post_init__(self):
        if len(self.points) != len(self.extent) or len(self.points) not in (1, 2):
            raise ValueError("grid must have 1 or 2 axes with matching points/extent")
        for n, L in zip(self.points, self.extent):
            if int(n) != n or n < MIN_POINTS:
                raise ValueError(f"grid too small: {n} points per axis (need >= {MIN_POINTS})")
            if not (L > 0 and math.isfinite(L)):
                raise ValueError(f"extent must be positive and finite, got {L}")

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.points)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for n, L in zip(self.points, self.extent))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def lower(self) -> tuple[float, ...]:
        return tuple(-L / 2 for L in self.extent)

    def axis(self, i: int = 0) -> np.ndarray:
        n, L = self.points[i], self.extent[i]
        return -L / 2 + np.arange(n) * (L / n)

    def wavenumbers(self, i: int = 0) -> np.ndarray:
        """Discrete Fourier dual of axis ``i``, in FFT order."""
        n, L = self.points[i], self.extent[i]
        return 2 * np.pi * np.fft.fftfreq(n, d=L / n)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[self.axis(i) for i in range(self.dims)], indexing="ij"))

    def kmesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[self.wavenumbers(i) for i in range(self.dims)], indexing="ij"))

    def k_squared(self) -> np.ndarray:
        return sum(k**2 for k in self.kmesh())

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Boolean mask of points (shape ``(..., dims)``) inside the box."""
        x = np.asarray(x, dtype=float)
        inside = np.ones(x.shape[:-1], dtype=bool)
        for i in range(self.dims):
            lo = -self.extent[i] / 2
            inside &= (x[..., i] >= lo) & (x[..., i] < lo + self.extent[i])
        return inside


def make_grid(dims: int, points: int | Sequence[int], extent: float | Sequence[float]) -> Grid:
    if dims not in (1, 2):
        raise ValueError(f"dims must be 1 or 2, got {dims}")
    pts = (points,) * dims if np.isscalar(points) else tuple(points)
    ext = (extent,) * dims if np.isscalar(extent) else tuple(extent)
    return Grid(tuple(int(p) for p in pts), tuple(float(e) for e in ext))


@dataclass(frozen=True)
class WaveFunction:
    grid: Grid
    values: np.ndarray
    time: float = 0.0
    hbar: float = 1.0
    mass: float | tuple[float, ...] = 1.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if np.any(np.asarray(self.mass) <= 0):
            raise ValueError("mass must be positive")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def masses(self) -> tuple[float, ...]:
        m = np.broadcast_to(np.asarray(self.mass, dtype=float), (self.grid.dims,))
        return tuple(float(v) for v in m)

    def replace(self, values: np.ndarray | None = None, time: float | None = None) -> "WaveFunction":
        return WaveFunction(
            self.grid,
            self.values if values is None else values,
            self.time if time is None else time,
            self.hbar,
            self.mass,
        )


@dataclass(frozen=True)
class DensityField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError("density shape does not match grid")
        if np.any(vals < 0):
            raise ValueError("density must be nonnegative")
        object.__setattr__(self, "values", _frozen(vals))

    def integral(self) -> float:
        return math.fsum(self.values.ravel()) * self.grid.cell_volume


def integrate(values: np.ndarray, grid: Grid) -> float | complex:
    """Midpoint rule with compensated summation."""
    v = np.asarray(values).ravel()
    if np.iscomplexobj(v):
        return complex(math.fsum(v.real), math.fsum(v.imag)) * grid.cell_volume
    return math.fsum(v) * grid.cell_volume


def norm(psi: WaveFunction) -> float:
    return math.sqrt(integrate(np.abs(psi.values) ** 2, psi.grid))


def inner(phi: WaveFunction | np.ndarray, psi: WaveFunction | np.ndarray, grid: Grid | None = None) -> complex:
    """L2 inner product <phi|psi>, antilinear in the first slot."""
    if grid is None:
        grid = psi.grid if isinstance(psi, WaveFunction) else phi.grid
    a = phi.values if isinstance(phi, WaveFunction) else np.asarray(phi)
    b = psi.values if isinstance(psi, WaveFunction) else np.asarray(psi)
    return complex(integrate(np.conj(a) * b, grid))


def normalize(psi: WaveFunction) -> WaveFunction:
    nrm = norm(psi)
    if not nrm > 0 or not math.isfinite(nrm):
        raise ValueError("cannot normalize a zero (or non-finite) field")
    return psi.replace(values=psi.values / nrm)


def spectral_gradient(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Fourier derivative along every axis; result has shape ``(dims, *grid.shape)``.

    The Nyquist mode is dropped so real fields have real derivatives.
    """
    vhat = np.fft.fftn(values)
    out = np.empty((grid.dims,) + grid.shape, dtype=complex)
    for i, k in enumerate(grid.kmesh()):
        k = k.copy()
        n = grid.points[i]
        if n % 2 == 0:
            k[np.isclose(np.abs(k), np.pi * n / grid.extent[i])] = 0.0
        out[i] = np.fft.ifftn(1j * k * vhat)
    return out


def spectral_laplacian(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.ifftn(-grid.k_squared() * np.fft.fftn(values))


def gradient(psi: WaveFunction) -> np.ndarray:
    return spectral_gradient(psi.values, psi.grid)


def laplacian(psi: WaveFunction) -> np.ndarray:
    return spectral_laplacian(psi.values, psi.grid)


def density(psi: WaveFunction) -> DensityField:
    return DensityField(psi.grid, np.abs(psi.values) ** 2)


def expectation_position(psi: WaveFunction) -> np.ndarray:
    rho = np.abs(psi.values) ** 2
    return np.array([integrate(x * rho, psi.grid) for x in psi.grid.mesh()])


def sample_cells(masses: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` flat cell indices with probability proportional to ``masses``."""
    cdf = np.cumsum(masses.ravel())
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    return np.minimum(idx, cdf.size - 1)


def sample_density(rho: DensityField, n: int, seed: int) -> np.ndarray:
    """``n`` configuration points drawn from ``rho``, shape ``(n, dims)``.

    A cell is chosen by cumulative mass, then the point is uniform within it.
    Each call owns its generator, so concurrent calls never share state.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    total = rho.integral()
    if abs(total - 1.0) > 1e-8:
        raise ValueError(f"density is not normalized (integral {total!r})")
    grid = rho.grid
    rng = np.random.default_rng(seed)
    flat = sample_cells(rho.values, n, rng)
    cells = np.unravel_index(flat, grid.shape)
    jitter = rng.random((n, grid.dims)) - 0.5
    pts = np.empty((n, grid.dims))
    for i in range(grid.dims):
        pts[:, i] = grid.axis(i)[cells[i]] + jitter[:, i] * grid.spacing[i]
        # cell 0 straddles the lower edge; fold it back onto the periodic box
        lo = grid.lower[i]
        pts[:, i] = lo + np.mod(pts[:, i] - lo, grid.extent[i])
    return pts


def cell_edges_cdf(rho: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Edges and CDF of a 1D cell-constant density, consistent with sampling."""
    dx = grid.spacing[0]
    edges = np.append(grid.axis(0) - dx / 2, grid.axis(0)[-1] + dx / 2)
    cdf = np.concatenate([[0.0], np.cumsum(rho) * dx])
    return edges, cdf


def check_boundary(values: np.ndarray, grid: Grid, tol: float = 1e-8, cells: int = 5) -> bool:
    """Warn (and return False) if |psi| exceeds ``tol`` within ``cells`` of an edge."""
    a = np.abs(values)
    ok = True
    for ax in range(grid.dims):
        lo = np.take(a, range(cells), axis=ax)
        hi = np.take(a, range(grid.points[ax] - cells, grid.points[ax]), axis=ax)
        if max(lo.max(), hi.max()) > tol:
            ok = False
    if not ok:
        warnings.warn(
            "field is not negligible near the periodic boundary; enlarge the extent",
            BoundaryWarning,
            stacklevel=2,
        )
    return ok


# -- columnar text format -------------------------------------------------------------

_FIELD_TAG = "bohmsim-field"


def write_field(path: str | Path, values: np.ndarray, grid: Grid, **meta) -> None:
    """Header line with grid metadata, then ``coords... re im [re im ...]`` per point.

    ``values`` may carry a leading component axis (spinors).
    """
    vals = np.asarray(values, dtype=complex)
    comps = vals.reshape((-1,) + grid.shape) if vals.shape != grid.shape else vals[None]
    header = {
        "dims": grid.dims,
        "points": ",".join(str(p) for p in grid.points),
        "extent": ",".join(repr(float(e)) for e in grid.extent),
        "components": comps.shape[0],
    }
    header.update({k: repr(float(v)) if isinstance(v, float) else v for k, v in meta.items()})
    cols = [m.ravel() for m in grid.mesh()]
    for c in comps:
        cols += [c.real.ravel(), c.imag.ravel()]
    head = _FIELD_TAG + " " + " ".join(f"{k}={v}" for k, v in header.items())
    np.savetxt(path, np.column_stack(cols), fmt="%.17g", header=head)


def read_field(path: str | Path) -> tuple[Grid, np.ndarray, dict]:
    with open(path) as fh:
        first = fh.readline().lstrip("#").split()
    if not first or first[0] != _FIELD_TAG:
        raise ValueError(f"{path}: not a field file")
    meta = dict(item.split("=", 1) for item in first[1:])
    grid = Grid(
        tuple(int(p) for p in meta.pop("points").split(",")),
        tuple(float(e) for e in meta.pop("extent").split(",")),
    )
    ncomp = int(meta.pop("components"))
    meta.pop("dims")
    data = np.loadtxt(path, ndmin=2)
    vals = np.empty((ncomp,) + grid.shape, dtype=complex)
    for c in range(ncomp):
        re = data[:, grid.dims + 2 * c]
        im = data[:, grid.dims + 2 * c + 1]
        vals[c] = (re + 1j * im).reshape(grid.shape)
    return grid, (vals[0] if ncomp == 1 else vals), meta
