"""Spin-1/2 fields: Pauli propagation, guidance on the spectral space and Stern-Gerlach runs.

Component 0 carries ``lambda = +hbar/2`` and component 1 ``lambda = -hbar/2``.
The position axis is the single grid axis, identified with spatial direction 1;
fields ``A`` and ``B`` are 3-vectors per grid point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bohm import (BOUNDARY_EXIT, COMPLETE, EPS_NODE, NODE_REGULARIZED, STATUS_NAMES, FieldSeries, Trajectory,
                   default_v_max, node_mask, regularize)
from .grid import Grid, integrate, sample_cells, spectral_gradient
from .schrodinger import n_steps

SIGMA = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)
SIGMA.setflags(write=False)


@dataclass(frozen=True)
class SpinorField:
    grid: Grid
    values: np.ndarray = field(repr=False)  # (2, *grid.shape)
    time: float = 0.0
    hbar: float = 1.0
    mass: float = 1.0
    charge: float = 1.0
    c: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex, copy=True)
        if vals.shape != (2,) + self.grid.shape:
            raise ValueError(f"spinor values must have shape {(2,) + self.grid.shape}, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def lambdas(self) -> tuple[float, float]:
        return (self.hbar / 2, -self.hbar / 2)

    def replace(self, values=None, time=None) -> "SpinorField":
        return SpinorField(self.grid, self.values if values is None else values,
                           self.time if time is None else time, self.hbar, self.mass, self.charge, self.c, self.mu)

    def norm(self) -> float:
        return math.sqrt(integrate(np.sum(np.abs(self.values) ** 2, axis=0), self.grid))

    def normalized(self) -> "SpinorField":
        nrm = self.norm()
        if not nrm > 0:
            raise ValueError("cannot normalize a zero spinor")
        return self.replace(values=self.values / nrm)


def product_spinor(spatial: np.ndarray, coeffs, grid: Grid, **params) -> SpinorField:
    """``f(x) (c_up, c_down)``, normalized on the spectral space."""
    c = np.asarray(coeffs, dtype=complex)
    return SpinorField(grid, c[:, None] * np.asarray(spatial)[None, :], **params).normalized()


@dataclass(frozen=True)
class FieldConfig:
    """Electromagnetic inputs; each may be a constant, a per-point array or ``f(x, t)``.

    ``A`` and ``B`` are 3-vectors (shape ``(3,)`` or ``(3, npoints)``), ``V`` is scalar.
    ``B`` is taken as given and is not derived from ``A``.
    """

    A: np.ndarray | Callable | None = None
    B: np.ndarray | Callable | None = None
    V: np.ndarray | Callable | None = None

    @property
    def time_dependent(self) -> bool:
        return any(callable(f) for f in (self.A, self.B, self.V))

    def _eval(self, f, grid: Grid, t: float, vector: bool) -> np.ndarray:
        shape = ((3,) if vector else ()) + grid.shape
        if f is None:
            return np.zeros(shape)
        val = f(grid.axis(0), t) if callable(f) else f
        val = np.asarray(val, dtype=float)
        if vector and val.ndim == 1:
            val = val[:, None]
        out = np.array(np.broadcast_to(val, shape), dtype=float)
        if not np.all(np.isfinite(out)):
            raise ValueError("field configuration is not finite on the grid")
        return out

    def at(self, grid: Grid, t: float = 0.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self._eval(self.A, grid, t, True), self._eval(self.B, grid, t, True),
                self._eval(self.V, grid, t, False))


# -- propagation -----------------------------------------------------------------------

def local_propagator(B: np.ndarray, scalar: np.ndarray, mu: float, dt: float, hbar: float) -> np.ndarray:
    """Exact ``exp(-i (scalar + mu B.sigma) dt / hbar)`` per point, shape ``(2, 2, n)``."""
    b = mu * B * dt / hbar
    theta = np.sqrt(np.sum(b**2, axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        nhat = np.where(theta > 0, b / np.where(theta > 0, theta, 1.0), 0.0)
    ndotsigma = np.einsum("in,iab->abn", nhat, SIGMA)
    eye = np.eye(2)[:, :, None]
    U = np.cos(theta) * eye - 1j * np.sin(theta) * ndotsigma
    return np.exp(-1j * scalar * dt / hbar) * U


def _apply_local(U: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return np.einsum("abn,bn->an", U, psi)


class PauliStepper:
    """Strang splitting of the Pauli Hamiltonian

    ``(1/2m)(p - eA/c)^2 + V + mu B.sigma``

    Local half steps (V, ``mu B.sigma`` and the ``e^2 (A_2^2 + A_3^2)/2mc^2``
    term) are exact 2x2 exponentials.  The kinetic step handles ``A_1`` exactly:
    its mean shifts the Fourier momentum and the periodic remainder is a pure
    gauge phase in one dimension.
    """

    def __init__(self, grid: Grid, fields: FieldConfig, dt: float, hbar: float, mass: float,
                 charge: float, c: float, mu: float):
        if dt == 0 or not math.isfinite(dt):
            raise ValueError("dt must be a nonzero finite number")
        self.grid, self.fields, self.dt = grid, fields, dt
        self.hbar, self.mass, self.charge, self.c, self.mu = hbar, mass, charge, c, mu
        self._static = None if fields.time_dependent else self._factors(0.0)

    def _factors(self, t: float):
        A, B, V = self.fields.at(self.grid, t)
        e, c, m, hbar = self.charge, self.c, self.mass, self.hbar
        scalar = V + e**2 * (A[1] ** 2 + A[2] ** 2) / (2 * m * c**2)
        half = local_propagator(B, scalar, self.mu, self.dt / 2, hbar)
        a1 = A[0]
        a_mean = float(np.mean(a1))
        dx = self.grid.spacing[0]
        # gauge phase chi with dchi/dx = (e / hbar c) (A_1 - mean A_1); periodic by construction
        chi = e / (hbar * c) * np.concatenate([[0.0], np.cumsum((a1 - a_mean)[:-1] + (a1 - a_mean)[1:]) * dx / 2])
        arg = (hbar * self.grid.wavenumbers(0) - e * a_mean / c) ** 2 / (2 * m)
        kin = np.exp(-1j * arg * self.dt / hbar)
        gauge = np.exp(1j * chi) if np.any(a1 != a_mean) else None
        return half, kin, gauge

    def __call__(self, psi: np.ndarray, t: float) -> np.ndarray:
        half, kin, gauge = self._static or self._factors(t + self.dt / 2)
        out = _apply_local(half, psi)
        if gauge is not None:
            out = np.conj(gauge) * out
        out = np.fft.ifft(kin * np.fft.fft(out, axis=-1), axis=-1)
        if gauge is not None:
            out = gauge * out
        return _apply_local(half, out)


def pauli_step(psi: SpinorField, fields: FieldConfig, dt: float) -> SpinorField:
    step = PauliStepper(psi.grid, fields, dt, psi.hbar, psi.mass, psi.charge, psi.c, psi.mu)
    return psi.replace(values=step(psi.values, psi.time), time=psi.time + dt)


@dataclass(frozen=True)
class SpinorRecord:
    grid: Grid
    times: np.ndarray
    values: np.ndarray = field(repr=False)  # (nsnap, 2, *shape)
    dt: float
    stride: int
    fields: FieldConfig
    params: dict

    def __len__(self) -> int:
        return len(self.times)

    def snapshot(self, i: int) -> SpinorField:
        return SpinorField(self.grid, self.values[i], float(self.times[i]), **self.params)


def evolve_pauli(psi0: SpinorField, fields: FieldConfig, T: float, dt: float, stride: int = 1) -> SpinorRecord:
    if dt <= 0:
        raise ValueError("dt must be positive")
    k = n_steps(T, dt)
    if k % stride:
        raise ValueError(f"stride {stride} does not divide the {k} steps")
    step = PauliStepper(psi0.grid, fields, dt, psi0.hbar, psi0.mass, psi0.charge, psi0.c, psi0.mu)
    vals = psi0.values.copy()
    snaps, times = [vals.copy()], [psi0.time]
    for s in range(1, k + 1):
        vals = step(vals, psi0.time + (s - 1) * dt)
        if s % stride == 0:
            snaps.append(vals.copy())
            times.append(psi0.time + s * dt)
    params = dict(hbar=psi0.hbar, mass=psi0.mass, charge=psi0.charge, c=psi0.c, mu=psi0.mu)
    snaps = np.array(snaps)
    snaps.setflags(write=False)
    return SpinorRecord(psi0.grid, np.array(times), snaps, dt, stride, fields, params)


# -- observables and velocity fields -----------------------------------------------------

def spin_expectation(psi: SpinorField) -> np.ndarray:
    """<S> = (hbar/2) <psi|sigma|psi>, 3-vector."""
    dens = np.einsum("an,iab,bn->in", np.conj(psi.values), SIGMA, psi.values).real
    return np.array([psi.hbar / 2 * integrate(d, psi.grid) for d in dens])


def position_expectation(psi: SpinorField) -> float:
    rho = np.sum(np.abs(psi.values) ** 2, axis=0)
    return float(integrate(psi.grid.axis(0) * rho, psi.grid))


def _raw_position_velocity(psi: SpinorField, A1: np.ndarray, component: int | None):
    grad = np.stack([spectral_gradient(v, psi.grid)[0] for v in psi.values])
    if component is None:
        num = np.sum(np.imag(np.conj(psi.values) * grad), axis=0)
        rho = np.sum(np.abs(psi.values) ** 2, axis=0)
    else:
        num = np.imag(np.conj(psi.values[component]) * grad[component])
        rho = np.abs(psi.values[component]) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        v = psi.hbar / psi.mass * num / rho - psi.charge / (psi.mass * psi.c) * A1
    return v, rho


def position_velocity_field(psi: SpinorField, A=None, component: int | None = None,
                            eps_node: float = EPS_NODE, v_max: float | None = None):
    """``(hbar/m) Im(psi^dag d psi) / psi^dag psi - (e/mc) A_1``.

    With ``component`` set, the same expression restricted to one spin branch.
    """
    from .bohm import VelocityFieldSample

    A1 = FieldConfig(A=A).at(psi.grid, psi.time)[0][0]
    v, rho = _raw_position_velocity(psi, A1, component)
    scale = np.sum(np.abs(psi.values) ** 2, axis=0).max()
    mask = node_mask(rho, eps_node, scale)
    return VelocityFieldSample(psi.grid, psi.time, regularize(v[None], mask, v_max), mask)


def spin_commutator(B: np.ndarray, mu: float, hbar: float) -> np.ndarray:
    """``(i hbar)^-1 [S_3, mu B.sigma]`` per point, shape ``(2, 2, n)`` (Hermitian)."""
    S3 = hbar / 2 * SIGMA[2]
    Bs = mu * np.einsum("in,iab->abn", B, SIGMA)
    comm = np.einsum("ab,bcn->acn", S3, Bs) - np.einsum("abn,bc->acn", Bs, S3)
    return comm / (1j * hbar)


def spin_current(psi: SpinorField, B: np.ndarray) -> np.ndarray:
    """``J_S(y, lambda) = Re[psi*(y, lambda) (C psi)(y, lambda)]``, shape ``(2, n)``."""
    C = spin_commutator(B, psi.mu, psi.hbar)
    return (np.conj(psi.values) * _apply_local(C, psi.values)).real


def spin_production(psi: SpinorField, B: np.ndarray) -> float:
    """``Q = (i hbar)^-1 <[S_3, H]>`` from dense 2x2 algebra."""
    C = spin_commutator(B, psi.mu, psi.hbar)
    return float(integrate(np.einsum("an,abn,bn->n", np.conj(psi.values), C, psi.values).real, psi.grid))


def spin_velocity(psi: SpinorField, B, eps_node: float = EPS_NODE, check: bool = True) -> np.ma.MaskedArray:
    """``v_S(y, lambda) = J_S / |psi(y, lambda)|^2``, masked where a branch is a node."""
    B = FieldConfig(B=B).at(psi.grid, psi.time)[1] if not (isinstance(B, np.ndarray) and B.ndim == 2) else B
    J = spin_current(psi, B)
    if check:
        q_dense = spin_production(psi, B)
        q_sum = float(integrate(J.sum(axis=0), psi.grid))
        if abs(q_dense - q_sum) > 1e-10 * max(1.0, abs(q_dense)):
            raise AssertionError(f"spin current does not integrate to <[S3,H]>/ih: {q_sum} vs {q_dense}")
    rho = np.abs(psi.values) ** 2
    mask = rho < eps_node * rho.max()
    with np.errstate(divide="ignore", invalid="ignore"):
        v = J / rho
    v[mask] = 0.0
    return np.ma.masked_array(v, mask=mask)


def spin_vector_field(psi: SpinorField, eps_node: float = EPS_NODE) -> np.ma.MaskedArray:
    """``s = (hbar/2) psi^dag sigma psi / psi^dag psi``, shape ``(3, n)``."""
    num = np.einsum("an,iab,bn->in", np.conj(psi.values), SIGMA, psi.values).real
    rho = np.sum(np.abs(psi.values) ** 2, axis=0)
    mask = rho < eps_node * rho.max()
    with np.errstate(divide="ignore", invalid="ignore"):
        s = psi.hbar / 2 * num / rho
    return np.ma.masked_array(s, mask=np.broadcast_to(mask, s.shape))


# -- spin be-able trajectories -------------------------------------------------------------

@dataclass(frozen=True)
class SpinTrajectory(Trajectory):
    lambda0: float = 0.0
    s3: np.ndarray | None = None


@dataclass(frozen=True)
class SpinEnsemble:
    seed: int
    initial: np.ndarray  # (n, 1)
    lambda0: np.ndarray  # (n,)
    times: np.ndarray
    positions: np.ndarray = field(repr=False)  # (nsnap, n, 1)
    s3: np.ndarray = field(repr=False)  # (nsnap, n)
    status: np.ndarray = field(repr=False)
    record: SpinorRecord = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.lambda0)

    def trajectory(self, i: int) -> SpinTrajectory:
        return SpinTrajectory(self.initial[i], self.times, self.positions[:, i], STATUS_NAMES[int(self.status[i])],
                              float(self.lambda0[i]), self.s3[:, i])

    def flag_counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.status == code)) for code, name in STATUS_NAMES.items()}


def _spin_series(record: SpinorRecord, guidance: str, eps_node: float, v_max: float | None):
    """Position-velocity series (one component per branch) and spin-velocity stack."""
    grid = record.grid
    v_max = default_v_max(grid, record.times) if v_max is None else v_max
    nsnap = len(record)
    vals = np.empty((nsnap, 2, 1) + grid.shape)
    masks = np.empty((nsnap, 2) + grid.shape, dtype=bool)
    vs = np.empty((nsnap, 2) + grid.shape)
    vs_mask = np.empty((nsnap, 2) + grid.shape, dtype=bool)
    for s in range(nsnap):
        psi = record.snapshot(s)
        A, B, _ = record.fields.at(grid, psi.time)
        scale = np.sum(np.abs(psi.values) ** 2, axis=0).max()
        for comp in (0, 1):
            v, rho = _raw_position_velocity(psi, A[0], None if guidance == "total" else comp)
            masks[s, comp] = node_mask(rho, eps_node, scale)
            vals[s, comp] = regularize(v[None], masks[s, comp], v_max)
        sv = spin_velocity(psi, B, eps_node, check=False)
        vs[s] = sv.filled(0.0)
        vs_mask[s] = np.ma.getmaskarray(sv)
    return FieldSeries(grid, record.times, vals, masks), FieldSeries(grid, record.times, vs[:, :, None], vs_mask)


def _interp_spin(spin_series: FieldSeries, s: float, x: np.ndarray, comp: np.ndarray):
    v, touched = spin_series(s, x, comp)
    return v[:, 0], touched


def sample_spectral(psi: SpinorField, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``(y, lambda)`` pairs from ``|psi(y, lambda)|^2`` on the spectral space."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rho = np.abs(psi.values) ** 2
    total = integrate(rho.sum(axis=0), psi.grid)
    if abs(total - 1.0) > 1e-8:
        raise ValueError(f"spinor is not normalized (norm^2 {total!r})")
    rng = np.random.default_rng(seed)
    flat = sample_cells(rho, n, rng)
    comp, cell = np.unravel_index(flat, rho.shape)
    x = psi.grid.axis(0)[cell] + (rng.random(n) - 0.5) * psi.grid.spacing[0]
    lo = psi.grid.lower[0]
    x = lo + np.mod(x - lo, psi.grid.extent[0])
    lam = np.where(comp == 0, psi.hbar / 2, -psi.hbar / 2)
    return x[:, None], lam


def _spin_paths(series: FieldSeries, vs: FieldSeries, x0, lam0, hbar: float, mode: str, rng: np.random.Generator,
                substeps: int = 1):
    """Co-integrate position and spin be-able for one chunk of trajectories."""
    grid = series.grid
    n = len(x0)
    nsnap = len(series.times)
    x = np.array(x0, dtype=float)
    s3 = np.array(lam0, dtype=float)
    pos = np.full((nsnap, n, 1), np.nan)
    spin = np.empty((nsnap, n))
    pos[0], spin[0] = x, s3
    status = np.zeros(n, dtype=np.int8)
    alive = grid.contains(x)
    status[~alive] = BOUNDARY_EXIT
    h = series.dt / substeps
    ds = 1.0 / substeps
    half = hbar / 2

    def branch(val):
        return np.where(val >= 0, 0, 1)

    for s in range(nsnap - 1):
        for sub in range(substeps):
            s0 = s + sub * ds
            idx = np.flatnonzero(alive)
            xa, sa = x[idx], s3[idx]
            ca = branch(sa)
            if mode == "jump":
                # Bell-type minimal rates, evaluated at the midpoint of the step
                vmid, tmask = _interp_spin(vs, s0 + ds / 2, xa, ca)
                rate = np.maximum(0.0, -vmid / sa)
                p = -np.expm1(-rate * h)
                u = rng.random(n)[idx]
                flip = u < p
                k1, t1 = series(s0, xa, ca)
                k2, t2 = series(s0 + ds / 2, xa + h / 2 * k1, ca)
                k3, t3 = series(s0 + ds / 2, xa + h / 2 * k2, ca)
                k4, t4 = series(s0 + ds, xa + h * k3, ca)
                xn = xa + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                sn = np.where(flip, -sa, sa)
                touched = t1 | t2 | t3 | t4 | (tmask & (rate > 0))
            else:
                def rhs(ss, xx, sv):
                    cb = branch(sv)
                    kx, tx = series(ss, xx, cb)
                    ks, ts = _interp_spin(vs, ss, xx, cb)
                    return kx, ks, tx | ts

                k1x, k1s, t1 = rhs(s0, xa, sa)
                k2x, k2s, t2 = rhs(s0 + ds / 2, xa + h / 2 * k1x, np.clip(sa + h / 2 * k1s, -half, half))
                k3x, k3s, t3 = rhs(s0 + ds / 2, xa + h / 2 * k2x, np.clip(sa + h / 2 * k2s, -half, half))
                k4x, k4s, t4 = rhs(s0 + ds, xa + h * k3x, np.clip(sa + h * k3s, -half, half))
                xn = xa + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
                sn = np.clip(sa + h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s), -half, half)
                touched = t1 | t2 | t3 | t4
            st = status[idx]
            st[touched & (st == COMPLETE)] = NODE_REGULARIZED
            gone = ~grid.contains(xn)
            st[gone] = BOUNDARY_EXIT
            status[idx] = st
            keep = ~gone
            x[idx[keep]] = xn[keep]
            s3[idx[keep]] = sn[keep]
            alive[idx[gone]] = False
        pos[s + 1][alive] = x[alive]
        spin[s + 1] = s3
    return pos, spin, status


def integrate_spin_beables(record: SpinorRecord, y0, lam0, seed: int = 0, mode: str = "jump",
                           guidance: str = "branch", eps_node: float = EPS_NODE, v_max: float | None = None,
                           substeps: int = 1, threads: int = 1):
    """Spin trajectories for many starting points ``(y0, lambda0)``.

    ``mode="jump"`` keeps the spin be-able on ``{+hbar/2, -hbar/2}`` and flips it
    with the minimal rate ``max(0, -v_S / lambda)``, which makes the mean
    increment equal ``Q dt``.  ``mode="continuous"`` integrates
    ``ds_3/dt = v_S`` on the nearest branch and clamps to ``[-hbar/2, hbar/2]``.
    ``guidance`` selects the branch velocity or the total-density velocity for
    the position.
    """
    if mode not in ("jump", "continuous"):
        raise ValueError("mode must be 'jump' or 'continuous'")
    if guidance not in ("branch", "total"):
        raise ValueError("guidance must be 'branch' or 'total'")
    from .bohm import _chunked

    y0 = np.asarray(y0, dtype=float).reshape(-1, 1)
    lam0 = np.broadcast_to(np.asarray(lam0, dtype=float), (len(y0),))
    hbar = record.params["hbar"]
    if not np.all(np.isclose(np.abs(lam0), hbar / 2, rtol=0, atol=1e-15)):
        raise ValueError("initial spin values must be +-hbar/2")
    series, vs = _spin_series(record, guidance, eps_node, v_max)
    seeds = np.random.SeedSequence(seed).spawn((len(y0) + 4095) // 4096)

    def run(chunk, i):
        lo = i * 4096
        lam = lam0[lo:lo + len(chunk)]
        return _spin_paths(series, vs, chunk, lam, hbar, mode, np.random.default_rng(seeds[i]), substeps)

    parts = _chunked(run, y0, threads)
    return (np.concatenate([p[0] for p in parts], axis=1), np.concatenate([p[1] for p in parts], axis=1),
            np.concatenate([p[2] for p in parts]))


def integrate_spin_beable(record: SpinorRecord, y0: float, lambda0: float, seed: int = 0, mode: str = "jump",
                          guidance: str = "branch", **kw) -> SpinTrajectory:
    if not record.grid.contains(np.array([[y0]]))[0]:
        raise ValueError(f"initial point {y0} is outside the grid")
    pos, s3, status = integrate_spin_beables(record, [y0], [lambda0], seed, mode, guidance, **kw)
    return SpinTrajectory(np.array([y0]), record.times, pos[:, 0], STATUS_NAMES[int(status[0])], float(lambda0),
                          s3[:, 0])


def run_spin_ensemble(psi0: SpinorField, fields: FieldConfig, T: float, dt: float, n: int, seed: int,
                      stride: int = 1, mode: str = "jump", guidance: str = "branch", threads: int = 1,
                      **kw) -> SpinEnsemble:
    record = evolve_pauli(psi0, fields, T, dt, stride)
    y0, lam0 = sample_spectral(psi0, n, seed)
    pos, s3, status = integrate_spin_beables(record, y0, lam0, seed + 1, mode, guidance, threads=threads, **kw)
    return SpinEnsemble(seed, y0, lam0, record.times, pos, s3, status, record)


# -- Stern-Gerlach -------------------------------------------------------------------------

@dataclass(frozen=True)
class SternGerlachResult:
    ensemble: SpinEnsemble
    up_fraction: float
    up_fraction_expected: float
    up_fraction_se: float
    s3_constant: bool
    mean_separation: np.ndarray  # (nsnap,) mean(x | down) - mean(x | up)
    overlap: float

    @property
    def separation_monotonic(self) -> bool:
        d = self.mean_separation[np.isfinite(self.mean_separation)]
        return bool(np.all(np.diff(d) >= 0)) if len(d) else True


def population_overlap(a: np.ndarray, b: np.ndarray, bins: int = 64) -> float:
    """Shared probability mass of two binned samples, ``sum_i min(p_i, q_i)``."""
    a, b = a[np.isfinite(a)], b[np.isfinite(b)]
    if len(a) == 0 or len(b) == 0:
        return 0.0
    edges = np.linspace(min(a.min(), b.min()), max(a.max(), b.max()), bins + 1)
    pa = np.histogram(a, edges)[0] / len(a)
    pb = np.histogram(b, edges)[0] / len(b)
    return float(np.minimum(pa, pb).sum())


def stern_gerlach_fields(B0: float, gradient: float) -> FieldConfig:
    """``B = (B0 + G x) e_3``: spin-dependent potential ``+-mu B(x)``."""
    return FieldConfig(B=lambda x, t: np.stack([np.zeros_like(x), np.zeros_like(x), B0 + gradient * x]))


def stern_gerlach_run(psi0: SpinorField, fields: FieldConfig, T: float, dt: float, n: int, seed: int,
                      stride: int = 1, bins: int = 64, threads: int = 1) -> SternGerlachResult:
    _, B, _ = fields.at(psi0.grid, 0.0)
    if np.any(B[:2] != 0):
        raise ValueError("Stern-Gerlach runs need the field along e_3")
    ens = run_spin_ensemble(psi0, fields, T, dt, n, seed, stride, threads=threads)
    up = ens.lambda0 > 0
    p_up = float(np.sum(np.abs(psi0.values[0]) ** 2) * psi0.grid.spacing[0])
    constant = bool(np.all(ens.s3 == ens.s3[0][None, :]))
    sep = np.full(len(ens.times), np.nan)
    if up.any() and (~up).any():
        for s in range(len(ens.times)):
            x = ens.positions[s, :, 0]
            sep[s] = np.nanmean(x[~up]) - np.nanmean(x[up])
    overlap = population_overlap(ens.positions[-1, up, 0], ens.positions[-1, ~up, 0], bins)
    frac = float(np.mean(up))
    return SternGerlachResult(ens, frac, p_up, math.sqrt(p_up * (1 - p_up) / n), constant, sep, overlap)
