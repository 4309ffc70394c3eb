"""Classical Hamilton-Jacobi fluid for at most quadratic potentials, plus the quantum potential.

The action is kept in the quadratic form ``S(q, t) = a q^2 + b q + c`` for
``V(q) = m omega^2 q^2 / 2 - F q``.  Inserting it into
``dS/dt + (dS/dq)^2 / 2m + V = 0`` gives

    a' = -2 a^2 / m - m omega^2 / 2
    b' = -2 a b / m + F
    c' = -b^2 / 2m

and the flow ``q' = (2 a q + b) / m`` is affine, ``q(t) = alpha q0 + beta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bohm import Trajectory, binned_tv, fsum_mean
from .grid import DensityField, Grid, WaveFunction, integrate, spectral_gradient
from .schrodinger import EvolutionRecord

DEFAULT_A_BOUND = 1e6


class CausticError(RuntimeError):
    def __init__(self, t: float, a: float):
        super().__init__(f"caustic reached near t = {t:.6g} (|a| = {abs(a):.3g})")
        self.time = t


@dataclass(frozen=True)
class QuadraticHJState:
    a: float
    b: float
    c: float = 0.0
    t: float = 0.0
    mass: float = 1.0
    omega: float = 0.0
    force: float = 0.0
    a_bound: float = DEFAULT_A_BOUND

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c)):
            raise ValueError("H-J coefficients must be finite")

    def action(self, q):
        return self.a * np.asarray(q) ** 2 + self.b * np.asarray(q) + self.c

    def potential(self, q):
        q = np.asarray(q)
        return 0.5 * self.mass * self.omega**2 * q**2 - self.force * q


def _rhs(y: np.ndarray, m: float, omega: float, force: float) -> np.ndarray:
    """Coefficients ``(a, b, c)`` and the flow map ``(alpha, beta)``, then any trajectories."""
    a, b = y[0], y[1]
    out = np.empty_like(y)
    out[0] = -2 * a * a / m - 0.5 * m * omega**2
    out[1] = -2 * a * b / m + force
    out[2] = -b * b / (2 * m)
    out[3] = 2 * a * y[3] / m
    out[4] = (2 * a * y[4] + b) / m
    out[5:] = (2 * a * y[5:] + b) / m
    return out


def _integrate(state: QuadraticHJState, T: float, dt: float, zeta0=None):
    """RK4 over ``[t, t + T]``; returns the state path, flow maps and optional trajectories."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k = T / dt
    if abs(k - round(k)) > 1e-8 * max(1.0, k):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    k = int(round(k))
    zeta0 = np.zeros(0) if zeta0 is None else np.asarray(zeta0, dtype=float).ravel()
    y = np.concatenate([[state.a, state.b, state.c, 1.0, 0.0], zeta0])
    m, w, f = state.mass, state.omega, state.force
    path = np.empty((k + 1, len(y)))
    path[0] = y
    for s in range(k):
        k1 = _rhs(y, m, w, f)
        k2 = _rhs(y + dt / 2 * k1, m, w, f)
        k3 = _rhs(y + dt / 2 * k2, m, w, f)
        k4 = _rhs(y + dt * k3, m, w, f)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not (abs(y[0]) <= state.a_bound and y[3] > 0 and np.all(np.isfinite(y))):
            raise CausticError(state.t + (s + 1) * dt, y[0])
        path[s + 1] = y
    times = state.t + dt * np.arange(k + 1)
    return times, path


def evolve_quadratic_S(state: QuadraticHJState, dt: float, steps: int = 1) -> QuadraticHJState:
    """Advance ``(a, b, c)`` by ``steps`` RK4 steps of size ``dt``."""
    _, path = _integrate(state, steps * dt, dt)
    a, b, c = path[-1, :3]
    return replace(state, a=float(a), b=float(b), c=float(c), t=state.t + steps * dt)


def riccati_free(a0: float, t, mass: float = 1.0):
    return a0 / (1 + 2 * a0 * np.asarray(t) / mass)


def riccati_harmonic(a0: float, t, omega: float, mass: float = 1.0):
    """Closed form ``a(t) = (m omega / 2) tan(theta0 - omega t)``."""
    theta0 = math.atan(2 * a0 / (mass * omega))
    return 0.5 * mass * omega * np.tan(theta0 - omega * np.asarray(t))


def velocity_field_classical(state: QuadraticHJState, q) -> np.ndarray:
    return (2 * state.a * np.asarray(q) + state.b) / state.mass


def hamilton_flow(q0, p0, t, omega: float = 0.0, mass: float = 1.0, force: float = 0.0):
    """Solution of Hamilton's equations for ``V = m omega^2 q^2 / 2 - F q``."""
    q0, p0, t = np.asarray(q0, dtype=float), np.asarray(p0, dtype=float), np.asarray(t, dtype=float)
    if omega == 0:
        return q0 + p0 * t / mass + 0.5 * force * t**2 / mass
    qeq = force / (mass * omega**2)
    return qeq + (q0 - qeq) * np.cos(omega * t) + p0 / (mass * omega) * np.sin(omega * t)


def fourier_interpolate(values: np.ndarray, grid: Grid, q: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of periodic grid data at arbitrary points."""
    n = grid.shape[0]
    hat = np.fft.fft(values) / n
    k = grid.wavenumbers(0)
    if n % 2 == 0:
        # split the Nyquist coefficient symmetrically so real data stays real
        hat = hat.copy()
        nyq = hat[n // 2] / 2
        hat[n // 2] = nyq
        hat = np.append(hat, nyq)
        k = np.append(k, -k[n // 2])
    x0 = grid.lower[0]
    out = np.empty(len(q), dtype=complex)
    for lo in range(0, len(q), 2048):
        qq = np.asarray(q[lo:lo + 2048])
        out[lo:lo + 2048] = np.exp(1j * np.outer(qq - x0, k)) @ hat
    return out


def _flow_map(state: QuadraticHJState, T: float, dt: float):
    times, path = _integrate(state, T, dt)
    a, b, c = path[-1, :3]
    return replace(state, a=float(a), b=float(b), c=float(c), t=float(times[-1])), path[-1, 3], path[-1, 4]


def transport_density(rho: DensityField, state: QuadraticHJState, dt: float, steps: int = 1):
    """Push ``rho`` along the characteristics for ``steps * dt``.

    ``rho'(q) = rho((q - beta) / alpha) / alpha`` with ``rho`` evaluated by its
    Fourier interpolant.  Returns the transported density and the advanced state.
    """
    new_state, alpha, beta = _flow_map(state, steps * dt, dt)
    q = rho.grid.axis(0)
    back = (q - beta) / alpha
    period = rho.grid.extent[0]
    lo = rho.grid.lower[0]
    inside = (back >= lo) & (back < lo + period)
    vals = np.zeros_like(q)
    vals[inside] = fourier_interpolate(rho.values, rho.grid, back[inside]).real / alpha
    return DensityField(rho.grid, np.clip(vals, 0.0, None)), new_state


@dataclass(frozen=True)
class HJFluid:
    state: QuadraticHJState
    density: DensityField

    def evolve(self, T: float, dt: float) -> "HJFluid":
        rho, st = transport_density(self.density, self.state, dt, int(round(T / dt)))
        return HJFluid(st, rho)


def integrate_zeta(state: QuadraticHJState, q0, T: float, dt: float) -> Trajectory | list[Trajectory]:
    """Characteristics ``dzeta/dt = v(zeta, t)`` co-integrated with ``S`` (4th order).

    A caustic truncates the series; the trajectory's status is then ``"caustic"``.
    """
    q = np.atleast_1d(np.asarray(q0, dtype=float))
    paths, times, status = zeta_paths(state, q, T, dt)
    out = [Trajectory(np.array([q[i]]), times, paths[:, i, None], status) for i in range(len(q))]
    return out[0] if np.ndim(q0) == 0 else out


def zeta_paths(state: QuadraticHJState, q0: np.ndarray, T: float, dt: float):
    """Positions ``(nsteps + 1, n)`` of many characteristics; truncated at a caustic."""
    try:
        times, path = _integrate(state, T, dt, q0)
        return path[:, 5:], times, "complete"
    except CausticError as err:
        T_ok = math.floor((err.time - state.t) / dt - 1e-9) * dt
        if T_ok <= 0:
            return np.asarray(q0, dtype=float)[None], np.array([state.t]), "caustic"
        times, path = _integrate(state, T_ok, dt, q0)
        return path[:, 5:], times, "caustic"


@dataclass(frozen=True)
class ZetaEnsembleCheck:
    tv: float
    mean: float
    mean_se: float
    mean_exact: float
    density: DensityField = field(repr=False)

    @property
    def mean_ok(self) -> bool:
        return abs(self.mean - self.mean_exact) <= 3 * self.mean_se + 1e-12


def zeta_ensemble_check(state: QuadraticHJState, rho0: DensityField, T: float, dt: float, n: int, seed: int,
                        bins: int = 64) -> ZetaEnsembleCheck:
    from .grid import sample_density

    q0 = sample_density(rho0, n, seed)[:, 0]
    paths, _, status = zeta_paths(state, q0, T, dt)
    if status != "complete":
        raise CausticError(state.t + T, float("inf"))
    rho_T, _ = transport_density(rho0, state, dt, int(round(T / dt)))
    qT = paths[-1]
    tv = binned_tv(qT[:, None], rho_T.values, rho0.grid, bins)
    mean = fsum_mean(qT)
    se = float(np.std(qT, ddof=1) / math.sqrt(n))
    exact = float(integrate(rho0.grid.axis(0) * rho_T.values, rho0.grid) / rho_T.integral())
    return ZetaEnsembleCheck(tv, mean, se, exact, rho_T)


# -- quantum potential and the classical limit -------------------------------------------

def quantum_potential(psi: WaveFunction, eps_node: float = 1e-12) -> np.ma.MaskedArray:
    """``V_Q = -(hbar^2 / 2m) lap(R) / R`` with ``R = |psi|``; node cells are masked."""
    R = np.abs(psi.values)
    lap = sum(spectral_laplacian_axis(R, psi.grid, i) / m for i, m in enumerate(psi.masses))
    mask = R**2 < eps_node * np.max(R**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        vq = -(psi.hbar**2) / 2 * lap / R
    vq[mask] = 0.0
    return np.ma.masked_array(vq.real, mask=mask)


def spectral_laplacian_axis(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    k = grid.kmesh()[axis]
    return np.fft.ifftn(-(k**2) * np.fft.fftn(values))


def polar_decomposition(psi: WaveFunction, region: np.ndarray | None = None, eps_node: float = 1e-8):
    """``(R, S)`` with the phase unwrapped outward from the density maximum (1D)."""
    if psi.grid.dims != 1:
        raise ValueError("phase unwrapping is implemented for 1D fields")
    vals = psi.values
    rho = np.abs(vals) ** 2
    region = np.ones(rho.shape, dtype=bool) if region is None else region
    idx = np.flatnonzero(region)
    near = idx[rho[idx] < eps_node * rho.max()]
    if len(near):
        raise ValueError(f"phase unwrapping fails near a node at cell {int(near[0])} "
                         f"(x = {psi.grid.axis(0)[near[0]]:.6g})")
    i0 = idx[np.argmax(rho[idx])]
    phase = np.angle(vals)
    S = np.full(rho.shape, np.nan)
    right = np.unwrap(phase[i0:idx[-1] + 1])
    left = np.unwrap(phase[idx[0]:i0 + 1][::-1])[::-1]
    S[i0:idx[-1] + 1] = right
    S[idx[0]:i0 + 1] = left
    jumps = np.abs(np.diff(S[idx[0]:idx[-1] + 1]))
    if np.any(jumps > np.pi / 2):
        cell = idx[0] + int(np.argmax(jumps > np.pi / 2))
        raise ValueError(f"phase unwrapping ambiguous at cell {cell}; the grid under-resolves the phase")
    return np.sqrt(rho), psi.hbar * S


def probe_region(psi: WaveFunction, n_sigma: float = 3.0) -> np.ndarray:
    x = psi.grid.axis(0)
    rho = np.abs(psi.values) ** 2
    mean = integrate(x * rho, psi.grid)
    sd = math.sqrt(max(integrate((x - mean) ** 2 * rho, psi.grid), 0.0))
    return np.abs(x - mean) <= n_sigma * sd


@dataclass(frozen=True)
class ResidualReport:
    residual: float
    quantum_norm: float
    region: np.ndarray = field(repr=False)
    pointwise: np.ndarray = field(repr=False)


def classical_limit_residual(record: EvolutionRecord, index: int, include_quantum: bool = True,
                             n_sigma: float = 3.0) -> ResidualReport:
    """L2 norm over the probed region of ``dS/dt + |dS/dx|^2/2m + V + V_Q``.

    ``dS/dt`` is the centred difference of neighbouring snapshots; ``dS/dx``
    comes from the current; ``V_Q`` from the spectral Laplacian of ``R``.
    With ``include_quantum=False`` the ``V_Q`` term is dropped.
    """
    if not 0 < index < len(record) - 1:
        raise ValueError("the residual needs a snapshot on each side")
    psi = record.snapshot(index)
    grid = psi.grid
    m = psi.masses[0]
    hbar = psi.hbar
    region = probe_region(psi, n_sigma)
    polar_decomposition(psi, region)  # validates the region: nodeless and resolvable
    h = record.snapshot_dt
    before, after = record.values[index - 1], record.values[index + 1]
    dS_dt = hbar * np.angle(after * np.conj(before)) / (2 * h)
    grad = spectral_gradient(psi.values, grid)[0]
    rho = np.abs(psi.values) ** 2
    dS_dx = hbar * np.imag(np.conj(psi.values) * grad) / np.where(region, rho, 1.0)
    V = record.potential(grid, float(record.times[index]))
    vq = quantum_potential(psi).filled(0.0)
    res = dS_dt + dS_dx**2 / (2 * m) + V + (vq if include_quantum else 0.0)
    dx = grid.spacing[0]
    norm = math.sqrt(math.fsum((res[region] ** 2).tolist()) * dx)
    qnorm = math.sqrt(math.fsum((vq[region] ** 2).tolist()) * dx)
    return ResidualReport(norm, qnorm, region, np.where(region, res, np.nan))


def quantum_potential_norm(psi: WaveFunction, region: np.ndarray | None = None) -> float:
    vq = quantum_potential(psi).filled(0.0)
    region = probe_region(psi) if region is None else region
    return math.sqrt(math.fsum((vq[region] ** 2).tolist()) * psi.grid.cell_volume)


def hbar_scaling_exponent(hbars, norms) -> float:
    """Least-squares slope of ``log ||V_Q||`` against ``log hbar``."""
    return float(np.polyfit(np.log(hbars), np.log(norms), 1)[0])


__all__ = [
    "QuadraticHJState", "HJFluid", "CausticError", "evolve_quadratic_S", "riccati_free", "riccati_harmonic",
    "velocity_field_classical", "hamilton_flow", "transport_density", "integrate_zeta", "zeta_paths",
    "zeta_ensemble_check", "quantum_potential", "polar_decomposition", "classical_limit_residual",
    "quantum_potential_norm", "hbar_scaling_exponent", "fourier_interpolate", "probe_region",
]
